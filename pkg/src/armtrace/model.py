"""Core value types shared across the pipeline.

Everything here is immutable value data: keypoints, per-frame skeletons,
per-person tracks, per-frame angle samples, and flagged episodes. A keypoint
slot that the detector did not see (or saw below the confidence floor) is
represented as ``None`` and called MISSING throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

BODY_SLOT_COUNT = 25

# Pose estimators emit confidence 0 for joints they never saw; a small positive
# floor rejects noise without discarding real detections.
DEFAULT_MIN_CONFIDENCE = 0.1


class Side(str, Enum):
    """Which arm a measurement refers to."""

    LEFT = "left"
    RIGHT = "right"


class SuspicionRule(str, Enum):
    """Which detector produced an episode."""

    EXTENDED_ARM = "extended_arm"
    SD_OUTLIER = "sd_outlier"
    EXCHANGE_CANDIDATE = "exchange_candidate"


@dataclass(frozen=True)
class Keypoint2D:
    """One detected body landmark: pixel position plus detector confidence."""

    x: float
    y: float
    confidence: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"keypoint coordinates must be finite, got ({self.x}, {self.y})")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class KeypointLayout:
    """Maps the seven analysis landmarks onto slots of the 25-slot body layout.

    Two presets exist because the slot assignment of left vs. right arm
    differs between conventions; all downstream logic goes through this map
    so the choice stays explicit and testable.
    """

    name: str
    neck: int
    left_shoulder: int
    left_elbow: int
    left_wrist: int
    right_shoulder: int
    right_elbow: int
    right_wrist: int

    def __post_init__(self) -> None:
        slots = self.analysis_slots()
        if len(set(slots)) != len(slots):
            raise ValueError("analysis landmarks must occupy distinct slots")
        for slot in slots:
            if not 0 <= slot < BODY_SLOT_COUNT:
                raise ValueError(f"slot {slot} outside 0..{BODY_SLOT_COUNT - 1}")

    def analysis_slots(self) -> tuple[int, ...]:
        return (
            self.neck,
            self.left_shoulder,
            self.left_elbow,
            self.left_wrist,
            self.right_shoulder,
            self.right_elbow,
            self.right_wrist,
        )

    def arm_slots(self, side: Side) -> tuple[int, int, int]:
        """(wrist, elbow, shoulder) slot indices for one arm."""
        if side is Side.LEFT:
            return (self.left_wrist, self.left_elbow, self.left_shoulder)
        return (self.right_wrist, self.right_elbow, self.right_shoulder)


PAPER_LAYOUT = KeypointLayout(
    name="paper",
    neck=1,
    left_shoulder=2,
    left_elbow=3,
    left_wrist=4,
    right_shoulder=5,
    right_elbow=6,
    right_wrist=7,
)

BODY25_LAYOUT = KeypointLayout(
    name="body25-standard",
    neck=1,
    right_shoulder=2,
    right_elbow=3,
    right_wrist=4,
    left_shoulder=5,
    left_elbow=6,
    left_wrist=7,
)

LAYOUTS = {layout.name: layout for layout in (PAPER_LAYOUT, BODY25_LAYOUT)}
DEFAULT_LAYOUT = PAPER_LAYOUT


@dataclass(frozen=True)
class Skeleton:
    """All 25 keypoint slots for one person in one frame."""

    keypoints: tuple[Optional[Keypoint2D], ...]
    frame: int
    timestamp_ms: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        if len(self.keypoints) != BODY_SLOT_COUNT:
            raise ValueError(
                f"skeleton must have exactly {BODY_SLOT_COUNT} keypoint slots, got {len(self.keypoints)}"
            )
        if self.frame < 0:
            raise ValueError(f"frame index must be >= 0, got {self.frame}")
        if self.timestamp_ms < 0:
            raise ValueError(f"timestamp_ms must be >= 0, got {self.timestamp_ms}")


def validate_skeleton(
    raw: Sequence[Optional[Keypoint2D]],
    frame: int,
    timestamp_ms: float,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> Skeleton:
    """Build a Skeleton from 25 optional keypoints, gating low-confidence slots.

    Slots whose confidence falls below ``min_confidence`` become MISSING.
    Raises ValueError on a wrong slot count or a negative timestamp.
    """
    if len(raw) != BODY_SLOT_COUNT:
        raise ValueError(f"expected {BODY_SLOT_COUNT} keypoint slots, got {len(raw)}")
    if timestamp_ms < 0:
        raise ValueError(f"timestamp_ms must be >= 0, got {timestamp_ms}")
    gated = tuple(
        kp if kp is not None and kp.confidence >= min_confidence else None for kp in raw
    )
    return Skeleton(keypoints=gated, frame=frame, timestamp_ms=timestamp_ms)


@dataclass(frozen=True)
class PersonTrack:
    """Identity-stable, frame-ordered sequence of skeletons for one person."""

    track_id: str
    skeletons: tuple[Skeleton, ...]
    seat_hint: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "skeletons", tuple(self.skeletons))
        frames = [s.frame for s in self.skeletons]
        for prev, cur in zip(frames, frames[1:]):
            if cur <= prev:
                raise ValueError(f"track frames must be strictly increasing ({prev} -> {cur})")
        times = [s.timestamp_ms for s in self.skeletons]
        for prev, cur in zip(times, times[1:]):
            if cur < prev:
                raise ValueError("track timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.skeletons)


def track_to_arrays(track: PersonTrack) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a track into (frames, timestamps_ms, keypoints) arrays.

    keypoints has shape (F, 25, 3) holding x, y, confidence with NaN for
    MISSING slots. The array form is what the numeric kernels operate on.
    """
    count = len(track.skeletons)
    frames = np.empty(count, dtype=np.int64)
    timestamps = np.empty(count, dtype=np.float64)
    kps = np.full((count, BODY_SLOT_COUNT, 3), np.nan, dtype=np.float64)
    for i, skel in enumerate(track.skeletons):
        frames[i] = skel.frame
        timestamps[i] = skel.timestamp_ms
        for j, kp in enumerate(skel.keypoints):
            if kp is not None:
                kps[i, j, 0] = kp.x
                kps[i, j, 1] = kp.y
                kps[i, j, 2] = kp.confidence
    return frames, timestamps, kps


def track_from_arrays(
    track_id: str,
    frames: np.ndarray,
    timestamps_ms: np.ndarray,
    keypoints: np.ndarray,
    seat_hint: Optional[str] = None,
) -> PersonTrack:
    """Inverse of :func:`track_to_arrays`; NaN x-coordinates mark MISSING slots."""
    skeletons = []
    for i in range(len(frames)):
        slots: list[Optional[Keypoint2D]] = []
        for j in range(BODY_SLOT_COUNT):
            x, y, c = keypoints[i, j]
            if math.isnan(x):
                slots.append(None)
            else:
                slots.append(Keypoint2D(float(x), float(y), float(c)))
        skeletons.append(
            Skeleton(keypoints=tuple(slots), frame=int(frames[i]), timestamp_ms=float(timestamps_ms[i]))
        )
    return PersonTrack(track_id=track_id, skeletons=tuple(skeletons), seat_hint=seat_hint)


@dataclass(frozen=True)
class ArmAngleSample:
    """Per-frame arm geometry for one side: elbow angle and shoulder-neck angle."""

    frame: int
    timestamp_ms: float
    side: Side
    elbow_angle_deg: Optional[float]
    shoulder_neck_angle_deg: Optional[float]

    def __post_init__(self) -> None:
        for value in (self.elbow_angle_deg, self.shoulder_neck_angle_deg):
            if value is not None and not (0.0 <= value <= 180.0):
                raise ValueError(f"angle must lie in [0, 180], got {value}")


@dataclass(frozen=True)
class SuspicionEpisode:
    """A flagged time interval for one track (plus a partner for exchanges)."""

    track_id: str
    side: Side
    start_frame: int
    end_frame: int
    start_ms: float
    end_ms: float
    peak_elbow_angle_deg: float
    mean_elbow_angle_deg: float
    rule: SuspicionRule
    partner_track_id: Optional[str] = None
    partner_side: Optional[Side] = None

    def __post_init__(self) -> None:
        if self.end_frame < self.start_frame:
            raise ValueError("episode end_frame must be >= start_frame")
        if self.end_ms < self.start_ms:
            raise ValueError("episode end_ms must be >= start_ms")

    def duration_ms(self, frame_period_ms: float) -> float:
        """Inclusive duration: the last frame counts for one full frame period."""
        return self.end_ms - self.start_ms + frame_period_ms
