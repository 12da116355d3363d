"""Per-track time-series conditioning: gap interpolation, smoothing, angle extraction.

Series are array-backed (NaN marks MISSING) so the hot loops run through the
numeric kernels; :class:`AngleSeries.samples` materializes the per-frame value
objects when object-level access is preferred.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np

from . import kernels
from .model import (
    BODY_SLOT_COUNT,
    DEFAULT_LAYOUT,
    ArmAngleSample,
    KeypointLayout,
    PersonTrack,
    Side,
    track_from_arrays,
    track_to_arrays,
)

DEFAULT_MAX_GAP_FRAMES = 10
DEFAULT_SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class AngleSeries:
    """Frame-ordered elbow and shoulder-neck angles for one (track, side)."""

    track_id: str
    side: Side
    fps: float
    frames: np.ndarray
    timestamps_ms: np.ndarray
    elbow_deg: np.ndarray
    shoulder_deg: np.ndarray

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        frames = np.asarray(self.frames, dtype=np.int64)
        object.__setattr__(self, "frames", frames)
        for name in ("timestamps_ms", "elbow_deg", "shoulder_deg"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != frames.shape:
                raise ValueError(f"{name} must match frames in length")
            object.__setattr__(self, name, arr)
        if frames.size > 1 and not np.all(np.diff(frames) > 0):
            raise ValueError("series frames must be strictly increasing")
        for arr in (self.frames, self.timestamps_ms, self.elbow_deg, self.shoulder_deg):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return int(self.frames.size)

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 / self.fps

    @property
    def samples(self) -> tuple[ArmAngleSample, ...]:
        out = []
        for i in range(len(self)):
            e = float(self.elbow_deg[i])
            s = float(self.shoulder_deg[i])
            out.append(
                ArmAngleSample(
                    frame=int(self.frames[i]),
                    timestamp_ms=float(self.timestamps_ms[i]),
                    side=self.side,
                    elbow_angle_deg=None if math.isnan(e) else e,
                    shoulder_neck_angle_deg=None if math.isnan(s) else s,
                )
            )
        return tuple(out)


class PersonStats(NamedTuple):
    """Mean and population SD of the present elbow-angle samples."""

    mean: Optional[float]
    sd: Optional[float]
    n: int


def interpolate_gaps(track: PersonTrack, max_gap_frames: int = DEFAULT_MAX_GAP_FRAMES) -> PersonTrack:
    """Fill short MISSING runs of each keypoint slot by linear interpolation.

    A run is filled only when it is bounded by present samples on both sides
    and spans at most ``max_gap_frames`` frames; leading and trailing runs are
    never extrapolated. Filled keypoints carry the minimum confidence of the
    two bounding samples. Idempotent.
    """
    if max_gap_frames < 0:
        raise ValueError(f"max_gap_frames must be >= 0, got {max_gap_frames}")
    if len(track) == 0 or max_gap_frames == 0:
        return track
    frames, timestamps, kps = track_to_arrays(track)
    filled = np.empty_like(kps)
    for slot in range(BODY_SLOT_COUNT):
        xs, ys, cs = kps[:, slot, 0], kps[:, slot, 1], kps[:, slot, 2]
        ox, oy, oc = kernels.fill_slot_gaps(
            np.ascontiguousarray(xs),
            np.ascontiguousarray(ys),
            np.ascontiguousarray(cs),
            frames,
            max_gap_frames,
        )
        filled[:, slot, 0] = ox
        filled[:, slot, 1] = oy
        filled[:, slot, 2] = oc
    return track_from_arrays(track.track_id, frames, timestamps, filled, track.seat_hint)


def extract_angle_series(
    track: PersonTrack,
    side: Side,
    fps: float,
    layout: KeypointLayout = DEFAULT_LAYOUT,
) -> AngleSeries:
    """Compute one ArmAngleSample per skeleton frame for the given arm."""
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    frames, timestamps, kps = track_to_arrays(track)
    wrist, elbow, shoulder = layout.arm_slots(side)
    wx, wy = kps[:, wrist, 0], kps[:, wrist, 1]
    ex, ey = kps[:, elbow, 0], kps[:, elbow, 1]
    sx, sy = kps[:, shoulder, 0], kps[:, shoulder, 1]
    nx, ny = kps[:, layout.neck, 0], kps[:, layout.neck, 1]
    elbow_deg = kernels.angles_between(wx - ex, wy - ey, sx - ex, sy - ey, kernels.ZERO_EPS_PX)
    shoulder_deg = kernels.angles_between(ex - sx, ey - sy, nx - sx, ny - sy, kernels.ZERO_EPS_PX)
    return AngleSeries(
        track_id=track.track_id,
        side=side,
        fps=fps,
        frames=frames,
        timestamps_ms=timestamps,
        elbow_deg=elbow_deg,
        shoulder_deg=shoulder_deg,
    )


def smooth_angles(series: AngleSeries, window: int = DEFAULT_SMOOTH_WINDOW) -> AngleSeries:
    """Centered moving median over present samples; window must be odd.

    MISSING samples pass through unchanged and never contribute to a
    neighbor's window; endpoint windows are truncated to what exists.
    Window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 1, got {window}")
    return AngleSeries(
        track_id=series.track_id,
        side=series.side,
        fps=series.fps,
        frames=series.frames,
        timestamps_ms=series.timestamps_ms,
        elbow_deg=kernels.moving_median(np.ascontiguousarray(series.elbow_deg), window),
        shoulder_deg=kernels.moving_median(np.ascontiguousarray(series.shoulder_deg), window),
    )


def person_stats(series: AngleSeries) -> PersonStats:
    """Arithmetic mean and population SD over the present elbow-angle samples."""
    values = series.elbow_deg[~np.isnan(series.elbow_deg)]
    if values.size == 0:
        return PersonStats(mean=None, sd=None, n=0)
    return PersonStats(
        mean=float(np.mean(values)),
        sd=float(np.std(values)),
        n=int(values.size),
    )


ANGLE_TABLE_COLUMNS = (
    "track_id",
    "side",
    "frame",
    "timestamp_ms",
    "elbow_angle_deg",
    "shoulder_neck_angle_deg",
)


def write_angle_table(
    series_list: Iterable[AngleSeries], destination: Union[str, Path, io.TextIOBase]
) -> None:
    """Export angle series as CSV; MISSING angles become empty cells."""
    own = isinstance(destination, (str, Path))
    handle = open(destination, "w", newline="") if own else destination
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(ANGLE_TABLE_COLUMNS)
        for series in series_list:
            for i in range(len(series)):
                e = series.elbow_deg[i]
                s = series.shoulder_deg[i]
                writer.writerow(
                    [
                        series.track_id,
                        series.side.value,
                        int(series.frames[i]),
                        float(series.timestamps_ms[i]),
                        "" if math.isnan(e) else float(e),
                        "" if math.isnan(s) else float(s),
                    ]
                )
    finally:
        if own:
            handle.close()
