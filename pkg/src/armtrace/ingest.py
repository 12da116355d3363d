"""Parse pose-estimator output and associate per-frame detections into tracks.

Two input layouts are accepted:

* a directory of per-frame JSON files, each ``{"people": [{"pose_keypoints_2d":
  [x0, y0, c0, ... x24, y24, c24]}]}`` (75 numbers per person), ordered by the
  zero-padded frame number embedded in the filename;
* a single consolidated CSV with header ``frame, person_index, slot, x, y,
  confidence`` where absent rows mean MISSING keypoints.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .model import (
    BODY_SLOT_COUNT,
    DEFAULT_LAYOUT,
    DEFAULT_MIN_CONFIDENCE,
    KeypointLayout,
    Keypoint2D,
    PersonTrack,
    Skeleton,
    validate_skeleton,
)

VALUES_PER_PERSON = BODY_SLOT_COUNT * 3

DEFAULT_MAX_DISPLACEMENT_PX = 80.0
DEFAULT_DORMANT_GRACE_FRAMES = 15


class MalformedFileError(ValueError):
    """Input file violates the documented keypoint layout."""


class BadTripleCountError(MalformedFileError):
    """A person's keypoint array is not exactly 25 (x, y, confidence) triples."""


@dataclass(frozen=True)
class FrameObservation:
    """All detections of one frame, identities unknown."""

    frame: int
    timestamp_ms: float
    detections: tuple[Skeleton, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))
        for skel in self.detections:
            if skel.frame != self.frame:
                raise ValueError("all detections must share the observation's frame index")


def _skeleton_from_triples(
    values: Sequence[float], frame: int, timestamp_ms: float, min_confidence: float
) -> Skeleton:
    if len(values) != VALUES_PER_PERSON:
        raise BadTripleCountError(
            f"person keypoint array must hold {VALUES_PER_PERSON} values, got {len(values)}"
        )
    slots: list[Optional[Keypoint2D]] = []
    for i in range(BODY_SLOT_COUNT):
        x, y, c = values[3 * i : 3 * i + 3]
        try:
            slots.append(Keypoint2D(float(x), float(y), float(c)))
        except (TypeError, ValueError) as exc:
            raise MalformedFileError(f"bad keypoint triple at slot {i}: {exc}") from None
    return validate_skeleton(slots, frame=frame, timestamp_ms=timestamp_ms, min_confidence=min_confidence)


def parse_frame_file(
    data: Union[bytes, str],
    frame: int,
    fps: float,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> FrameObservation:
    """Parse one per-frame keypoint file; timestamp is frame * 1000 / fps."""
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("people"), list):
        raise MalformedFileError('frame file must be an object with a "people" list')
    timestamp_ms = frame * 1000.0 / fps
    detections = []
    for idx, person in enumerate(doc["people"]):
        if not isinstance(person, dict) or "pose_keypoints_2d" not in person:
            raise MalformedFileError(f'person {idx} lacks a "pose_keypoints_2d" array')
        values = person["pose_keypoints_2d"]
        if not isinstance(values, list):
            raise MalformedFileError(f"person {idx}: pose_keypoints_2d must be a list")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise MalformedFileError(f"person {idx}: pose_keypoints_2d must be numeric")
        detections.append(_skeleton_from_triples(values, frame, timestamp_ms, min_confidence))
    return FrameObservation(frame=frame, timestamp_ms=timestamp_ms, detections=tuple(detections))


def serialize_frame(obs: FrameObservation) -> str:
    """Render an observation back to frame-file JSON.

    MISSING slots become (0, 0, 0) triples; present triples use Python's
    shortest round-trip float text, so parse -> serialize is lossless.
    """
    people = []
    for skel in obs.detections:
        values: list[float] = []
        for kp in skel.keypoints:
            if kp is None:
                values.extend((0.0, 0.0, 0.0))
            else:
                values.extend((kp.x, kp.y, kp.confidence))
        people.append({"pose_keypoints_2d": values})
    return json.dumps({"people": people})


def frame_filename(frame: int) -> str:
    return f"frame_{frame:06d}_keypoints.json"


_DIGIT_RUN = re.compile(r"\d+")


def frame_number_of(path: Union[str, Path]) -> Optional[int]:
    """Frame number embedded in a filename: the last digit run of the stem."""
    runs = _DIGIT_RUN.findall(Path(path).stem)
    return int(runs[-1]) if runs else None


def discover_frame_files(directory: Union[str, Path]) -> list[tuple[int, Path]]:
    """JSON frame files in a directory, ordered by embedded frame number."""
    directory = Path(directory)
    numbered = []
    for path in sorted(directory.glob("*.json")):
        number = frame_number_of(path)
        if number is not None:
            numbered.append((number, path))
    numbered.sort(key=lambda item: item[0])
    for (na, pa), (nb, pb) in zip(numbered, numbered[1:]):
        if na == nb:
            raise MalformedFileError(f"duplicate frame number {na}: {pa.name} and {pb.name}")
    return numbered


def load_frame_dir(
    directory: Union[str, Path],
    fps: float,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> list[FrameObservation]:
    """Parse every frame file of a directory in frame order."""
    observations = []
    for frame, path in discover_frame_files(directory):
        try:
            observations.append(parse_frame_file(path.read_bytes(), frame, fps, min_confidence))
        except MalformedFileError as exc:
            raise type(exc)(f"{path.name}: {exc}") from None
    return observations


TABLE_COLUMNS = ("frame", "person_index", "slot", "x", "y", "confidence")


def parse_table(
    text: str, fps: float, min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> list[FrameObservation]:
    """Parse the consolidated CSV layout into frame observations."""
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedFileError("table is empty; header row required") from None
    if [h.strip() for h in header] != list(TABLE_COLUMNS):
        raise MalformedFileError(
            f"table header must be {', '.join(TABLE_COLUMNS)}; got {', '.join(header)}"
        )
    cells: dict[int, dict[int, dict[int, tuple[float, float, float]]]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TABLE_COLUMNS):
            raise MalformedFileError(f"line {line_no}: expected {len(TABLE_COLUMNS)} cells")
        try:
            frame, person, slot = int(row[0]), int(row[1]), int(row[2])
            x, y, c = float(row[3]), float(row[4]), float(row[5])
        except ValueError as exc:
            raise MalformedFileError(f"line {line_no}: {exc}") from None
        if not 0 <= slot < BODY_SLOT_COUNT:
            raise MalformedFileError(f"line {line_no}: slot {slot} outside 0..{BODY_SLOT_COUNT - 1}")
        persons = cells.setdefault(frame, {})
        slots = persons.setdefault(person, {})
        if slot in slots:
            raise MalformedFileError(
                f"line {line_no}: duplicate cell for frame {frame}, person {person}, slot {slot}"
            )
        slots[slot] = (x, y, c)
    observations = []
    for frame in sorted(cells):
        timestamp_ms = frame * 1000.0 / fps
        detections = []
        for person in sorted(cells[frame]):
            raw: list[Optional[Keypoint2D]] = [None] * BODY_SLOT_COUNT
            for slot, (x, y, c) in cells[frame][person].items():
                try:
                    raw[slot] = Keypoint2D(x, y, c)
                except ValueError as exc:
                    raise MalformedFileError(f"frame {frame} person {person} slot {slot}: {exc}") from None
            detections.append(
                validate_skeleton(raw, frame=frame, timestamp_ms=timestamp_ms, min_confidence=min_confidence)
            )
        observations.append(
            FrameObservation(frame=frame, timestamp_ms=timestamp_ms, detections=tuple(detections))
        )
    return observations


def load_table(
    path: Union[str, Path], fps: float, min_confidence: float = DEFAULT_MIN_CONFIDENCE
) -> list[FrameObservation]:
    path = Path(path)
    try:
        return parse_table(path.read_text(), fps, min_confidence)
    except MalformedFileError as exc:
        raise type(exc)(f"{path.name}: {exc}") from None


def write_table(observations: Iterable[FrameObservation], path: Union[str, Path]) -> None:
    """Write observations in the consolidated layout (present keypoints only)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for obs in observations:
            for person_index, skel in enumerate(obs.detections):
                for slot, kp in enumerate(skel.keypoints):
                    if kp is not None:
                        writer.writerow([obs.frame, person_index, slot, kp.x, kp.y, kp.confidence])


def anchor_point(
    skeleton: Skeleton, layout: KeypointLayout = DEFAULT_LAYOUT
) -> Optional[np.ndarray]:
    """Stable per-person reference point used for frame-to-frame association.

    The neck when present, else the centroid of the present analysis
    landmarks, else None.
    """
    neck = skeleton.keypoints[layout.neck]
    if neck is not None:
        return np.array(neck.xy, dtype=np.float64)
    points = [
        skeleton.keypoints[slot].xy
        for slot in layout.analysis_slots()
        if skeleton.keypoints[slot] is not None
    ]
    if not points:
        return None
    return np.mean(np.asarray(points, dtype=np.float64), axis=0)


def build_distance_matrix(
    a: Sequence[Sequence[float]], b: Sequence[Sequence[float]]
) -> np.ndarray:
    """Euclidean distance matrix D[i][j] = |a[i] - b[j]| in pixels."""
    a_arr = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b_arr = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    return kernels.pairwise_distances(np.ascontiguousarray(a_arr), np.ascontiguousarray(b_arr))


@dataclass
class _LiveTrack:
    track_id: str
    skeletons: list[Skeleton] = field(default_factory=list)
    last_anchor: Optional[np.ndarray] = None
    last_frame: int = -1


class TrackAssociator:
    """Sequential greedy nearest-neighbor association of detections to tracks.

    Feed frame observations in increasing frame order via :meth:`update`;
    :meth:`finish` returns the accumulated tracks. Matching repeatedly takes
    the globally smallest remaining anchor distance within the displacement
    gate, breaking ties toward the lowest track id and then the lowest
    detection index, so results are deterministic. Unmatched detections open
    new tracks; unmatched tracks stay alive (dormant) for a grace window of
    frames and then close.
    """

    def __init__(
        self,
        max_displacement_px: float = DEFAULT_MAX_DISPLACEMENT_PX,
        dormant_grace_frames: int = DEFAULT_DORMANT_GRACE_FRAMES,
        layout: KeypointLayout = DEFAULT_LAYOUT,
    ) -> None:
        if max_displacement_px <= 0:
            raise ValueError("max_displacement_px must be > 0")
        if dormant_grace_frames < 0:
            raise ValueError("dormant_grace_frames must be >= 0")
        self.max_displacement_px = max_displacement_px
        self.dormant_grace_frames = dormant_grace_frames
        self.layout = layout
        self._live: list[_LiveTrack] = []
        self._closed: list[_LiveTrack] = []
        self._next_id = 0
        self._last_update_frame: Optional[int] = None

    def _new_track(self, skeleton: Skeleton, anchor: Optional[np.ndarray]) -> None:
        track = _LiveTrack(track_id=f"t{self._next_id:05d}")
        self._next_id += 1
        track.skeletons.append(skeleton)
        track.last_anchor = anchor
        track.last_frame = skeleton.frame
        self._live.append(track)

    def update(self, obs: FrameObservation) -> None:
        if self._last_update_frame is not None and obs.frame <= self._last_update_frame:
            raise ValueError(
                f"observations must arrive in increasing frame order "
                f"({self._last_update_frame} then {obs.frame})"
            )
        self._last_update_frame = obs.frame

        still_live = []
        for track in self._live:
            if obs.frame - track.last_frame > self.dormant_grace_frames:
                self._closed.append(track)
            else:
                still_live.append(track)
        self._live = still_live

        anchors = [anchor_point(skel, self.layout) for skel in obs.detections]
        rows = [i for i, a in enumerate(anchors) if a is not None]
        cols = [t for t in self._live if t.last_anchor is not None]
        matched_dets: set[int] = set()
        if rows and cols:
            dist = build_distance_matrix(
                [anchors[i] for i in rows], [t.last_anchor for t in cols]
            )
            open_rows = set(range(len(rows)))
            open_cols = set(range(len(cols)))
            while open_rows and open_cols:
                best = None
                for c in sorted(open_cols):
                    for r in sorted(open_rows):
                        d = dist[r, c]
                        if d > self.max_displacement_px:
                            continue
                        if best is None or d < best[0]:
                            best = (d, c, r)
                if best is None:
                    break
                _, c, r = best
                det_index = rows[r]
                track = cols[c]
                track.skeletons.append(obs.detections[det_index])
                track.last_anchor = anchors[det_index]
                track.last_frame = obs.frame
                matched_dets.add(det_index)
                open_rows.discard(r)
                open_cols.discard(c)

        for i, skel in enumerate(obs.detections):
            if i not in matched_dets:
                self._new_track(skel, anchors[i])

    def finish(self) -> tuple[PersonTrack, ...]:
        tracks = [
            PersonTrack(track_id=t.track_id, skeletons=tuple(t.skeletons))
            for t in self._closed + self._live
        ]
        tracks.sort(key=lambda t: t.track_id)
        return tuple(tracks)


def associate_frames(
    observations: Iterable[FrameObservation],
    max_displacement_px: float = DEFAULT_MAX_DISPLACEMENT_PX,
    dormant_grace_frames: int = DEFAULT_DORMANT_GRACE_FRAMES,
    layout: KeypointLayout = DEFAULT_LAYOUT,
) -> tuple[PersonTrack, ...]:
    """Fold observations (in frame order) through a TrackAssociator."""
    associator = TrackAssociator(max_displacement_px, dormant_grace_frames, layout)
    for obs in observations:
        associator.update(obs)
    return associator.finish()
