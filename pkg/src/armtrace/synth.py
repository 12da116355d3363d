"""Deterministic synthetic exam-hall keypoint streams with ground-truth labels.

Students sit at scripted seat positions in image coordinates (y grows
downward). Each arm is driven by two joint parameters: the sideways raise of
the upper arm away from vertical, and the interior elbow angle. Scripted
actions animate those parameters with smooth ease-in/ease-out ramps, seeded
Gaussian jitter models detector noise, and an optional dropout pass knocks
out individual keypoints. Output is byte-identical for a fixed script.
"""

from __future__ import annotations

import json
import math
import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .ingest import FrameObservation, frame_filename, serialize_frame
from .model import (
    BODY_SLOT_COUNT,
    PAPER_LAYOUT,
    Keypoint2D,
    Side,
    Skeleton,
)


class InvalidScriptError(ValueError):
    """Scenario script violates the documented schema or its constraints."""


class ActionKind(str, Enum):
    SHAKE_HANDS = "Shake_Hands"
    EXCHANGE_OBJECT = "Exchange_Object"
    USE_PHONE = "Use_Phone"
    THROW_OBJECT = "Throw_Object"
    IDLE = "Idle"
    RAISE_SIDE = "Raise_Side"


PAIRED_KINDS = frozenset({ActionKind.SHAKE_HANDS, ActionKind.EXCHANGE_OBJECT})

# Body proportions in pixels. Shoulders share the neck's y so a hanging arm
# measures exactly 90 degrees against the shoulder->neck direction.
SHOULDER_HALF_WIDTH_PX = 18.0
UPPER_ARM_PX = 32.0
FOREARM_PX = 28.0

REST_RAISE_DEG = 15.0
REST_ELBOW_DEG = 90.0


@dataclass(frozen=True)
class _ArmProfile:
    raise_deg: float
    elbow_deg: float
    rise_frac: float
    fall_frac: float


# Use_Phone keeps the elbow tightly bent on purpose: it must never satisfy an
# extended-arm threshold, making it a designed negative control.
_PROFILES = {
    ActionKind.EXCHANGE_OBJECT: _ArmProfile(75.0, 168.0, 0.10, 0.10),
    ActionKind.SHAKE_HANDS: _ArmProfile(60.0, 162.0, 0.15, 0.15),
    ActionKind.THROW_OBJECT: _ArmProfile(80.0, 172.0, 0.20, 0.20),
    ActionKind.RAISE_SIDE: _ArmProfile(70.0, 165.0, 0.10, 0.10),
    ActionKind.USE_PHONE: _ArmProfile(12.0, 68.0, 0.15, 0.15),
    ActionKind.IDLE: _ArmProfile(REST_RAISE_DEG, REST_ELBOW_DEG, 0.0, 0.0),
}


@dataclass(frozen=True)
class Seat:
    row: int
    col: int
    x: float
    y: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.row, self.col)


@dataclass(frozen=True)
class ScriptedAction:
    seat: tuple[int, int]
    kind: ActionKind
    start_frame: int
    end_frame: int
    partner: Optional[tuple[int, int]] = None
    side: Optional[Side] = None


@dataclass(frozen=True)
class GroundTruthInterval:
    track_id: str
    side: Side
    start_frame: int
    end_frame: int
    kind: ActionKind


@dataclass(frozen=True)
class GroundTruth:
    intervals: tuple[GroundTruthInterval, ...]


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    fps: float
    duration_frames: int
    seats: tuple[Seat, ...]
    actions: tuple[ScriptedAction, ...]
    jitter_px: float = 1.5
    dropout_rate: float = 0.0
    dropout_conf_floor: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "seats", tuple(self.seats))
        object.__setattr__(self, "actions", tuple(self.actions))
        _validate_script(self)

    def seat_index(self, key: tuple[int, int]) -> int:
        for i, seat in enumerate(self.seats):
            if seat.key == key:
                return i
        raise KeyError(key)


def _validate_script(script: ScenarioScript) -> None:
    if script.fps <= 0:
        raise InvalidScriptError(f"fps must be > 0, got {script.fps}")
    if script.duration_frames < 1:
        raise InvalidScriptError(f"duration_frames must be >= 1, got {script.duration_frames}")
    if script.jitter_px < 0:
        raise InvalidScriptError("jitter_px must be >= 0")
    if not 0.0 <= script.dropout_rate <= 1.0:
        raise InvalidScriptError("dropout_rate must be in [0, 1]")
    if not 0.0 <= script.dropout_conf_floor < 1.0:
        raise InvalidScriptError("dropout_conf_floor must be in [0, 1)")
    if not script.seats:
        raise InvalidScriptError("script needs at least one seat")
    keys = [seat.key for seat in script.seats]
    if len(set(keys)) != len(keys):
        raise InvalidScriptError("duplicate seat (row, col) entries")
    seat_keys = set(keys)
    occupancy: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for idx, action in enumerate(script.actions):
        label = f"actions[{idx}]"
        if action.seat not in seat_keys:
            raise InvalidScriptError(f"{label}: seat {action.seat} is not in the seat list")
        if not 0 <= action.start_frame <= action.end_frame < script.duration_frames:
            raise InvalidScriptError(
                f"{label}: frame range {action.start_frame}..{action.end_frame} "
                f"outside 0..{script.duration_frames - 1}"
            )
        if action.kind in PAIRED_KINDS:
            if action.partner is None:
                raise InvalidScriptError(f"{label}: {action.kind.value} requires a partner seat")
            if action.partner not in seat_keys:
                raise InvalidScriptError(f"{label}: partner {action.partner} is not in the seat list")
            if action.partner == action.seat:
                raise InvalidScriptError(f"{label}: partner must differ from the actor seat")
        elif action.partner is not None:
            raise InvalidScriptError(f"{label}: {action.kind.value} does not take a partner")
        participants = [action.seat] + ([action.partner] if action.partner else [])
        for key in participants:
            for other_start, other_end, other_idx in occupancy.get(key, []):
                if action.start_frame <= other_end and other_start <= action.end_frame:
                    raise InvalidScriptError(
                        f"{label}: seat {key} already busy in actions[{other_idx}] "
                        f"during frames {other_start}..{other_end}"
                    )
            occupancy.setdefault(key, []).append((action.start_frame, action.end_frame, idx))


_TOP_LEVEL_KEYS = {
    "seed",
    "fps",
    "duration_frames",
    "jitter_px",
    "dropout_rate",
    "dropout_conf_floor",
    "grid",
    "seats",
    "actions",
}
_ACTION_KEYS = {"seat", "kind", "start_frame", "end_frame", "partner", "side"}

DEFAULT_GRID_ORIGIN_PX = (160.0, 140.0)
DEFAULT_GRID_SPACING_PX = (200.0, 160.0)


def _seat_from_entry(entry: dict, origin: tuple[float, float], spacing: tuple[float, float]) -> Seat:
    row, col = int(entry["row"]), int(entry["col"])
    x = float(entry.get("x", origin[0] + col * spacing[0]))
    y = float(entry.get("y", origin[1] + row * spacing[1]))
    return Seat(row=row, col=col, x=x, y=y)


def script_from_dict(doc: dict) -> ScenarioScript:
    """Build and validate a ScenarioScript from its JSON document form."""
    if not isinstance(doc, dict):
        raise InvalidScriptError("script must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise InvalidScriptError(f"unknown script fields: {', '.join(sorted(unknown))}")
    for required in ("seed", "fps", "duration_frames", "actions"):
        if required not in doc:
            raise InvalidScriptError(f"missing required script field: {required}")
    if ("grid" in doc) == ("seats" in doc):
        raise InvalidScriptError('exactly one of "grid" or "seats" is required')

    if "grid" in doc:
        grid = doc["grid"]
        if not isinstance(grid, dict) or "rows" not in grid or "cols" not in grid:
            raise InvalidScriptError('"grid" must be an object with "rows" and "cols"')
        origin = tuple(grid.get("origin_px", DEFAULT_GRID_ORIGIN_PX))
        spacing = tuple(grid.get("spacing_px", DEFAULT_GRID_SPACING_PX))
        seat_entries = [
            {"row": r, "col": c} for r in range(int(grid["rows"])) for c in range(int(grid["cols"]))
        ]
    else:
        origin, spacing = DEFAULT_GRID_ORIGIN_PX, DEFAULT_GRID_SPACING_PX
        seat_entries = doc["seats"]
        if not isinstance(seat_entries, list):
            raise InvalidScriptError('"seats" must be a list')
    try:
        seats = tuple(_seat_from_entry(e, origin, spacing) for e in seat_entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScriptError(f"bad seat entry: {exc}") from None

    actions = []
    for idx, entry in enumerate(doc["actions"]):
        label = f"actions[{idx}]"
        if not isinstance(entry, dict):
            raise InvalidScriptError(f"{label}: must be an object")
        unknown = set(entry) - _ACTION_KEYS
        if unknown:
            raise InvalidScriptError(f"{label}: unknown fields: {', '.join(sorted(unknown))}")
        try:
            kind = ActionKind(entry["kind"])
        except (KeyError, ValueError):
            valid = ", ".join(k.value for k in ActionKind)
            raise InvalidScriptError(f"{label}: kind must be one of {valid}") from None
        try:
            seat = (int(entry["seat"][0]), int(entry["seat"][1]))
            start, end = int(entry["start_frame"]), int(entry["end_frame"])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidScriptError(f"{label}: {exc}") from None
        partner = None
        if entry.get("partner") is not None:
            partner = (int(entry["partner"][0]), int(entry["partner"][1]))
        side = None
        if entry.get("side") is not None:
            try:
                side = Side(entry["side"])
            except ValueError:
                raise InvalidScriptError(f"{label}: side must be left or right") from None
        actions.append(
            ScriptedAction(
                seat=seat, kind=kind, start_frame=start, end_frame=end, partner=partner, side=side
            )
        )

    try:
        return ScenarioScript(
            seed=int(doc["seed"]),
            fps=float(doc["fps"]),
            duration_frames=int(doc["duration_frames"]),
            seats=seats,
            actions=tuple(actions),
            jitter_px=float(doc.get("jitter_px", 1.5)),
            dropout_rate=float(doc.get("dropout_rate", 0.0)),
            dropout_conf_floor=float(doc.get("dropout_conf_floor", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidScriptError):
            raise
        raise InvalidScriptError(str(exc)) from None


def load_script(path: Union[str, Path]) -> ScenarioScript:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidScriptError(f"{path.name}: not valid JSON: {exc}") from None
    try:
        return script_from_dict(doc)
    except InvalidScriptError as exc:
        raise InvalidScriptError(f"{path.name}: {exc}") from None


def _smoothstep(u: float) -> float:
    u = min(1.0, max(0.0, u))
    return u * u * (3.0 - 2.0 * u)


def _envelope(frame: int, start: int, end: int, rise_frac: float, fall_frac: float) -> float:
    """Activation weight in [0, 1] with cubic ease-in/ease-out ramps."""
    if frame < start or frame > end:
        return 0.0
    if end == start:
        return 1.0
    p = (frame - start) / (end - start)
    w = 1.0
    if rise_frac > 0.0 and p < rise_frac:
        w = _smoothstep(p / rise_frac)
    if fall_frac > 0.0 and p > 1.0 - fall_frac:
        w = min(w, _smoothstep((1.0 - p) / fall_frac))
    return w


def _arm_points(
    shoulder_x: float, shoulder_y: float, out: float, raise_deg: float, elbow_deg: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Elbow and wrist positions for one arm pose.

    ``out`` is +1 for the right arm, -1 for the left; raise 0 hangs the upper
    arm straight down, raise 90 holds it horizontally outward. The forearm is
    rotated so the interior elbow angle equals ``elbow_deg`` exactly, bending
    inward/up the way a seated person's forearm rests.
    """
    a = math.radians(raise_deg)
    dxu, dyu = out * math.sin(a), math.cos(a)
    ex = shoulder_x + UPPER_ARM_PX * dxu
    ey = shoulder_y + UPPER_ARM_PX * dyu
    rot = math.radians(out * (180.0 - elbow_deg))
    cos_r, sin_r = math.cos(rot), math.sin(rot)
    fx = dxu * cos_r - dyu * sin_r
    fy = dxu * sin_r + dyu * cos_r
    return (ex, ey), (ex + FOREARM_PX * fx, ey + FOREARM_PX * fy)


def _facing_side(me: Seat, other: Seat) -> Side:
    return Side.RIGHT if other.x >= me.x else Side.LEFT


@dataclass(frozen=True)
class _Role:
    start: int
    end: int
    profile: _ArmProfile
    side: Side


def _roles_by_seat(script: ScenarioScript) -> dict[int, list[_Role]]:
    roles: dict[int, list[_Role]] = {i: [] for i in range(len(script.seats))}
    for action in script.actions:
        actor_idx = script.seat_index(action.seat)
        actor_seat = script.seats[actor_idx]
        profile = _PROFILES[action.kind]
        if action.partner is not None:
            partner_idx = script.seat_index(action.partner)
            partner_seat = script.seats[partner_idx]
            actor_side = action.side or _facing_side(actor_seat, partner_seat)
            partner_side = _facing_side(partner_seat, actor_seat)
            roles[partner_idx].append(
                _Role(action.start_frame, action.end_frame, profile, partner_side)
            )
        else:
            actor_side = action.side or Side.RIGHT
        roles[actor_idx].append(_Role(action.start_frame, action.end_frame, profile, actor_side))
    return roles


def _arm_state(roles: list[_Role], frame: int, side: Side) -> tuple[float, float]:
    """(raise_deg, elbow_deg) for one arm at one frame."""
    for role in roles:
        if role.side is side and role.start <= frame <= role.end:
            w = _envelope(frame, role.start, role.end, role.profile.rise_frac, role.profile.fall_frac)
            return (
                REST_RAISE_DEG + w * (role.profile.raise_deg - REST_RAISE_DEG),
                REST_ELBOW_DEG + w * (role.profile.elbow_deg - REST_ELBOW_DEG),
            )
    return (REST_RAISE_DEG, REST_ELBOW_DEG)


def ground_truth_for(script: ScenarioScript) -> GroundTruth:
    """Labeled intervals implied by the script's actions (Idle adds none).

    Track ids follow first-frame detection order (``t00000`` for the first
    seat и so on), matching what the track associator assigns when every
    person is visible from frame 0.
    """
    intervals = []
    for action in script.actions:
        if action.kind is ActionKind.IDLE:
            continue
        actor_idx = script.seat_index(action.seat)
        actor_seat = script.seats[actor_idx]
        if action.partner is not None:
            partner_idx = script.seat_index(action.partner)
            partner_seat = script.seats[partner_idx]
            actor_side = action.side or _facing_side(actor_seat, partner_seat)
            intervals.append(
                GroundTruthInterval(
                    track_id=f"t{partner_idx:05d}",
                    side=_facing_side(partner_seat, actor_seat),
                    start_frame=action.start_frame,
                    end_frame=action.end_frame,
                    kind=action.kind,
                )
            )
        else:
            actor_side = action.side or Side.RIGHT
        intervals.append(
            GroundTruthInterval(
                track_id=f"t{actor_idx:05d}",
                side=actor_side,
                start_frame=action.start_frame,
                end_frame=action.end_frame,
                kind=action.kind,
            )
        )
    intervals.sort(key=lambda gt: (gt.track_id, gt.start_frame, gt.side.value))
    return GroundTruth(intervals=tuple(intervals))


def generate(script: ScenarioScript) -> tuple[list[FrameObservation], GroundTruth]:
    """Render the scripted scenario to per-frame observations plus labels.

    People appear in seat order in every frame. Jitter and confidence draws
    come from a generator seeded with ``script.seed``; the optional dropout
    pass uses ``script.seed + 1``, so equal scripts give equal bytes.
    """
    rng = np.random.default_rng(script.seed)
    roles = _roles_by_seat(script)
    layout = PAPER_LAYOUT
    arm_slot_order = (
        (Side.LEFT, layout.arm_slots(Side.LEFT)),
        (Side.RIGHT, layout.arm_slots(Side.RIGHT)),
    )
    frames: list[FrameObservation] = []
    for frame in range(script.duration_frames):
        timestamp_ms = frame * 1000.0 / script.fps
        detections = []
        for seat_idx, seat in enumerate(script.seats):
            points = np.zeros((7, 2))
            points[0] = (seat.x, seat.y)  # neck
            slot_of = [layout.neck]
            for side, (wrist_slot, elbow_slot, shoulder_slot) in arm_slot_order:
                out = 1.0 if side is Side.RIGHT else -1.0
                sx = seat.x + out * SHOULDER_HALF_WIDTH_PX
                sy = seat.y
                raise_deg, elbow_deg = _arm_state(roles[seat_idx], frame, side)
                (ex, ey), (wx, wy) = _arm_points(sx, sy, out, raise_deg, elbow_deg)
                points[len(slot_of)] = (sx, sy)
                slot_of.append(shoulder_slot)
                points[len(slot_of)] = (ex, ey)
                slot_of.append(elbow_slot)
                points[len(slot_of)] = (wx, wy)
                slot_of.append(wrist_slot)
            points += rng.normal(0.0, script.jitter_px, size=points.shape)
            confidences = np.clip(rng.normal(0.88, 0.04, size=7), 0.3, 1.0)
            slots: list[Optional[Keypoint2D]] = [None] * BODY_SLOT_COUNT
            for (x, y), conf, slot in zip(points, confidences, slot_of):
                slots[slot] = Keypoint2D(float(x), float(y), float(conf))
            detections.append(Skeleton(keypoints=tuple(slots), frame=frame, timestamp_ms=timestamp_ms))
        frames.append(
            FrameObservation(frame=frame, timestamp_ms=timestamp_ms, detections=tuple(detections))
        )
    if script.dropout_rate > 0.0:
        frames = degrade(
            frames,
            drop_rate=script.dropout_rate,
            conf_floor=script.dropout_conf_floor,
            seed=script.seed + 1,
        )
    return frames, ground_truth_for(script)


def degrade(
    frames: list[FrameObservation],
    drop_rate: float,
    conf_floor: float = 0.0,
    seed: int = 0,
) -> list[FrameObservation]:
    """Independently drop keypoints with probability ``drop_rate``.

    Surviving confidences are rescaled into [conf_floor, 1]; with the default
    floor of 0 and a drop rate of 0 the frames come back unchanged.
    Deterministic for a fixed seed.
    """
    if not 0.0 <= drop_rate <= 1.0:
        raise ValueError(f"drop_rate must be in [0, 1], got {drop_rate}")
    if not 0.0 <= conf_floor < 1.0:
        raise ValueError(f"conf_floor must be in [0, 1), got {conf_floor}")
    rng = np.random.default_rng(seed)
    out = []
    for obs in frames:
        detections = []
        for skel in obs.detections:
            slots: list[Optional[Keypoint2D]] = []
            for kp in skel.keypoints:
                if kp is None:
                    slots.append(None)
                elif rng.random() < drop_rate:
                    slots.append(None)
                else:
                    conf = conf_floor + (1.0 - conf_floor) * kp.confidence
                    slots.append(Keypoint2D(kp.x, kp.y, conf))
            detections.append(
                Skeleton(keypoints=tuple(slots), frame=skel.frame, timestamp_ms=skel.timestamp_ms)
            )
        out.append(
            FrameObservation(frame=obs.frame, timestamp_ms=obs.timestamp_ms, detections=tuple(detections))
        )
    return out


def write_frames(frames: list[FrameObservation], out_dir: Union[str, Path]) -> list[Path]:
    """Write one keypoint JSON file per frame; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for obs in frames:
        path = out_dir / frame_filename(obs.frame)
        path.write_text(serialize_frame(obs) + "\n")
        paths.append(path)
    return paths


GROUND_TRUTH_COLUMNS = ("track_id", "side", "start_frame", "end_frame", "kind")


def write_ground_truth(gt: GroundTruth, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_COLUMNS)
        for interval in gt.intervals:
            writer.writerow(
                [
                    interval.track_id,
                    interval.side.value,
                    interval.start_frame,
                    interval.end_frame,
                    interval.kind.value,
                ]
            )


def read_ground_truth(path: Union[str, Path]) -> GroundTruth:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != list(GROUND_TRUTH_COLUMNS):
            raise ValueError(f"unexpected ground-truth header: {header}")
        intervals = tuple(
            GroundTruthInterval(
                track_id=row[0],
                side=Side(row[1]),
                start_frame=int(row[2]),
                end_frame=int(row[3]),
                kind=ActionKind(row[4]),
            )
            for row in reader
            if row
        )
    return GroundTruth(intervals=intervals)


# One exchange between front-row neighbors plus two phone users as negative
# controls; everyone else sits idle.
DEMO_SCRIPT: dict = {
    "seed": 1207,
    "fps": 25,
    "duration_frames": 300,
    "jitter_px": 1.5,
    "dropout_rate": 0.05,
    "dropout_conf_floor": 0.2,
    "grid": {"rows": 4, "cols": 4, "origin_px": [160, 140], "spacing_px": [200, 160]},
    "actions": [
        {"seat": [0, 0], "kind": "Exchange_Object", "start_frame": 100, "end_frame": 200, "partner": [0, 1]},
        {"seat": [1, 1], "kind": "Use_Phone", "start_frame": 50, "end_frame": 250},
        {"seat": [2, 2], "kind": "Use_Phone", "start_frame": 60, "end_frame": 240},
    ],
}


def demo_script() -> ScenarioScript:
    """The bundled demonstration scenario (also used by the synth CLI's --demo)."""
    return script_from_dict(DEMO_SCRIPT)
