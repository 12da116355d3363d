"""Vector construction from keypoints and the relative-angle computation.

Angles are interior angles in degrees, always in [0, 180]. The elbow angle is
measured at the elbow between the forearm (elbow->wrist) and the upper arm
(elbow->shoulder), so a fully straight arm measures 180. The shoulder-neck
angle is measured at the shoulder between the upper arm (shoulder->elbow) and
the shoulder->neck direction; an arm hanging straight at the side measures
about 90 and a sideways raise pushes it toward 180.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .kernels import ZERO_EPS_PX
from .model import DEFAULT_LAYOUT, KeypointLayout, Side, Skeleton


class ZeroVectorError(ValueError):
    """Raised when an angle is requested for a vector of (near-)zero length."""


@dataclass(frozen=True)
class Vector2:
    """A 2D pixel-space displacement."""

    dx: float
    dy: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError(f"vector components must be finite, got ({self.dx}, {self.dy})")


def vector_between(start: Sequence[float], end: Sequence[float]) -> Vector2:
    """Displacement vector from ``start`` to ``end`` (2-sequences of pixels)."""
    return Vector2(end[0] - start[0], end[1] - start[1])


def dot(p: Vector2, q: Vector2) -> float:
    return p.dx * q.dx + p.dy * q.dy


def norm(p: Vector2) -> float:
    return math.hypot(p.dx, p.dy)


def angle_between(p: Vector2, q: Vector2) -> float:
    """Interior angle between two vectors, in degrees within [0, 180].

    Equivalent to acos of the normalized dot product, but computed as
    atan2(|cross|, dot) which keeps full precision near 0 and 180 and needs
    no clamping: identical vectors give exactly 0.0, opposite vectors exactly
    180.0. Raises :class:`ZeroVectorError` if either magnitude is below
    ``ZERO_EPS_PX``.
    """
    if norm(p) < ZERO_EPS_PX or norm(q) < ZERO_EPS_PX:
        raise ZeroVectorError("cannot measure an angle against a zero-length vector")
    cross = abs(p.dx * q.dy - p.dy * q.dx)
    return math.degrees(math.atan2(cross, dot(p, q)))


def _arm_angle(
    skeleton: Skeleton, apex_slot: int, to_a: int, to_b: int
) -> Optional[float]:
    kps = skeleton.keypoints
    apex, a, b = kps[apex_slot], kps[to_a], kps[to_b]
    if apex is None or a is None or b is None:
        return None
    try:
        return angle_between(vector_between(apex.xy, a.xy), vector_between(apex.xy, b.xy))
    except ZeroVectorError:
        # coincident keypoints carry no direction; treat as MISSING
        return None


def elbow_angle(
    skeleton: Skeleton, side: Side, layout: KeypointLayout = DEFAULT_LAYOUT
) -> Optional[float]:
    """Angle at the elbow between forearm and upper arm; None if any keypoint is MISSING."""
    wrist, elbow, shoulder = layout.arm_slots(side)
    return _arm_angle(skeleton, apex_slot=elbow, to_a=wrist, to_b=shoulder)


def shoulder_neck_angle(
    skeleton: Skeleton, side: Side, layout: KeypointLayout = DEFAULT_LAYOUT
) -> Optional[float]:
    """Angle at the shoulder between the upper arm and the shoulder->neck direction."""
    _, elbow, shoulder = layout.arm_slots(side)
    return _arm_angle(skeleton, apex_slot=shoulder, to_a=elbow, to_b=layout.neck)
