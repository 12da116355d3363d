"""Vectorized pure-numpy kernel implementations.

Contracts (shared with `_numba`):

* ``pairwise_distances(a, b)``: Euclidean distance matrix between point sets
  of shape (m, 2) and (n, 2).
* ``angles_between(px, py, qx, qy, eps)``: elementwise angle in degrees
  [0, 180] between vector pairs; NaN where any component is NaN or either
  magnitude is below ``eps``.
* ``moving_median(values, window)``: centered moving median with truncated
  endpoint windows; NaN samples pass through and never contribute.
* ``fill_slot_gaps(xs, ys, cs, frames, max_gap)``: linear fill of interior NaN
  runs no longer than ``max_gap`` (in frame units); filled confidence is the
  minimum of the two bounding samples; edges are never extrapolated.
"""

from __future__ import annotations

import warnings

import numpy as np


def pairwise_distances(a, b):
    m, n = a.shape[0], b.shape[0]
    if m == 0 or n == 0:
        return np.zeros((m, n), dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def angles_between(px, py, qx, qy, eps):
    with np.errstate(invalid="ignore"):
        cross = np.abs(px * qy - py * qx)
        dot = px * qx + py * qy
        out = np.degrees(np.arctan2(cross, dot))
        bad = (np.hypot(px, py) < eps) | (np.hypot(qx, qy) < eps)
    out = np.where(bad, np.nan, out)
    return out


def moving_median(values, window):
    n = values.shape[0]
    if window == 1 or n == 0:
        return values.copy()
    half = window // 2
    pad = np.full(half, np.nan)
    padded = np.concatenate([pad, values, pad])
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    with warnings.catch_warnings():
        # all-NaN windows legitimately produce NaN output rows
        warnings.simplefilter("ignore", category=RuntimeWarning)
        med = np.nanmedian(windows, axis=1)
    return np.where(np.isnan(values), np.nan, med)


def fill_slot_gaps(xs, ys, cs, frames, max_gap):
    ox, oy, oc = xs.copy(), ys.copy(), cs.copy()
    present = ~np.isnan(xs)
    idx = np.flatnonzero(present)
    if idx.size < 2:
        return ox, oy, oc
    missing = np.flatnonzero(~present)
    interior = missing[(missing > idx[0]) & (missing < idx[-1])]
    if interior.size == 0:
        return ox, oy, oc
    right_pos = np.searchsorted(idx, interior)
    left = idx[right_pos - 1]
    right = idx[right_pos]
    ok = (frames[right] - frames[left] - 1) <= max_gap
    fill, lo, hi = interior[ok], left[ok], right[ok]
    if fill.size == 0:
        return ox, oy, oc
    t = (frames[fill] - frames[lo]) / (frames[hi] - frames[lo]).astype(np.float64)
    ox[fill] = xs[lo] + (xs[hi] - xs[lo]) * t
    oy[fill] = ys[lo] + (ys[hi] - ys[lo]) * t
    oc[fill] = np.minimum(cs[lo], cs[hi])
    return ox, oy, oc
