"""numba-compiled kernel implementations. Same contracts as `_numpy`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def pairwise_distances(a, b):
    m = a.shape[0]
    n = b.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            out[i, j] = math.sqrt(dx * dx + dy * dy)
    return out


@njit(cache=True)
def angles_between(px, py, qx, qy, eps):
    n = px.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        a = px[i]
        b = py[i]
        c = qx[i]
        d = qy[i]
        if math.isnan(a) or math.isnan(b) or math.isnan(c) or math.isnan(d):
            out[i] = np.nan
            continue
        if math.hypot(a, b) < eps or math.hypot(c, d) < eps:
            out[i] = np.nan
            continue
        cross = abs(a * d - b * c)
        dot = a * c + b * d
        out[i] = math.degrees(math.atan2(cross, dot))
    return out


@njit(cache=True)
def moving_median(values, window):
    n = values.shape[0]
    out = np.empty(n, dtype=np.float64)
    if window == 1:
        for i in range(n):
            out[i] = values[i]
        return out
    half = window // 2
    buf = np.empty(window, dtype=np.float64)
    for i in range(n):
        if math.isnan(values[i]):
            out[i] = np.nan
            continue
        lo = i - half
        if lo < 0:
            lo = 0
        hi = i + half + 1
        if hi > n:
            hi = n
        k = 0
        for j in range(lo, hi):
            v = values[j]
            if not math.isnan(v):
                buf[k] = v
                k += 1
        # k >= 1 because the center sample is present
        win = np.sort(buf[:k])
        if k % 2 == 1:
            out[i] = win[k // 2]
        else:
            out[i] = 0.5 * (win[k // 2 - 1] + win[k // 2])
    return out


@njit(cache=True)
def fill_slot_gaps(xs, ys, cs, frames, max_gap):
    n = xs.shape[0]
    ox = xs.copy()
    oy = ys.copy()
    oc = cs.copy()
    prev = -1
    for i in range(n):
        if math.isnan(xs[i]):
            continue
        if prev >= 0 and i - prev > 1:
            gap = frames[i] - frames[prev] - 1
            if gap <= max_gap:
                f0 = frames[prev]
                span = float(frames[i] - f0)
                cfill = min(cs[prev], cs[i])
                for j in range(prev + 1, i):
                    t = (frames[j] - f0) / span
                    ox[j] = xs[prev] + (xs[i] - xs[prev]) * t
                    oy[j] = ys[prev] + (ys[i] - ys[prev]) * t
                    oc[j] = cfill
        prev = i
    return ox, oy, oc
