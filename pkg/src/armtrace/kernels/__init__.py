"""Numeric hot-path kernels with two interchangeable backends.

The numba backend JIT-compiles the per-frame loops; the numpy backend is a
vectorized pure-numpy implementation of the same contracts. Selection happens
once at import time via the ``ARMTRACE_BACKEND`` environment variable:

* ``auto`` (default) - numba if importable, else numpy
* ``numba``          - require numba, raise if unavailable
* ``numpy``          - force the pure-numpy path

``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

# Below this magnitude (pixels) a vector is treated as zero and yields no angle.
ZERO_EPS_PX = 1e-9

_requested = os.environ.get("ARMTRACE_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"ARMTRACE_BACKEND must be one of auto|numba|numpy, got {_requested!r}"
    )

if _requested in ("auto", "numba"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl

        BACKEND = "numpy"
else:
    from . import _numpy as _impl

    BACKEND = "numpy"

pairwise_distances = _impl.pairwise_distances
angles_between = _impl.angles_between
moving_median = _impl.moving_median
fill_slot_gaps = _impl.fill_slot_gaps

__all__ = [
    "BACKEND",
    "ZERO_EPS_PX",
    "pairwise_distances",
    "angles_between",
    "moving_median",
    "fill_slot_gaps",
]
