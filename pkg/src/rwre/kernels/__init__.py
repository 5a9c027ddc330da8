"""Hot Monte Carlo kernels with two interchangeable backends.

The numba backend (default) JIT-compiles per-path loops; the pure-numpy
backend iterates global uniformization ticks with path masks.  Both consume
the same counter-based random streams in the same order, so integer outputs
(jump sequences, displacements, counts) are bit-identical across backends;
float accumulators follow the same op order and agree to within a few ulps
(the compiled backend may contract multiply-adds into hardware FMAs).
Set RWRE_NO_NUMBA=1 to force the numpy backend (it is also selected
automatically when numba is unavailable).
"""

from __future__ import annotations

import os

from . import _numpy as _numpy_backend

_flag = os.environ.get("RWRE_NO_NUMBA", "").strip().lower()
_want_numba = _flag not in ("1", "true", "yes")

if _want_numba:
    try:
        from . import _numba as _backend
        BACKEND = "numba"
    except ImportError:
        _backend = _numpy_backend
        BACKEND = "numpy"
else:
    _backend = _numpy_backend
    BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


def get_backend(name: str | None = None):
    """Explicit backend module, for benchmarks and equality tests."""
    if name in (None, BACKEND):
        return _backend
    if name == "numpy":
        return _numpy_backend
    if name == "numba":
        from . import _numba as nb
        return nb
    raise ValueError(f"unknown backend {name!r}")


ct_ensemble = _backend.ct_ensemble
ct_klj_ensemble = _backend.ct_klj_ensemble
lazy_ensemble = _backend.lazy_ensemble
