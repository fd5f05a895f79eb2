"""Kernel dispatch: numba-jitted hot loops with a pure-numpy fallback.

The active backend is chosen once at import from the environment variable
``CORESET_BENCH_BACKEND`` (``numba``, ``numpy``, or ``auto``) and can be
switched at runtime with :func:`set_backend`. Both backends implement the
same contracts, including lowest-index tie-breaking, so selections are
deterministic within a backend.
"""

import os

from . import _kernels_numpy

try:
    from . import _kernels_numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _kernels_numba = None
    _HAVE_NUMBA = False

_ENV_VAR = "CORESET_BENCH_BACKEND"
_active = _kernels_numpy
_active_name = "numpy"


def set_backend(name):
    """Select the kernel backend: 'numba', 'numpy', or 'auto'."""
    global _active, _active_name
    if name == "auto":
        name = "numba" if _HAVE_NUMBA else "numpy"
    if name == "numpy":
        _active, _active_name = _kernels_numpy, "numpy"
    elif name == "numba":
        if not _HAVE_NUMBA:
            raise ValueError("numba backend requested but numba is not importable")
        _active, _active_name = _kernels_numba, "numba"
    else:
        raise ValueError(f"unknown kernel backend {name!r}")


def current_backend():
    return _active_name


def pairwise_distances(rows):
    return _active.pairwise_distances(rows)


def facility_location_greedy(sim, k):
    return _active.facility_location_greedy(sim, k)


def nearest_assignment_counts(dist, selected):
    return _active.nearest_assignment_counts(dist, selected)


set_backend(os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto")
