"""Numba acceleration switch.

All hot kernels in :mod:`daisyworld.kernels` are written as plain Python
loops and compiled with ``numba.njit`` when available.  Setting the
environment variable ``DAISYWORLD_DISABLE_NUMBA=1`` (checked once, at import
time) selects the pure-Python fallback path instead; results are identical,
only slower.  ``benchmarks/bench_kernels.py`` compares the two.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("DAISYWORLD_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

if not NUMBA_DISABLED:
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba = None
else:
    _numba = None

USING_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USING_NUMBA:
        return _numba.njit(*args, **kwargs)
    kwargs.pop("parallel", None)
    kwargs.pop("cache", None)
    if args and callable(args[0]):
        return args[0]

    def wrap(fn):
        return fn

    return wrap


if USING_NUMBA:
    prange = _numba.prange  # numba resolves this name during typing
else:
    prange = range


def set_num_threads(n: int) -> None:
    """Bound kernel parallelism; no-op on the fallback path."""
    if USING_NUMBA:
        _numba.set_num_threads(max(1, int(n)))


def py_func(fn):
    """Uncompiled twin of a jitted kernel (the function itself on fallback)."""
    return getattr(fn, "py_func", fn)
