"""Numba acceleration switch.

The integration kernels in :mod:`triplezero.kernels` are written as plain
loops over float64 arrays so they run identically with or without numba.
By default they are JIT-compiled; set the environment variable
``TRIPLEZERO_NUMBA=0`` before import to select the pure-numpy fallback
(useful for debugging, coverage, and the kernel benchmark).
"""

import os

_flag = os.environ.get("TRIPLEZERO_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "no", "off")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def njit(func):
        return _njit(cache=True, fastmath=False)(func)
else:
    def njit(func):
        return func
