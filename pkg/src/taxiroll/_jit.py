"""Numba shim: JIT when available, plain Python otherwise.

Set TAXIROLL_NO_JIT=1 to force the interpreted path (useful when debugging
kernel logic; everything stays bit-identical, just slower).
"""
from __future__ import annotations

import os

if os.environ.get("TAXIROLL_NO_JIT"):
    HAVE_NUMBA = False
else:
    try:
        from numba import njit as _numba_njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

if HAVE_NUMBA:

    def njit(func):
        return _numba_njit(cache=True)(func)

else:

    def njit(func):
        return func
