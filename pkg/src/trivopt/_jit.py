"""Numba switch.

Set ``TRIVOPT_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

DISABLED = os.environ.get("TRIVOPT_DISABLE_NUMBA", "0").strip().lower() not in _FALSY

try:
    if DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


def njit(func):
    """``numba.njit(cache=True)`` when available, otherwise the plain function."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
