"""Backend switch for the hot kernels.

Set ``TMONLINE_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths
consume random numbers in the same order and produce bit-identical results.
"""
import os

try:
    from numba import njit
    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover
    njit = None
    NUMBA_INSTALLED = False

_FLAG = os.environ.get("TMONLINE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = NUMBA_INSTALLED and _FLAG not in ("1", "true", "yes", "on")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    def decorator(func):
        if NUMBA_INSTALLED:
            return njit(*args, **kwargs)(func)
        return func
    return decorator
