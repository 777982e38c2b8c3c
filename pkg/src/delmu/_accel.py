"""JIT switch for the numeric kernels.

Set ``DELMU_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. Useful for debugging and for the numba-vs-numpy benchmark.
"""
import os

_FLAG = os.environ.get("DELMU_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if NUMBA_DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    kwargs.setdefault("cache", True)

    def decorator(f):
        if not HAS_NUMBA:
            return f
        return _njit(**kwargs)(f)

    if func is not None:
        return decorator(func)
    return decorator


def backend():
    return "numba" if HAS_NUMBA else "numpy"
