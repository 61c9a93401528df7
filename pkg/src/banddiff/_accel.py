"""Optional numba acceleration.

Hot kernels are written once as plain Python loops and compiled with
``numba.njit`` when numba is importable and ``BANDDIFF_NO_NUMBA`` is unset.
Every compiled kernel has a vectorised numpy twin in :mod:`banddiff.kernels`;
the twin is what runs when acceleration is off.
"""
import os

_DISABLED = os.environ.get("BANDDIFF_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op when acceleration is off."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if len(args) == 1 and callable(args[0]):
        return numba.njit(**kwargs)(args[0])
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
