"""Numba switch for the hot kernels.

``DAEAD_NUMBA=0`` (or ``false``/``no``/``off``) selects the pure-numpy
kernels. The flag is read once, at import time.
"""
import os

_OFF = ("0", "false", "no", "off")


def _numba_enabled():
    if os.environ.get("DAEAD_NUMBA", "1").strip().lower() in _OFF:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_enabled()


def njit(fn):
    import numba

    return numba.njit(cache=True)(fn)
