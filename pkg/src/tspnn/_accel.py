"""JIT switch for the hot kernels.

Kernels are compiled with numba when it is importable, unless the environment
variable ``TSPNN_DISABLE_NUMBA`` is set to a truthy value, in which case the
pure-numpy implementations in :mod:`tspnn.kernels` are used instead. The flag
is read once, at import time.
"""
import os

_FLAG = os.environ.get("TSPNN_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise.

    Decorated functions are always compiled when numba exists, so the
    benchmark can compare both paths in one process; ``USE_NUMBA`` only
    governs which one the public API dispatches to.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
