"""Backend selection for the stencil kernels.

Numba is used when importable unless ``SPACELIKE_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy implementations run instead.
"""
import os

ENV_FLAG = "SPACELIKE_DISABLE_NUMBA"

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def numba_disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def default_backend() -> str:
    if HAVE_NUMBA and not numba_disabled_by_env():
        return "numba"
    return "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
