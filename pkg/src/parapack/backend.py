"""Kernel backend selection.

The time-stepping inner loops exist twice: a numba @njit version and a pure
numpy version with identical signatures. The default is numba when it is
importable; set PARAPACK_BACKEND=numpy to force the fallback (used by the
benchmark and as an escape hatch on platforms without a working numba).
"""

import os
import warnings

_ENV_VAR = "PARAPACK_BACKEND"
_kernels = None
_name = None


def default_backend_name() -> str:
    requested = os.environ.get(_ENV_VAR, "numba").lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:
            warnings.warn("numba not importable, falling back to numpy kernels")
            return "numpy"
    return requested


def get_kernels(name: str | None = None):
    """Return the kernel module for `name` ('numba' or 'numpy')."""
    global _kernels, _name
    if name is None:
        if _kernels is None:
            _name = default_backend_name()
            _kernels = _load(_name)
        return _kernels
    return _load(name)


def backend_name() -> str:
    get_kernels()
    return _name


def _load(name):
    if name == "numba":
        from . import kernels_numba as mod
    elif name == "numpy":
        from . import kernels_numpy as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return mod
