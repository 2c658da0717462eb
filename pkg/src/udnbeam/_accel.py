"""Backend switch for the hot kernels.

Kernels exist twice: a numba ``@njit`` loop version and a vectorized numpy
version.  Numba is used when it imports cleanly unless the environment
variable ``UDNBEAM_BACKEND`` is set to ``numpy``.  The flag is read once at
import time; use :func:`use_backend` in tests and benchmarks to flip it.
"""

import os

BACKEND_ENV = "UDNBEAM_BACKEND"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _initial_backend():
    requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


_backend = _initial_backend()


def backend():
    """Name of the active kernel backend."""
    return _backend


def use_backend(name):
    """Select ``'numba'`` or ``'numpy'`` kernels; returns the previous choice."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    previous, _backend = _backend, name
    return previous


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
