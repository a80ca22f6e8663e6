"""Kernel backend selection.

Hot loops (tree split search, tree traversal, window statistics, variogram
pair binning) ship in two flavours: a numba ``@njit`` kernel and a pure-numpy
path. The numba kernels are used when numba imports cleanly and the
``AEROMAP_NUMBA`` environment variable is not set to ``0``. The flag is read
once at import time.
"""

import os

_FLAG = os.environ.get("AEROMAP_NUMBA", "1").strip().lower()

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise.

    Kernels decorated with this still run (slowly) as plain Python when
    numba is missing; callers dispatch on :data:`USE_NUMBA` to pick the
    vectorised numpy path instead.
    """
    if NUMBA_AVAILABLE:
        import numba

        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def thread_count(requested=None):
    """Worker count from an explicit value or ``AEROMAP_THREADS``."""
    if requested is None:
        env = os.environ.get("AEROMAP_THREADS")
        requested = int(env) if env else 1
    return max(1, int(requested))
