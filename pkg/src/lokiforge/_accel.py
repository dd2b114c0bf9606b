"""Numba switch.

Hot loops are written twice: a numba ``@njit`` kernel and a pure-numpy twin.
``LOKIFORGE_NO_NUMBA=1`` (or a missing numba install) selects the numpy twins.
"""

import logging
import os

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("LOKIFORGE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(func):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def worker_count():
    """Worker cap from ``LOKIFORGE_THREADS`` (default: cpu count)."""
    raw = os.environ.get("LOKIFORGE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
