"""Backend selection for the numeric kernels.

Set ``DIFFGAME_BACKEND=numpy`` to force the pure-numpy path. The default is
``numba`` whenever numba imports cleanly. ``DIFFGAME_THREADS`` caps the numba
worker count.
"""

import logging
import os

logger = logging.getLogger(__name__)

BACKEND_ENV = "DIFFGAME_BACKEND"
THREADS_ENV = "DIFFGAME_THREADS"


def _numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return False
    return True


HAVE_NUMBA = _numba_available()


def requested_backend():
    name = os.environ.get(BACKEND_ENV, "numba" if HAVE_NUMBA else "numpy").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        logger.warning("numba requested but not importable; using numpy kernels")
        return "numpy"
    return name


def set_threads(count=None):
    """Cap numba worker threads; ``None`` reads ``DIFFGAME_THREADS``."""
    if count is None:
        raw = os.environ.get(THREADS_ENV)
        if not raw:
            return
        count = int(raw)
    if count < 1:
        raise ValueError("thread count must be >= 1")
    if HAVE_NUMBA:
        import numba

        numba.set_num_threads(min(count, numba.config.NUMBA_NUM_THREADS))
