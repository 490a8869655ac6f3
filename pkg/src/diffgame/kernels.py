"""Dispatch to the numba or numpy implementation of the hot loops.

The choice is made once at import from ``DIFFGAME_BACKEND``; ``use_backend``
switches it at runtime (used by the benchmark and the cross-backend tests).
"""

import numpy as np

from . import _kernels_numpy
from ._backend import requested_backend

_IMPLS = {"numpy": _kernels_numpy}
_active = None


def _load(name):
    if name not in _IMPLS:
        from . import _kernels_numba

        _IMPLS["numba"] = _kernels_numba
    return _IMPLS[name]


def use_backend(name):
    global _active
    _active = _load(name)
    return _active


def active_backend():
    return "numba" if _active is not _kernels_numpy else "numpy"


use_backend(requested_backend())


def interp(values, lo, hi, res, points):
    return _active.interp(values, lo, hi, np.asarray(res), points)


def backup(values, lo, hi, res, points, disp, mode, tol):
    return _active.backup(values, lo, hi, np.asarray(res), points, disp, mode, tol)


def saddle(payoff):
    return _active.saddle(payoff)


def levelset_candidates(values, lo, hi, res, level):
    return _active.levelset_candidates(values, lo, hi, np.asarray(res), level)


def nearest(candidates, queries):
    return _active.nearest(candidates, queries)
