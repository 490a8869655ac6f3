"""The one-shot local game with payoff ``<xi, f(t, x, u, v)>``.

Solved by exhaustive enumeration of U x V. ``u_star`` attains the maxmin,
``v_star`` the minmax, ties going to the lowest action index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError

# offsets x - w shorter than this are treated as zero (every action optimal)
ZERO_XI_TOL = 1e-12


@dataclass(frozen=True)
class LocalGameResult:
    h_minus: float
    h_plus: float
    u_star: int
    v_star: int

    @property
    def gap(self):
        return self.h_plus - self.h_minus


@dataclass(frozen=True)
class GapReport:
    max_gap: float
    t: float
    x: list
    xi: list
    samples: int

    def to_dict(self):
        return {"max_gap": self.max_gap, "t": self.t, "x": self.x, "xi": self.xi, "samples": self.samples}


def payoff_matrices(dyn, t, x, xi):
    """Batch of payoff matrices, shape (B, |U|, |V|), for states ``x`` and covectors ``xi`` (B, n)."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim:
        t = t[:, None, None]
    vel = dyn.f(
        t,
        x[:, None, None, :],
        dyn.u_set.actions[None, :, None, :],
        dyn.v_set.actions[None, None, :, :],
    )
    vel = np.broadcast_to(vel, (x.shape[0], len(dyn.u_set), len(dyn.v_set), dyn.state_dim))
    return np.einsum("bkln,bn->bkl", vel, xi)


def solve_local_games(dyn, t, x, xi, zero_tol=0.0):
    """Vectorized solve. Returns ``h_minus, h_plus, u_star, v_star`` arrays of length B.

    Rows with ``||xi|| <= zero_tol`` are solved with ``xi = 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
        raise NumericError("non-finite state or covector in local game")
    if zero_tol > 0:
        small = np.linalg.norm(xi, axis=1) <= zero_tol
        if small.any():
            xi = xi.copy()
            xi[small] = 0.0
    return kernels.saddle(payoff_matrices(dyn, t, x, xi))


def solve_local_game(dyn, t, x, xi):
    """Maxmin ``H-``, minmax ``H+`` and optimal action indices of one local game."""
    x = np.asarray(x, dtype=np.float64).reshape(1, dyn.state_dim)
    xi = np.asarray(xi, dtype=np.float64).reshape(1, dyn.state_dim)
    hm, hp, us, vs = solve_local_games(dyn, float(t), x, xi)
    return LocalGameResult(float(hm[0]), float(hp[0]), int(us[0]), int(vs[0]))


def optimal_action_v(dyn, t, x, xi):
    """Selection rule for player 2: the minmax action of the local game (index 0 if xi = 0)."""
    res = solve_local_game(dyn, t, x, xi)
    return dyn.v_set.actions[res.v_star]


def sample_unit_covectors(rng, count, n):
    xi = rng.normal(size=(count, n))
    norms = np.linalg.norm(xi, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return xi / norms


def isaacs_gap_report(dyn, sample_count, seed, t_range=(0.0, 1.0)):
    """Worst ``H+ - H-`` over uniform samples of time, state box and unit covectors."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    t = rng.uniform(*t_range, size=sample_count)
    x = rng.uniform(dyn.box_lo, dyn.box_hi, size=(sample_count, dyn.state_dim))
    xi = sample_unit_covectors(rng, sample_count, dyn.state_dim)
    hm, hp, _, _ = solve_local_games(dyn, t, x, xi)
    gap = hp - hm
    k = int(np.argmax(gap))
    return GapReport(float(gap[k]), float(t[k]), x[k].tolist(), xi[k].tolist(), sample_count)
