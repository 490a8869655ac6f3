"""Extremal aiming: paired trajectories, the player-2 extremal strategy and bound evaluators.

Everything here works on a single state ``(n,)`` or on a batch ``(B, n)``
advanced in lockstep; batches pair with batched controls (see
``PiecewiseControl``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PiecewiseControl, Trajectory, default_step, integrate
from .errors import ConfigError
from .local_game import ZERO_XI_TOL, solve_local_games
from .value_dp import LevelSet


def _nonneg(**named):
    for name, val in named.items():
        if not val >= 0:
            raise ValueError(f"{name} must be non-negative, got {val!r}")


def lemma1_bound(d0, dt, A, B):
    """Squared-distance bound after one interval of length ``dt``: ``(1 + dt A) d0^2 + B dt^2``."""
    _nonneg(d0=d0, dt=dt, A=A, B=B)
    return (1.0 + dt * A) * d0 * d0 + B * dt * dt


def corollary1_bound(d0, mesh_size, A, B):
    """Squared-distance bound at the horizon for the inductive pairing: ``e^A (d0^2 + B mesh)``."""
    _nonneg(d0=d0, mesh=mesh_size, A=A, B=B)
    return math.exp(A) * (d0 * d0 + B * mesh_size)


def corollary3_bound(mesh_size, A, B):
    """Squared distance to the level set at the horizon when starting on it: ``e^A B mesh``."""
    _nonneg(mesh=mesh_size, A=A, B=B)
    return math.exp(A) * B * mesh_size


def prop_cc_constant(kappa, A, B):
    """``kappa e^(A/2) sqrt(B)``: payoff excess of the extremal strategy is at most this times sqrt(mesh)."""
    _nonneg(kappa=kappa, A=A, B=B)
    return kappa * math.exp(A / 2.0) * math.sqrt(B)


def _local_optima(dyn, t, x, xi):
    _, _, us, vs = solve_local_games(dyn, t, x, xi, zero_tol=ZERO_XI_TOL)
    return us, vs


def _hold(action, t0, t1):
    """Constant control on ``[t0, t1]``; ``action`` is (d,) or a batch (B, d)."""
    return PiecewiseControl(np.array([t0, t1]), np.asarray(action)[None, ...])


def _stitch(pieces):
    times = np.concatenate([pieces[0].sample_times] + [p.sample_times[1:] for p in pieces[1:]])
    states = np.concatenate([pieces[0].states] + [p.states[1:] for p in pieces[1:]])
    urec = np.concatenate([p.u_record for p in pieces])
    vrec = np.concatenate([p.v_record for p in pieces])
    return Trajectory(times, states, urec, vrec)


@dataclass(frozen=True, eq=False)
class PairedRun:
    """Trajectories ``x`` and ``w`` of the inductive pairing and ``d_m = |x(t_m) - w(t_m)|``."""

    x_traj: Trajectory
    w_traj: Trajectory
    distances: np.ndarray
    partition_times: np.ndarray
    u_star: np.ndarray
    v_star: np.ndarray

    def recompute_distances(self):
        idx = np.searchsorted(self.x_traj.sample_times, self.partition_times)
        return np.linalg.norm(self.x_traj.states[idx] - self.w_traj.states[idx], axis=-1)


def paired_trajectories(dyn, t0, x0, w0, u_ctrl, v_ctrl, p, step=None):
    """Build ``x`` and ``w`` interval by interval.

    On ``[t_m, t_{m+1}]`` the pair ``(u*_m, v*_m)`` is optimal in the local game
    at ``(t_m, x(t_m), x(t_m) - w(t_m))``; ``x`` is driven by ``(u_ctrl, v*_m)``
    and ``w`` by ``(u*_m, v_ctrl)``.
    """
    times = p.times
    if abs(times[0] - t0) > 1e-12:
        raise ConfigError("partition must start at t0")
    x = np.array(x0, dtype=np.float64)
    w = np.array(w0, dtype=np.float64)
    if x.shape != w.shape:
        raise ConfigError("x0 and w0 must have the same shape")
    xs, ws, dists, ustars, vstars = [], [], [], [], []
    for m in range(times.size - 1):
        a, b = times[m], times[m + 1]
        dists.append(np.linalg.norm(x - w, axis=-1))
        us, vs = _local_optima(dyn, a, np.atleast_2d(x), np.atleast_2d(x - w))
        u_opt = dyn.u_set.actions[us]
        v_opt = dyn.v_set.actions[vs]
        if x.ndim == 1:
            u_opt, v_opt = u_opt[0], v_opt[0]
        ustars.append(us if x.ndim > 1 else us[0])
        vstars.append(vs if x.ndim > 1 else vs[0])
        h = default_step(a, b) if step is None else step
        xt = integrate(dyn, a, x, u_ctrl, _hold(v_opt, a, b), b, step=h)
        wt = integrate(dyn, a, w, _hold(u_opt, a, b), v_ctrl, b, step=h)
        xs.append(xt)
        ws.append(wt)
        x, w = xt.final, wt.final
    dists.append(np.linalg.norm(x - w, axis=-1))
    return PairedRun(_stitch(xs), _stitch(ws), np.array(dists), times.copy(), np.array(ustars), np.array(vstars))


@dataclass
class ExtremalStrategy:
    """Online realization of the player-2 extremal strategy for ``phi`` on a partition.

    At ``t_m`` it observes ``x_m``, projects it onto the level set
    ``{phi(t_m, .) <= level}`` and plays, on ``[t_m, t_{m+1})``, the minmax action
    of the local game with covector ``x_m - w_m``. Steps must be taken in order;
    the decision at ``t_m`` only ever sees ``x_m``.
    """

    dyn: object
    phi: object
    level: float
    partition: object
    chosen: list = field(default_factory=list)
    projections: list = field(default_factory=list)
    observed: list = field(default_factory=list)
    distances: list = field(default_factory=list)

    def __post_init__(self):
        self.level = float(self.level)
        self.level_set = LevelSet(self.phi, self.level)

    @classmethod
    def at_initial_state(cls, dyn, phi, x0, partition):
        """Strategy with level ``phi(t_0, x_0)``, so that ``x_0`` lies on its level set."""
        x0 = np.asarray(x0, dtype=np.float64)
        level = float(np.asarray(phi(partition.t0, x0[None, :]))[0])
        return cls(dyn, phi, level, partition)

    @property
    def steps_taken(self):
        return len(self.chosen)

    def reset(self):
        self.chosen.clear()
        self.projections.clear()
        self.observed.clear()
        self.distances.clear()

    def step(self, m, x_m):
        """Action index (or indices, for a batch) to hold on ``[t_m, t_{m+1})``."""
        if m != len(self.chosen):
            raise ConfigError(f"extremal steps must be taken in order: expected m={len(self.chosen)}, got {m}")
        if m >= self.partition.n_intervals:
            raise ConfigError(f"step index {m} is past the last interval")
        x_m = np.array(x_m, dtype=np.float64)
        t_m = float(self.partition.times[m])
        w_m, dist = self.level_set.project(t_m, x_m)
        xb = np.atleast_2d(x_m)
        _, vs = _local_optima(self.dyn, t_m, xb, xb - np.atleast_2d(w_m))
        choice = vs if x_m.ndim > 1 else int(vs[0])
        self.observed.append(x_m)
        self.projections.append(w_m)
        self.distances.append(dist)
        self.chosen.append(choice)
        return choice

    def records(self):
        return {
            "v_index": np.asarray(self.chosen),
            "projection": np.asarray(self.projections),
            "observed": np.asarray(self.observed),
            "distance": np.asarray(self.distances),
        }


def extremal_step(strategy, m, x_m):
    """Action ``v*_m`` for the observed state ``x_m``; recorded on the strategy."""
    idx = strategy.step(m, x_m)
    return strategy.dyn.v_set.actions[idx]


@dataclass(frozen=True, eq=False)
class PlayResult:
    trajectory: Trajectory
    payoff: np.ndarray | float
    final_state: np.ndarray
    v_index: np.ndarray


def play_vs_control(dyn, payoff, t0, x0, u_ctrl, strategy, step=None, keep_substeps=True):
    """Play the open-loop ``u_ctrl`` against ``strategy`` from ``(t0, x0)`` to the horizon.

    ``u_ctrl`` may be batched, in which case ``x0`` is broadcast and every
    batch row is played by the same (stateless per row) extremal rule.
    """
    p = strategy.partition
    times = p.times
    if abs(times[0] - t0) > 1e-12:
        raise ConfigError("strategy partition must start at t0")
    if not u_ctrl.covers(t0, times[-1]):
        raise ConfigError(f"u-control must cover [{t0}, {times[-1]}]")
    if strategy.steps_taken:
        strategy.reset()
    x = np.array(x0, dtype=np.float64)
    if u_ctrl.batched:
        x = np.broadcast_to(x, (u_ctrl.values.shape[1], dyn.state_dim)).copy()
    pieces = []
    for m in range(times.size - 1):
        a, b = times[m], times[m + 1]
        v = extremal_step(strategy, m, x)
        h = default_step(a, b) if step is None else step
        tr = integrate(dyn, a, x, u_ctrl, _hold(v, a, b), b, step=h, record=keep_substeps)
        pieces.append(tr)
        x = tr.final
    traj = _stitch(pieces)
    pay = payoff.g(x)
    if np.ndim(pay) == 0:
        pay = float(pay)
    return PlayResult(traj, pay, x, np.asarray(strategy.chosen))
