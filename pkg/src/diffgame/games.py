"""Builtin games and the benchmark bundles the harness runs on.

A benchmark couples a game with a terminal payoff, an initial state, a core
region of initial states and default discretization sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import ControlSet, GameDynamics, PayoffSpec
from .errors import ConfigError


def affine_dynamics(name, M, Bu, Bv, b, u_set, v_set, box_lo, box_hi):
    """``f = M x + Bu u + Bv v + b`` with constants computed over the state box."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    Bu = np.atleast_2d(np.asarray(Bu, dtype=np.float64))
    Bv = np.atleast_2d(np.asarray(Bv, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    n = M.shape[0]
    if M.shape != (n, n) or b.shape != (n,):
        raise ConfigError(f"{name}: M must be n x n and b of length n")
    if Bu.shape != (n, u_set.dim) or Bv.shape != (n, v_set.dim):
        raise ConfigError(f"{name}: Bu/Bv shapes do not match the action sets")

    def f(t, x, u, v):
        return np.asarray(x) @ M.T + np.asarray(u) @ Bu.T + np.asarray(v) @ Bv.T + b

    lo = np.broadcast_to(np.asarray(box_lo, float), (n,))
    hi = np.broadcast_to(np.asarray(box_hi, float), (n,))
    m_norm = float(np.linalg.norm(M, 2))
    corners = np.maximum(np.abs(lo), np.abs(hi))
    drift_vecs = (
        u_set.actions[:, None, :] @ Bu.T + v_set.actions[None, :, :] @ Bv.T + b
    )
    drift = float(np.max(np.linalg.norm(drift_vecs, axis=-1)))
    return GameDynamics(
        name=name,
        state_dim=n,
        f=f,
        u_set=u_set,
        v_set=v_set,
        f_bound=m_norm * float(np.linalg.norm(corners)) + drift,
        lip_c=m_norm,
        box_lo=lo,
        box_hi=hi,
        autonomous=True,
        separated=True,
        growth=m_norm,
        drift=drift,
        descriptor={
            "affine": {"M": M.tolist(), "Bu": Bu.tolist(), "Bv": Bv.tolist(), "b": b.tolist()},
            "u": u_set.to_list(),
            "v": v_set.to_list(),
            "box": [lo.tolist(), hi.tolist()],
        },
    )


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A game ready to solve: dynamics, payoff, initial data and default sizes."""

    dyn: GameDynamics
    payoff: PayoffSpec
    x0: np.ndarray
    core_lo: np.ndarray
    core_hi: np.ndarray
    t0: float = 0.0
    nodes: int = 201
    slices: int = 100
    lower_value: Callable | None = None
    upper_value: Callable | None = None

    @property
    def name(self):
        return self.dyn.name

    def describe(self):
        return {
            "game": self.dyn.name,
            "dynamics": self.dyn.descriptor,
            "f_bound": self.dyn.f_bound,
            "lip_c": self.dyn.lip_c,
            "payoff": self.payoff.describe(),
            "x0": np.asarray(self.x0).tolist(),
            "t0": self.t0,
            "core": [np.asarray(self.core_lo).tolist(), np.asarray(self.core_hi).tolist()],
            "nodes": self.nodes,
            "slices": self.slices,
        }


def _line_sets(u_half=1.0, v_half=0.5, count=21):
    return (
        ControlSet.interval(-u_half, u_half, count, "U"),
        ControlSet.interval(-v_half, v_half, count, "V"),
    )


def pursuit_line():
    u_set, v_set = _line_sets()
    dyn = GameDynamics(
        name="pursuit-line",
        state_dim=1,
        f=lambda t, x, u, v: np.asarray(u) - np.asarray(v) + 0.0 * np.asarray(x),
        u_set=u_set,
        v_set=v_set,
        f_bound=1.5,
        lip_c=0.0,
        box_lo=[-2.5],
        box_hi=[2.5],
        autonomous=True,
        separated=True,
        descriptor={"builtin": "pursuit-line", "f": "u - v"},
    )
    exact = lambda t, x: np.asarray(x)[..., 0] + (1.0 - np.asarray(t)) / 2.0
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [1.0]}),
        x0=np.array([0.0]),
        core_lo=np.array([-0.5]),
        core_hi=np.array([0.5]),
        lower_value=exact,
        upper_value=exact,
    )


def sum_game():
    u_set = ControlSet.interval(-1.0, 1.0, 21, "U")
    v_set = ControlSet.interval(-1.0, 1.0, 21, "V")
    dyn = GameDynamics(
        name="sum",
        state_dim=1,
        f=lambda t, x, u, v: np.asarray(u) + np.asarray(v) + 0.0 * np.asarray(x),
        u_set=u_set,
        v_set=v_set,
        f_bound=2.0,
        lip_c=0.0,
        box_lo=[-3.0],
        box_hi=[3.0],
        autonomous=True,
        separated=True,
        descriptor={"builtin": "sum", "f": "u + v"},
    )
    exact = lambda t, x: np.asarray(x)[..., 0] + 0.0 * np.asarray(t)
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [1.0]}),
        x0=np.array([0.0]),
        core_lo=np.array([-0.5]),
        core_hi=np.array([0.5]),
        lower_value=exact,
        upper_value=exact,
    )


def _rot2d_f(t, x, u, v):
    t = np.asarray(t, dtype=np.float64)[..., None]
    u = np.asarray(u)
    c, s = np.cos(t), np.sin(t)
    ru = np.concatenate([c * u[..., :1] - s * u[..., 1:2], s * u[..., :1] + c * u[..., 1:2]], axis=-1)
    return ru - np.asarray(v) + 0.0 * np.asarray(x)


def rot2d():
    """Planar game: player 1 steers a unit velocity rotated by angle ``t``.

    ``f = R(t) u - v`` with ``u`` on the unit circle (8 headings and rest) and
    ``v`` on the circle of radius 1/2. ``|f| <= 1.5`` and ``c = 1`` because
    ``|R(t)u - R(s)u| <= |t - s|``.
    """
    dyn = GameDynamics(
        name="rot2d",
        state_dim=2,
        f=_rot2d_f,
        u_set=ControlSet.circle(1.0, 8, label="U"),
        v_set=ControlSet.circle(0.5, 8, label="V"),
        f_bound=1.5,
        lip_c=1.0,
        box_lo=[-2.0, -2.0],
        box_hi=[2.0, 2.0],
        separated=True,
        descriptor={"builtin": "rot2d", "f": "R(t) u - v"},
    )
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [0.0, 1.0]}),
        x0=np.array([0.0, 0.0]),
        core_lo=np.array([-0.25, -0.25]),
        core_hi=np.array([0.25, 0.25]),
        nodes=61,
        slices=50,
    )


def coupled_uv():
    """Scalar ``f = u v`` with ``U = V = {-1, 1}``: the local game has no pure value."""
    u_set = ControlSet.interval(-1.0, 1.0, 2, "U")
    v_set = ControlSet.interval(-1.0, 1.0, 2, "V")
    dyn = GameDynamics(
        name="coupled-uv",
        state_dim=1,
        f=lambda t, x, u, v: np.asarray(u) * np.asarray(v) + 0.0 * np.asarray(x),
        u_set=u_set,
        v_set=v_set,
        f_bound=1.0,
        lip_c=0.0,
        box_lo=[-2.0],
        box_hi=[2.0],
        autonomous=True,
        separated=False,
        descriptor={"builtin": "coupled-uv", "f": "u * v"},
    )
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [1.0]}),
        x0=np.array([0.0]),
        core_lo=np.array([-0.5]),
        core_hi=np.array([0.5]),
        lower_value=lambda t, x: np.asarray(x)[..., 0] - (1.0 - np.asarray(t)),
        upper_value=lambda t, x: np.asarray(x)[..., 0] + (1.0 - np.asarray(t)),
    )


def zero_game():
    u_set = ControlSet.interval(-1.0, 1.0, 3, "U")
    v_set = ControlSet.interval(-1.0, 1.0, 3, "V")
    dyn = GameDynamics(
        name="zero",
        state_dim=1,
        f=lambda t, x, u, v: 0.0 * (np.asarray(x) + np.asarray(u) + np.asarray(v)),
        u_set=u_set,
        v_set=v_set,
        f_bound=0.0,
        lip_c=0.0,
        box_lo=[-1.0],
        box_hi=[1.0],
        autonomous=True,
        separated=True,
        descriptor={"builtin": "zero", "f": "0"},
    )
    exact = lambda t, x: np.asarray(x)[..., 0] + 0.0 * np.asarray(t)
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [1.0]}),
        x0=np.array([0.0]),
        core_lo=np.array([-0.5]),
        core_hi=np.array([0.5]),
        nodes=101,
        slices=20,
        lower_value=exact,
        upper_value=exact,
    )


def linear_game():
    """``f = x + u - v`` on the box [-4, 4]; the value is ``e^(1-t) x + (e^(1-t) - 1)/2``."""
    u_set, v_set = _line_sets()
    dyn = affine_dynamics("linear", [[1.0]], [[1.0]], [[-1.0]], [0.0], u_set, v_set, [-4.0], [4.0])
    exact = lambda t, x: np.exp(1.0 - np.asarray(t)) * (np.asarray(x)[..., 0] + 0.5) - 0.5
    return Benchmark(
        dyn,
        PayoffSpec("linear", {"coef": [1.0]}),
        x0=np.array([0.0]),
        core_lo=np.array([-0.25]),
        core_hi=np.array([0.25]),
        lower_value=exact,
        upper_value=exact,
    )


BUILTINS = {
    "pursuit-line": pursuit_line,
    "sum": sum_game,
    "rot2d": rot2d,
    "coupled-uv": coupled_uv,
    "zero": zero_game,
    "linear": linear_game,
}

# games whose local game has a value everywhere; the bound experiments run on these
SEPARATED_BENCHMARKS = ("sum", "pursuit-line", "rot2d", "linear", "zero")


def get_benchmark(name):
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown builtin game {name!r}; choose from {sorted(BUILTINS)}") from None
