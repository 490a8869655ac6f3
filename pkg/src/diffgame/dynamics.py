"""Game dynamics, action sets, payoffs, partitions and trajectory integration.

The dynamics callable ``f(t, x, u, v)`` must broadcast: ``x``, ``u`` and ``v``
carry their components on the last axis and arbitrary leading axes, ``t`` is a
scalar or an array matching the leading axes. Everything in the library calls
``f`` with whole batches at once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, InvalidActionError, NumericError

logger = logging.getLogger(__name__)

ACTION_MATCH_TOL = 1e-12


def _frozen(a, ndim=None):
    arr = np.array(a, dtype=np.float64)
    if ndim == 2 and arr.ndim == 1:
        arr = arr[:, None]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ControlSet:
    """A finite, ordered action set. Index order drives every tie-break."""

    actions: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = _frozen(self.actions, ndim=2)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ConfigError(f"control set {self.label!r} must be a nonempty list of vectors")
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"control set {self.label!r} has non-finite actions")
        object.__setattr__(self, "actions", arr)

    @classmethod
    def interval(cls, lo, hi, count, label=""):
        if count < 1 or hi < lo:
            raise ConfigError(f"bad interval({lo}, {hi}, {count})")
        return cls(np.linspace(lo, hi, count)[:, None], label)

    @classmethod
    def circle(cls, radius, count, with_center=True, label=""):
        ang = 2.0 * np.pi * np.arange(count) / count
        pts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        if with_center:
            pts = np.vstack([np.zeros((1, 2)), pts])
        return cls(pts, label)

    @property
    def dim(self):
        return self.actions.shape[1]

    def __len__(self):
        return self.actions.shape[0]

    def index_of(self, action):
        a = np.atleast_1d(np.asarray(action, dtype=np.float64))
        if a.shape != (self.dim,):
            raise InvalidActionError(f"action {action!r} has wrong dimension for {self.label!r}")
        hits = np.flatnonzero(np.all(np.abs(self.actions - a) <= ACTION_MATCH_TOL, axis=1))
        if hits.size == 0:
            raise InvalidActionError(f"action {action!r} is not in control set {self.label!r}")
        return int(hits[0])

    def to_list(self):
        return self.actions.tolist()


@dataclass(frozen=True, eq=False)
class GameDynamics:
    """Dynamics ``f`` with its declared regularity constants.

    ``f_bound`` is the sup norm of ``f`` and ``lip_c`` its Lipschitz constant in
    ``(t, x)``. ``box_lo``/``box_hi`` bound the state region the constants are
    valid on (for globally bounded builtins it is only a sampling region).
    ``growth`` and ``drift`` describe ``||f|| <= growth*||x|| + drift`` and give
    a tighter reach estimate than ``f_bound * tau`` for affine games.
    """

    name: str
    state_dim: int
    f: Callable
    u_set: ControlSet
    v_set: ControlSet
    f_bound: float
    lip_c: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    autonomous: bool = False
    separated: bool = False
    growth: float = 0.0
    drift: float | None = None
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = _frozen(np.broadcast_to(np.asarray(self.box_lo, float), (self.state_dim,)))
        hi = _frozen(np.broadcast_to(np.asarray(self.box_hi, float), (self.state_dim,)))
        if np.any(lo >= hi):
            raise ConfigError(f"{self.name}: state box needs lo < hi on every axis")
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        if self.f_bound < 0 or self.lip_c < 0:
            raise ConfigError(f"{self.name}: regularity constants must be nonnegative")

    def reach_radius(self, tau, r0=0.0):
        """Upper bound on how far a trajectory started at norm ``r0`` moves in time ``tau``."""
        crude = self.f_bound * tau
        if self.growth > 0 and self.drift is not None:
            g = self.growth
            return min(crude, (g * r0 + self.drift) * math.expm1(g * tau) / g)
        return crude

    def velocities(self, t, points):
        """``f`` at every (point, u, v) combination, shape (P, |U|, |V|, n)."""
        x = np.asarray(points, dtype=np.float64)[:, None, None, :]
        u = self.u_set.actions[None, :, None, :]
        v = self.v_set.actions[None, None, :, :]
        out = self.f(t, x, u, v)
        shape = (x.shape[0], len(self.u_set), len(self.v_set), self.state_dim)
        return np.broadcast_to(out, shape)


def eval_dynamics(dyn, t, x, u, v):
    """Evaluate ``f(t, x, u, v)`` for one state and one action pair from the declared sets."""
    x = np.asarray(x, dtype=np.float64).reshape(dyn.state_dim)
    if not np.all(np.isfinite(x)) or not math.isfinite(t):
        raise NumericError(f"non-finite input to dynamics: t={t!r}, x={x!r}")
    ui = dyn.u_set.index_of(u)
    vi = dyn.v_set.index_of(v)
    out = np.asarray(dyn.f(float(t), x, dyn.u_set.actions[ui], dyn.v_set.actions[vi]), dtype=np.float64)
    return np.broadcast_to(out, (dyn.state_dim,)).copy()


def validate_constants(dyn, samples=2000, seed=0, t_range=(0.0, 1.0)):
    """Sample ``f`` over the state box and check the declared ``f_bound`` and ``lip_c``.

    Returns a dict with the largest sampled norm and difference quotient.
    Raises ConfigError when either declared constant is exceeded.
    """
    rng = np.random.default_rng(seed)
    n = dyn.state_dim
    t = rng.uniform(*t_range, size=samples)
    s = np.clip(t + rng.normal(scale=0.05, size=samples), *t_range)
    x = rng.uniform(dyn.box_lo, dyn.box_hi, size=(samples, n))
    y = np.clip(x + rng.normal(scale=0.1, size=(samples, n)), dyn.box_lo, dyn.box_hi)
    ui = rng.integers(len(dyn.u_set), size=samples)
    vi = rng.integers(len(dyn.v_set), size=samples)
    u = dyn.u_set.actions[ui]
    v = dyn.v_set.actions[vi]
    fx = np.broadcast_to(dyn.f(t, x, u, v), (samples, n))
    fy = np.broadcast_to(dyn.f(s, y, u, v), (samples, n))
    norm = float(np.max(np.linalg.norm(fx, axis=1)))
    denom = np.abs(t - s) + np.linalg.norm(x - y, axis=1)
    ok = denom > 1e-12
    quot = float(np.max(np.linalg.norm(fx - fy, axis=1)[ok] / denom[ok])) if ok.any() else 0.0
    if norm > dyn.f_bound + 1e-12:
        raise ConfigError(f"{dyn.name}: sampled |f| = {norm} exceeds declared bound {dyn.f_bound}")
    if quot > dyn.lip_c + 1e-9:
        raise ConfigError(f"{dyn.name}: sampled Lipschitz quotient {quot} exceeds c = {dyn.lip_c}")
    return {"max_norm": norm, "max_quotient": quot}


def derived_constants(dyn):
    """Growth constants ``A = 3c + 2|f|`` and ``B = 4|f|^2 + 2c(1 + |f|)``."""
    c, fb = dyn.lip_c, dyn.f_bound
    if c < 0 or fb < 0:
        raise ConfigError("regularity constants must be nonnegative")
    return 3.0 * c + 2.0 * fb, 4.0 * fb * fb + 2.0 * c * (1.0 + fb)


# -- payoffs -----------------------------------------------------------------

TERMINAL_KINDS = ("linear", "abs", "norm", "polynomial", "constant", "augmented")


@dataclass(frozen=True, eq=False)
class RunningPayoff:
    """Running payoff ``gamma(t, x, u, v)``; kinds ``constant`` and ``uv`` (= <u, v>)."""

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "uv"):
            raise ConfigError(f"unknown running payoff kind {self.kind!r}")

    def __call__(self, t, x, u, v):
        if self.kind == "constant":
            lead = np.broadcast_shapes(np.shape(x)[:-1], np.shape(u)[:-1], np.shape(v)[:-1])
            return np.full(lead, float(self.value))
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def bound(self, u_set, v_set):
        if self.kind == "constant":
            return abs(self.value)
        return float(np.max(np.abs(u_set.actions @ v_set.actions.T)))

    lipschitz = 0.0

    def describe(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Terminal payoff ``g`` with Lipschitz constant ``kappa`` and optional running payoff.

    kinds and params:
      linear      coef (n,), offset          g = <coef, x> + offset
      abs         axis, center, scale        g = scale * |x[axis] - center|
      norm        center (n,), scale         g = scale * ||x - center||
      polynomial  coef (low order first), axis   g = sum coef[k] * x[axis]**k
      constant    value
      augmented   base (PayoffSpec)          g = base.g(x[:-1]) + x[-1]
    """

    kind: str
    params: dict = field(default_factory=dict)
    kappa: float | None = None
    gamma: RunningPayoff | None = None

    def __post_init__(self):
        if self.kind not in TERMINAL_KINDS:
            raise ConfigError(f"unknown payoff kind {self.kind!r}")
        natural = self._natural_kappa()
        kappa = self.kappa
        if kappa is None:
            if natural is None:
                raise ConfigError(f"payoff kind {self.kind!r} needs an explicit kappa")
            kappa = natural
        elif natural is not None and kappa < natural - 1e-12:
            raise ConfigError(f"declared kappa {kappa} below the payoff's Lipschitz constant {natural}")
        if kappa < 0:
            raise ConfigError("kappa must be nonnegative")
        object.__setattr__(self, "kappa", float(kappa))

    def _natural_kappa(self):
        p = self.params
        if self.kind == "linear":
            return float(np.linalg.norm(p["coef"]))
        if self.kind in ("abs", "norm"):
            return abs(float(p.get("scale", 1.0)))
        if self.kind == "constant":
            return 0.0
        if self.kind == "augmented":
            return math.hypot(p["base"].kappa, 1.0)
        return None

    def g(self, x):
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.kind == "linear":
            return x @ np.asarray(p["coef"], float) + float(p.get("offset", 0.0))
        if self.kind == "abs":
            return float(p.get("scale", 1.0)) * np.abs(x[..., int(p.get("axis", 0))] - float(p.get("center", 0.0)))
        if self.kind == "norm":
            center = np.asarray(p.get("center", 0.0), float)
            return float(p.get("scale", 1.0)) * np.linalg.norm(x - center, axis=-1)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x[..., int(p.get("axis", 0))], np.asarray(p["coef"], float))
        if self.kind == "constant":
            return np.full(x.shape[:-1], float(p["value"]))
        return p["base"].g(x[..., :-1]) + x[..., -1]

    def describe(self):
        params = {}
        for k, v in self.params.items():
            params[k] = v.describe() if isinstance(v, PayoffSpec) else np.asarray(v).tolist()
        out = {"kind": self.kind, "params": params, "kappa": self.kappa}
        if self.gamma is not None:
            out["gamma"] = self.gamma.describe()
        return out


def check_payoff_lipschitz(payoff, lo, hi, samples=2000, seed=0):
    """Largest sampled difference quotient of ``g`` on the box; raises if above kappa."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    x = rng.uniform(lo, hi, size=(samples, lo.size))
    y = np.clip(x + rng.normal(scale=0.05 * (hi - lo), size=x.shape), lo, hi)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 1e-12
    quot = float(np.max(np.abs(payoff.g(x) - payoff.g(y))[ok] / dist[ok]))
    if quot > payoff.kappa + 1e-9:
        raise ConfigError(f"sampled Lipschitz quotient {quot} of g exceeds kappa {payoff.kappa}")
    return quot


def bolza_to_mayer(dyn, payoff):
    """Absorb the running payoff into an extra state coordinate.

    The augmented state is ``(x, y)`` with ``y' = gamma(t, x, u, v)`` and the
    new terminal payoff is ``g(x) + y``. Returns ``(dyn, payoff)`` unchanged,
    with a warning, when there is no running payoff.
    """
    gamma = payoff.gamma
    if gamma is None:
        logger.warning("payoff has no running part; bolza_to_mayer is a no-op")
        return dyn, payoff
    n = dyn.state_dim
    base_f = dyn.f

    def f_aug(t, z, u, v):
        x = z[..., :n]
        fx = base_f(t, x, u, v)
        gx = gamma(t, x, u, v)
        lead = np.broadcast_shapes(np.shape(fx)[:-1], np.shape(gx))
        return np.concatenate(
            [np.broadcast_to(fx, lead + (n,)), np.broadcast_to(gx, lead)[..., None]], axis=-1
        )

    g_bound = gamma.bound(dyn.u_set, dyn.v_set)
    y_extent = g_bound * 1.0 + 1.0
    aug = GameDynamics(
        name=f"{dyn.name}+running",
        state_dim=n + 1,
        f=f_aug,
        u_set=dyn.u_set,
        v_set=dyn.v_set,
        f_bound=math.hypot(dyn.f_bound, g_bound),
        lip_c=dyn.lip_c + gamma.lipschitz,
        box_lo=np.append(dyn.box_lo, -y_extent),
        box_hi=np.append(dyn.box_hi, y_extent),
        autonomous=dyn.autonomous,
        separated=dyn.separated and gamma.kind == "constant",
        descriptor={"augmented": dyn.descriptor, "gamma": gamma.describe()},
    )
    base = PayoffSpec(payoff.kind, dict(payoff.params), payoff.kappa)
    return aug, PayoffSpec("augmented", {"base": base})


# -- time partitions and controls --------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """Strictly increasing times ``t_0 < ... < t_N`` ending at the horizon."""

    times: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        t = _frozen(self.times)
        if t.ndim != 1 or t.size < 2:
            raise ConfigError("a partition needs at least two times")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("partition times must be strictly increasing")
        if t[0] < 0 or abs(t[-1] - self.horizon) > 1e-12:
            raise ConfigError(f"partition must lie in [0, {self.horizon}] and end at the horizon")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, n, t0=0.0, horizon=1.0):
        if n < 1:
            raise ConfigError("uniform partition needs n >= 1 intervals")
        times = np.linspace(t0, horizon, n + 1)
        times[-1] = horizon
        return cls(times, horizon)

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def n_intervals(self):
        return self.times.size - 1

    def gaps(self):
        return np.diff(self.times)


def mesh(p):
    """Largest gap between consecutive partition times."""
    return float(np.max(np.diff(p.times)))


@dataclass(frozen=True, eq=False)
class PiecewiseControl:
    """Control constant on ``[breaks[k], breaks[k+1])``.

    ``values`` is (K, d) for one control or (K, B, d) for a batch of controls
    sharing the breakpoints.
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = _frozen(self.breaks)
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        v.setflags(write=False)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
            raise ConfigError("control breakpoints must be strictly increasing")
        if v.shape[0] != b.size - 1:
            raise ConfigError("need exactly one control value per segment")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value, t0=0.0, t1=1.0):
        value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        return cls(np.array([t0, t1]), value[None, ...])

    @classmethod
    def on_partition(cls, partition, values):
        return cls(partition.times, values)

    @property
    def batched(self):
        return self.values.ndim == 3

    def covers(self, t0, t1, tol=1e-12):
        return self.breaks[0] <= t0 + tol and self.breaks[-1] >= t1 - tol

    def segment(self, t):
        k = int(np.searchsorted(self.breaks, t, side="right")) - 1
        return min(max(k, 0), self.values.shape[0] - 1)

    def at(self, t):
        return self.values[self.segment(t)]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States sampled at ``sample_times``; per-step records of the applied actions."""

    sample_times: np.ndarray
    states: np.ndarray
    u_record: np.ndarray
    v_record: np.ndarray

    def __post_init__(self):
        if self.states.shape[0] != self.sample_times.shape[0]:
            raise ValueError("one state per sample time")
        if self.u_record.shape[0] != self.sample_times.shape[0] - 1:
            raise ValueError("one action record per step")

    @property
    def final(self):
        return self.states[-1]

    def max_speed_ratio(self, f_bound):
        """Largest ``||x_{k+1} - x_k|| / (f_bound * dt)``; must not exceed 1 up to rounding."""
        dt = np.diff(self.sample_times)
        step = np.linalg.norm(np.diff(self.states, axis=0), axis=-1)
        dt = dt.reshape(dt.shape + (1,) * (step.ndim - 1))
        if f_bound == 0:
            return 0.0 if np.all(step == 0) else math.inf
        return float(np.max(step / (f_bound * dt)))


def rk4_lockstep(f, t, x, u, v, h, nsteps, record=True):
    """Classical RK4 with actions held constant, advancing every batch row together.

    ``t`` and ``h`` may be scalars or per-row arrays of shape (B,). Returns the
    sample times and states, shapes (nsteps+1, ...) when ``record`` is set,
    otherwise only the final ones.
    """
    t = np.asarray(t, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    x = np.array(x, dtype=np.float64)
    hh = h[..., None] if h.ndim else h
    if record:
        times = [t.copy()]
        states = [x.copy()]
    for k in range(nsteps):
        tk = t + k * h
        k1 = f(tk, x, u, v)
        half = tk + 0.5 * h
        k2 = f(half, x + 0.5 * hh * k1, u, v)
        k3 = f(half, x + 0.5 * hh * k2, u, v)
        k4 = f(tk + h, x + hh * k3, u, v)
        x = x + hh * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if record:
            times.append(t + (k + 1) * h)
            states.append(x)
    if record:
        return np.stack(times), np.stack(states)
    return t + nsteps * h, x


def default_step(t0, t1):
    return min((t1 - t0) / 20.0, 1e-3)


def integrate(dyn, t0, x0, u_ctrl, v_ctrl, t1, step=None, record=True):
    """Integrate ``x' = f(t, x, u(t), v(t))`` on ``[t0, t1]`` with RK4.

    Substeps never cross a control breakpoint. ``x0`` may be (n,) or a batch
    (B, n) paired with batched controls. With ``record=False`` only the segment
    endpoints are kept.
    """
    if not t1 >= t0:
        raise ConfigError(f"integration interval [{t0}, {t1}] is reversed")
    if step is None:
        step = default_step(t0, t1) if t1 > t0 else 1.0
    if step <= 0:
        raise ConfigError("integration step must be positive")
    for name, ctrl in (("u", u_ctrl), ("v", v_ctrl)):
        if not ctrl.covers(t0, t1):
            raise ConfigError(f"{name}-control is not defined on [{t0}, {t1}]")
    x = np.array(x0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite initial state at t={t0}")
    inner = []
    for br in (u_ctrl.breaks, v_ctrl.breaks):
        inner.append(br[np.searchsorted(br, t0, side="right") : np.searchsorted(br, t1, side="left")])
    knots = [t0] + np.union1d(*inner).tolist() + [t1]
    times, states, urec, vrec = [np.array([t0])], [x[None]], [], []
    for a, b in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (a + b)
        u = u_ctrl.at(mid)
        v = v_ctrl.at(mid)
        nsub = max(1, math.ceil((b - a) / step - 1e-9))
        h = (b - a) / nsub
        ts, xs = rk4_lockstep(dyn.f, a, x, u, v, h, nsub, record=record)
        if record:
            ts, xs = ts[1:], xs[1:]
            ts[-1] = b
        else:
            ts, xs = np.array([b]), xs[None]
        bad = ~np.isfinite(xs.reshape(xs.shape[0], -1)).all(axis=1)
        if bad.any():
            raise NumericError(f"non-finite state at t={float(ts[np.argmax(bad)])}")
        times.append(ts)
        states.append(xs)
        urec.append(np.broadcast_to(u, (len(ts),) + np.shape(u)))
        vrec.append(np.broadcast_to(v, (len(ts),) + np.shape(v)))
        x = xs[-1]
    return Trajectory(
        np.concatenate(times), np.concatenate(states), np.concatenate(urec), np.concatenate(vrec)
    )
