"""Verification experiments for the distance, payoff and value bounds.

Each experiment returns an ``ExperimentReport``: per-trial records of the
measured quantity, its bound, the tolerance applied and the slack
``measured - bound``, plus a summary. A trial is a violation when
``measured > bound + tolerance``. Reports contain no wall-clock data unless
asked for, so the same configuration and seed give byte-identical JSON.

Tolerances are kept apart: integration ``INT_TOL``, arithmetic ``ARITH_TOL``
and a resolution-dependent grid term computed per experiment.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Partition, PiecewiseControl, derived_constants, mesh, rk4_lockstep
from .errors import ConfigError, PreconditionError
from .extremal import (
    ExtremalStrategy,
    corollary1_bound,
    corollary3_bound,
    paired_trajectories,
    play_vs_control,
    prop_cc_constant,
)
from .games import Benchmark, get_benchmark
from .local_game import ZERO_XI_TOL, isaacs_gap_report, sample_unit_covectors, solve_local_games
from .value_dp import SpatialGrid, compute_lower_value, compute_upper_value, lipschitz_estimate

DEFAULT_SEED = 12345
INT_TOL = 1e-8
ARITH_TOL = 1e-12
ISAACS_TOL = 1e-10
ISAACS_SAMPLES = 2000
RANDOM_CONTROLS = 100
SCHEMA_VERSION = 1


def _plain(obj):
    """Convert numpy scalars/arrays inside ``obj`` to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else repr(val)
    return obj


@dataclass
class ExperimentReport:
    experiment: str
    game: str
    config: dict
    trials: list
    summary: dict
    extra: dict = field(default_factory=dict)

    @property
    def violations(self):
        return int(self.summary.get("violations", 0))

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return _plain(
            {
                "schema": SCHEMA_VERSION,
                "experiment": self.experiment,
                "game": self.game,
                "config": self.config,
                "trials": self.trials,
                "summary": self.summary,
                "extra": self.extra,
            }
        )

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema {data.get('schema')!r}")
        return cls(data["experiment"], data["game"], data["config"], data["trials"], data["summary"], data["extra"])

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def write_csv(self, path):
        """One row per trial; nested values are JSON-encoded."""
        rows = self.to_dict()["trials"]
        cols = sorted({k for r in rows for k in r})
        with open(path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(cols)
            for r in rows:
                out.writerow([json.dumps(r[c]) if isinstance(r.get(c), (list, dict)) else r.get(c, "") for c in cols])

    def summary_line(self):
        s = self.summary
        return (
            f"{self.experiment} on {self.game}: {s['trials']} trials, {s['violations']} violations, "
            f"worst slack {s['worst_slack']:.3e}"
        )


def _trial(measured, bound, tol, **inputs):
    slack = float(measured) - float(bound)
    return dict(inputs, measured=float(measured), bound=float(bound), tolerance=float(tol), slack=slack, violation=bool(slack > tol))


def _report(experiment, bm, config, trials, extra=None, started=None):
    slacks = [t["slack"] for t in trials]
    summary = {
        "trials": len(trials),
        "violations": sum(t["violation"] for t in trials),
        "worst_slack": max(slacks) if slacks else 0.0,
    }
    if started is not None:
        summary["runtime_s"] = time.perf_counter() - started
    cfg = {"game": bm.describe()}
    cfg.update(config)
    return ExperimentReport(experiment, bm.name, _plain(cfg), _plain(trials), _plain(summary), _plain(extra or {}))


def _bench(game):
    return game if isinstance(game, Benchmark) else get_benchmark(game)


def require_isaacs(dyn, seed=DEFAULT_SEED, samples=ISAACS_SAMPLES, tol=ISAACS_TOL):
    """Raise ``PreconditionError`` unless sampled local games all have a value."""
    rep = isaacs_gap_report(dyn, samples, seed)
    if rep.max_gap > tol:
        raise PreconditionError(
            f"{dyn.name}: Isaacs' condition fails (local game gap {rep.max_gap:.3g} at t={rep.t:.3g}, "
            f"x={rep.x}, xi={rep.xi}); the distance bounds need maxmin = minmax to cancel the "
            "Hamiltonian difference, so the experiment is refused"
        )
    return rep


def _random_offsets(rng, count, n, max_radius, zero_every=10):
    """Offsets of uniform length in [0, max_radius]; every ``zero_every``-th is exactly zero."""
    dirs = sample_unit_covectors(rng, count, n)
    radii = rng.uniform(0.0, max_radius, size=count)
    radii[::zero_every] = 0.0
    return dirs * radii[:, None]


def _random_actions(rng, action_set, shape):
    return action_set.actions[rng.integers(len(action_set), size=shape)]


def _grid_for(bm, nodes=None):
    return SpatialGrid.covering(bm.dyn, bm.core_lo, bm.core_hi, nodes or bm.nodes, t0=bm.t0)


def _partition_for(bm, mesh_size):
    n = max(1, int(round((1.0 - bm.t0) / mesh_size)))
    return Partition.uniform(n, bm.t0)


def _adversarial_family(rng, bm, p, random_controls):
    """All constant controls from U followed by random piecewise-constant ones on ``p``."""
    U = bm.dyn.u_set.actions
    n_int = p.n_intervals
    const = np.broadcast_to(U[None, :, :], (n_int, U.shape[0], U.shape[1]))
    rand = _random_actions(rng, bm.dyn.u_set, (n_int, random_controls))
    return PiecewiseControl(p.times, np.concatenate([const, rand], axis=1))


def _family_labels(bm, random_controls):
    return [f"const:{i}" for i in range(len(bm.dyn.u_set))] + [f"random:{j}" for j in range(random_controls)]


def verify_lemma1(game, trials=1000, seed=DEFAULT_SEED, segments=4, substeps=50, timing=False):
    """Single-interval paired trajectories against ``(1 + dt A) d0^2 + B dt^2``.

    Each trial draws ``t0``, a log-uniform interval length, ``x0`` in the core,
    ``w0`` near ``x0`` (exactly equal in every tenth trial) and random
    switching controls ``u`` (for ``x``) and ``v`` (for ``w``). Over the
    interval ``x`` answers with the local-game ``v*`` and ``w`` with ``u*``. The
    squared distance is checked at every RK4 sample time.
    """
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    require_isaacs(dyn, seed)
    A, B = derived_constants(dyn)
    rng = np.random.default_rng(seed)
    n = dyn.state_dim
    t0 = rng.uniform(bm.t0, bm.t0 + 0.9 * (1.0 - bm.t0), size=trials)
    dt = np.exp(rng.uniform(math.log(1e-3), np.log(1.0 - t0)))
    x0 = rng.uniform(bm.core_lo, bm.core_hi, size=(trials, n))
    w0 = x0 + _random_offsets(rng, trials, n, float(np.max(bm.core_hi - bm.core_lo)))
    us, vs = solve_local_games(dyn, t0, x0, x0 - w0, zero_tol=ZERO_XI_TOL)[2:]
    u_star, v_star = dyn.u_set.actions[us], dyn.v_set.actions[vs]
    u_rand = _random_actions(rng, dyn.u_set, (segments, trials))
    v_rand = _random_actions(rng, dyn.v_set, (segments, trials))
    d0sq = np.sum((x0 - w0) ** 2, axis=1)
    worst_slack = np.full(trials, -np.inf)
    worst_at = np.zeros(trials)
    worst_meas = np.zeros(trials)
    worst_bound = np.zeros(trials)
    x, w = x0, w0
    h = dt / (segments * substeps)
    for s in range(segments):
        ts = t0 + s * (dt / segments)
        times, xs = rk4_lockstep(dyn.f, ts, x, u_rand[s], v_star, h, substeps)
        _, ws = rk4_lockstep(dyn.f, ts, w, u_star, v_rand[s], h, substeps)
        elapsed = times - t0
        d2 = np.sum((xs - ws) ** 2, axis=-1)
        bound = (1.0 + elapsed * A) * d0sq + B * elapsed**2
        # the start sample has slack exactly 0 and says nothing
        slack = np.where(elapsed > 0, d2 - bound, -np.inf)
        k = np.argmax(slack, axis=0)
        cols = np.arange(trials)
        better = slack[k, cols] > worst_slack
        worst_slack = np.where(better, slack[k, cols], worst_slack)
        worst_at = np.where(better, elapsed[k, cols], worst_at)
        worst_meas = np.where(better, d2[k, cols], worst_meas)
        worst_bound = np.where(better, bound[k, cols], worst_bound)
        x, w = xs[-1], ws[-1]
    recs = [
        _trial(
            worst_meas[i],
            worst_bound[i],
            INT_TOL,
            trial=i,
            t0=t0[i],
            dt=dt[i],
            d0=math.sqrt(d0sq[i]),
            at_elapsed=worst_at[i],
        )
        for i in range(trials)
    ]
    config = {"trials": trials, "seed": seed, "segments": segments, "substeps": substeps, "A": A, "B": B}
    return _report("lemma1", bm, config, recs, {"A": A, "B": B}, started)


def verify_corollary1(game, partitions=(10, 100, 1000), trials=100, seed=DEFAULT_SEED, timing=False):
    """Inductive pairing over uniform partitions against ``e^A (d0^2 + B mesh)`` at the horizon."""
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    require_isaacs(dyn, seed)
    A, B = derived_constants(dyn)
    rng = np.random.default_rng(seed)
    n = dyn.state_dim
    recs = []
    for N in partitions:
        p = Partition.uniform(int(N), bm.t0)
        x0 = rng.uniform(bm.core_lo, bm.core_hi, size=(trials, n))
        w0 = x0 + _random_offsets(rng, trials, n, float(np.max(bm.core_hi - bm.core_lo)))
        u_ctrl = PiecewiseControl(p.times, _random_actions(rng, dyn.u_set, (p.n_intervals, trials)))
        v_ctrl = PiecewiseControl(p.times, _random_actions(rng, dyn.v_set, (p.n_intervals, trials)))
        run = paired_trajectories(dyn, p.t0, x0, w0, u_ctrl, v_ctrl, p)
        d0 = run.distances[0]
        dN = run.distances[-1]
        for i in range(trials):
            bound = corollary1_bound(float(d0[i]), mesh(p), A, B)
            recs.append(_trial(dN[i] ** 2, bound, INT_TOL, partition=int(N), mesh=mesh(p), trial=i, d0=d0[i]))
    config = {"partitions": list(partitions), "trials": trials, "seed": seed, "A": A, "B": B}
    return _report("corollary1", bm, config, recs, {"A": A, "B": B}, started)


def _linear_fit(xs, ys):
    """Least-squares slope and intercept; ``None`` with fewer than two points."""
    if len(xs) < 2:
        return None, None
    slope, intercept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope), float(intercept)


def verify_corollary3(
    game, meshes=(0.1, 0.01, 0.001), random_controls=RANDOM_CONTROLS, seed=DEFAULT_SEED, nodes=None, timing=False
):
    """Tracking of the level set of the lower value by the extremal strategy.

    For each mesh, the lower value is computed on the matching partition, the
    strategy starts on its level set at ``x0`` and plays against the
    adversarial family. The worst squared distance of the final state to the
    terminal level set is compared with ``e^A B mesh`` plus a grid term: with
    ``e`` the grid diagonal, a distance error of ``e`` turns a bound ``b`` on the
    squared distance into ``b + 2 e sqrt(b) + e^2``. The worst squared
    distance must also be non-increasing along the mesh list, up to ``e^2``.
    """
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    require_isaacs(dyn, seed)
    A, B = derived_constants(dyn)
    rng = np.random.default_rng(seed)
    grid = _grid_for(bm, nodes)
    e = grid.diag_spacing
    recs = []
    for ms in meshes:
        p = _partition_for(bm, ms)
        V = compute_lower_value(dyn, bm.payoff, p, grid)
        strat = ExtremalStrategy.at_initial_state(dyn, V, bm.x0, p)
        family = _adversarial_family(rng, bm, p, random_controls)
        res = play_vs_control(dyn, bm.payoff, p.t0, bm.x0, family, strat, keep_substeps=False)
        _, dist = strat.level_set.project(float(p.times[-1]), res.final_state)
        k = int(np.argmax(dist))
        bound = corollary3_bound(mesh(p), A, B)
        tol = 2.0 * e * math.sqrt(bound) + e * e + INT_TOL
        recs.append(
            _trial(
                dist[k] ** 2,
                bound,
                tol,
                mesh=mesh(p),
                intervals=p.n_intervals,
                level=strat.level,
                worst_control=_family_labels(bm, random_controls)[k],
            )
        )
    d2 = [r["measured"] for r in recs]
    # distances are only resolved to the grid diagonal, so rows may tie up to e^2
    trend = all(b <= a + e * e + ARITH_TOL for a, b in zip(d2, d2[1:]))
    strict = all(b < a for a, b in zip(d2, d2[1:]))
    _, intercept = _linear_fit([r["mesh"] for r in recs], d2)
    limit_tol = 2.0 * e * e
    extra = {
        "A": A,
        "B": B,
        "grid_diagonal": e,
        "non_increasing": trend,
        "strictly_decreasing": strict,
        "zero_mesh_intercept": intercept,
        "intercept_within_grid_tolerance": None if intercept is None else intercept <= limit_tol,
    }
    config = {"meshes": list(meshes), "random_controls": random_controls, "seed": seed, "nodes": grid.resolution}
    report = _report("corollary3", bm, config, recs, extra, started)
    if not trend:
        report.summary["violations"] += 1
        report.summary["trend_violation"] = True
    return report


def _fit_exponent(meshes, excess):
    pts = [(m, x) for m, x in zip(meshes, excess) if x > ARITH_TOL]
    if len(pts) < 2:
        return None
    slope, _ = _linear_fit([math.log(m) for m, _ in pts], [math.log(x) for _, x in pts])
    return slope


def convergence_study(
    game,
    meshes=(1e-1, 1e-2, 1e-3, 1e-4),
    random_controls=RANDOM_CONTROLS,
    seed=DEFAULT_SEED,
    nodes=None,
    payoff=None,
    timing=False,
):
    """Worst payoff excess of the extremal strategy over the lower value, per mesh.

    The excess is checked against ``C sqrt(mesh)`` with ``C = kappa e^(A/2) sqrt(B)``
    plus a grid term ``kappa * e`` (``e`` the grid diagonal), and a power law
    ``excess ~ mesh^p`` is fitted over the rows with positive excess.
    """
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    require_isaacs(dyn, seed)
    pay = payoff or bm.payoff
    A, B = derived_constants(dyn)
    C = prop_cc_constant(pay.kappa, A, B)
    rng = np.random.default_rng(seed)
    grid = _grid_for(bm, nodes)
    tol = pay.kappa * grid.diag_spacing + INT_TOL
    recs = []
    for ms in meshes:
        p = _partition_for(bm, ms)
        V = compute_lower_value(dyn, pay, p, grid)
        strat = ExtremalStrategy.at_initial_state(dyn, V, bm.x0, p)
        family = _adversarial_family(rng, bm, p, random_controls)
        res = play_vs_control(dyn, pay, p.t0, bm.x0, family, strat, keep_substeps=False)
        k = int(np.argmax(res.payoff))
        excess = float(res.payoff[k]) - strat.level
        recs.append(
            _trial(
                excess,
                C * math.sqrt(mesh(p)),
                tol,
                mesh=mesh(p),
                intervals=p.n_intervals,
                lower_value=strat.level,
                worst_payoff=res.payoff[k],
                worst_control=_family_labels(bm, random_controls)[k],
            )
        )
    p_fit = _fit_exponent([r["mesh"] for r in recs], [r["measured"] for r in recs])
    extra = {
        "A": A,
        "B": B,
        "C": C,
        "kappa": pay.kappa,
        "fitted_exponent": p_fit,
        "exponent_at_least_half": None if p_fit is None else p_fit >= 0.5,
    }
    config = {"meshes": list(meshes), "random_controls": random_controls, "seed": seed, "nodes": grid.resolution}
    if payoff is not None:
        config["payoff"] = pay.describe()
    return _report("convergence", bm, config, recs, extra, started)


def default_resolutions(bm):
    """Quarter, half and full benchmark size as ``(nodes, slices)`` pairs."""
    return tuple(((bm.nodes - 1) // k + 1, max(1, bm.slices // k)) for k in (4, 2, 1))


def value_gap_study(game, resolutions=None, timing=False, analytic_tol=2e-2):
    """Upper minus lower value at ``(t0, x0)`` over joint grid/partition refinements.

    Every row must have gap >= -1e-10; games with a separated local game must
    have gap <= 1e-10. When the benchmark knows its analytic values, the
    finest row must match them within ``analytic_tol``. Games without Isaacs'
    condition are reported with their gap and flagged, not checked for
    convergence.
    """
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    x0 = np.asarray(bm.x0, float)[None, :]
    resolutions = resolutions or default_resolutions(bm)
    recs = []
    for nodes, slices in resolutions:
        p = Partition.uniform(int(slices), bm.t0)
        grid = _grid_for(bm, int(nodes))
        lo = compute_lower_value(dyn, bm.payoff, p, grid)
        up = compute_upper_value(dyn, bm.payoff, p, grid)
        lo_v = float(lo(bm.t0, x0)[0])
        up_v = float(up(bm.t0, x0)[0])
        gap = up_v - lo_v
        node_gap = float(np.max(up.values - lo.values))
        node_neg = float(np.min(up.values - lo.values))
        # separated games: upper == lower at every node; otherwise only lower <= upper
        measured = node_gap if dyn.separated else -node_neg
        row = _trial(
            measured,
            0.0,
            1e-10,
            nodes=int(nodes),
            slices=int(slices),
            lower=lo_v,
            upper=up_v,
            gap=gap,
            max_node_gap=node_gap,
            min_node_gap=node_neg,
        )
        if node_neg < -1e-10:
            row["violation"] = True
        for key, fn, val in (("lower", bm.lower_value, lo_v), ("upper", bm.upper_value, up_v)):
            if fn is not None:
                row[f"{key}_analytic"] = float(np.asarray(fn(bm.t0, x0))[0])
                row[f"{key}_error"] = abs(val - row[f"{key}_analytic"])
        recs.append(row)
    finest = recs[-1]
    analytic_ok = all(finest.get(f"{k}_error", 0.0) <= analytic_tol for k in ("lower", "upper"))
    if not analytic_ok:
        finest["violation"] = True
    gaps = [abs(r["gap"]) for r in recs]
    extra = {
        "isaacs": bool(dyn.separated),
        "flagged_no_isaacs": not dyn.separated,
        "gap_non_increasing": all(b <= a + ARITH_TOL for a, b in zip(gaps, gaps[1:])),
        "analytic_tolerance": analytic_tol,
        "analytic_ok": analytic_ok,
    }
    config = {"resolutions": [list(r) for r in resolutions]}
    return _report("value_gap", bm, config, recs, extra, started)


def verify_lipschitz(game, nodes=None, slices=None, timing=False):
    """Lipschitz estimate of the lower value against ``kappa e^c + 2 h kappa e^c``."""
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    grid = _grid_for(bm, nodes)
    p = Partition.uniform(slices or bm.slices, bm.t0)
    V = compute_lower_value(bm.dyn, bm.payoff, p, grid)
    est = lipschitz_estimate(V)
    bound = bm.payoff.kappa * math.exp(bm.dyn.lip_c)
    h = float(np.max(grid.spacing))
    rec = _trial(est, bound, 2.0 * h * bound, nodes=grid.resolution, slices=p.n_intervals, spacing=h)
    config = {"nodes": grid.resolution, "slices": p.n_intervals}
    return _report("lipschitz", bm, config, [rec], {"kappa": bm.payoff.kappa, "lip_c": bm.dyn.lip_c}, started)


def isaacs_study(game, samples=100_000, seed=DEFAULT_SEED, timing=False):
    """Fuzz the local game: maxmin <= minmax always; zero gap on separated games.

    One trial per sample batch is recorded: the worst ``H- - H+`` (must be
    <= 0 exactly) and, for separated games, the worst gap (<= ``ARITH_TOL``).
    """
    started = time.perf_counter() if timing else None
    bm = _bench(game)
    dyn = bm.dyn
    rng = np.random.default_rng(seed)
    n = dyn.state_dim
    t = rng.uniform(bm.t0, 1.0, size=samples)
    x = rng.uniform(dyn.box_lo, dyn.box_hi, size=(samples, n))
    xi = sample_unit_covectors(rng, samples, n) * rng.uniform(0.0, 10.0, size=(samples, 1))
    hm, hp, _, _ = solve_local_games(dyn, t, x, xi)
    gap = hp - hm
    k = int(np.argmax(gap))
    recs = [_trial(float(np.max(hm - hp)), 0.0, 0.0, check="maxmin <= minmax", samples=samples)]
    if dyn.separated:
        recs.append(_trial(gap[k], 0.0, ARITH_TOL, check="separated gap", samples=samples))
    extra = {
        "max_gap": float(gap[k]),
        "argmax": {"t": t[k], "x": x[k], "xi": xi[k]},
        "separated": bool(dyn.separated),
        "flagged_no_isaacs": bool(gap[k] > ISAACS_TOL),
    }
    return _report("isaacs", bm, {"samples": samples, "seed": seed}, recs, extra, started)


EXPERIMENTS = {
    "lemma1": verify_lemma1,
    "corollary1": verify_corollary1,
    "corollary3": verify_corollary3,
    "convergence": convergence_study,
    "value-gap": value_gap_study,
    "lipschitz": verify_lipschitz,
    "isaacs": isaacs_study,
}
