"""``diffgame`` command line: solve, simulate, verify, gap.

Exit codes: 0 success, 1 bound violation (or numeric failure), 2 configuration
error, 3 precondition refused (e.g. a game without Isaacs' condition).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from . import harness, kernels
from ._backend import THREADS_ENV, set_threads
from .config import resolve_game
from .dynamics import Partition, PiecewiseControl, derived_constants, mesh
from .errors import ConfigError, DiffGameError, InvalidActionError, OutOfBoxError, PreconditionError
from .extremal import ExtremalStrategy, play_vs_control, prop_cc_constant
from .value_dp import SpatialGrid, ValueGrid, compute_lower_value, compute_upper_value

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3

logger = logging.getLogger("diffgame")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    return [int(v) for v in _float_list(text)]


def _grid(bm, nodes):
    return SpatialGrid.covering(bm.dyn, bm.core_lo, bm.core_hi, nodes or bm.nodes, t0=bm.t0)


def _fmt(x):
    return repr(float(x))


# -- solve -------------------------------------------------------------------


def cmd_solve(args):
    bm = resolve_game(args.game)
    p = Partition.uniform(args.slices or bm.slices, bm.t0)
    grid = _grid(bm, args.nodes)
    lower = compute_lower_value(bm.dyn, bm.payoff, p, grid)
    upper = compute_upper_value(bm.dyn, bm.payoff, p, grid)
    x0 = np.asarray(bm.x0, float)[None, :]
    lo = float(lower(bm.t0, x0)[0])
    up = float(upper(bm.t0, x0)[0])
    if args.cache:
        lower.save(args.cache + ".lower.txt")
        upper.save(args.cache + ".upper.txt")
    print(f"game={bm.name} t0={bm.t0} x0={np.asarray(bm.x0).tolist()} nodes={list(grid.resolution)} slices={p.n_intervals}")
    print(f"lower={_fmt(lo)} upper={_fmt(up)} gap={_fmt(up - lo)}")
    return EXIT_OK


# -- simulate ----------------------------------------------------------------


def parse_u_control(spec, t0, horizon, u_set):
    """``const:a[,b...]`` or a CSV with columns ``t_start,t_end,u0[,u1...]`` covering ``[t0, horizon]``."""
    if spec.startswith("const:"):
        value = _float_list(spec[len("const:") :])
        u_set.index_of(value)
        return PiecewiseControl.constant(value, t0, horizon)
    if not os.path.isfile(spec):
        raise ConfigError(f"u-control file not found: {spec}")
    with open(spec, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ConfigError(f"{spec}: no control segments")
    try:
        table = np.array([[float(c) for c in r] for r in rows])
    except ValueError:
        raise ConfigError(f"{spec}: non-numeric entry in control table") from None
    starts, ends, vals = table[:, 0], table[:, 1], table[:, 2:]
    if vals.shape[1] != u_set.dim:
        raise ConfigError(f"{spec}: controls need {u_set.dim} components per row")
    if np.any(np.abs(starts[1:] - ends[:-1]) > 1e-9):
        raise ConfigError(f"{spec}: segments must be contiguous")
    if abs(starts[0] - t0) > 1e-9 or abs(ends[-1] - horizon) > 1e-9:
        raise ConfigError(
            f"{spec}: control covers [{starts[0]}, {ends[-1]}] but the game runs on [{t0}, {horizon}]"
        )
    for row in vals:
        u_set.index_of(row)
    breaks = np.append(starts, ends[-1])
    breaks[0], breaks[-1] = t0, horizon
    return PiecewiseControl(breaks, vals)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _value_for(bm, p, grid, cache):
    if cache and os.path.isfile(cache):
        V = ValueGrid.load(cache)
        same = V.times.shape == p.times.shape and np.allclose(V.times, p.times, rtol=0, atol=1e-12)
        if same and V.grid.resolution == grid.resolution and V.kind == "lower":
            return V
        logger.warning("value cache %s does not match the requested discretization; recomputing", cache)
    V = compute_lower_value(bm.dyn, bm.payoff, p, grid)
    if cache:
        V.save(cache)
    return V


def cmd_simulate(args):
    bm = resolve_game(args.game)
    p = Partition.uniform(args.slices or bm.slices, bm.t0)
    u_ctrl = parse_u_control(args.u_control, bm.t0, p.horizon, bm.dyn.u_set)
    grid = _grid(bm, args.nodes)
    V = _value_for(bm, p, grid, args.value_cache)
    strat = ExtremalStrategy.at_initial_state(bm.dyn, V, bm.x0, p)
    res = play_vs_control(bm.dyn, bm.payoff, bm.t0, bm.x0, u_ctrl, strat)
    A, B = derived_constants(bm.dyn)
    C = prop_cc_constant(bm.payoff.kappa, A, B)
    bound = strat.level + C * math.sqrt(mesh(p))
    if args.out:
        tr = res.trajectory
        n = bm.dyn.state_dim
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(
                ["t"]
                + [f"x{i}" for i in range(n)]
                + [f"u{i}" for i in range(bm.dyn.u_set.dim)]
                + [f"v{i}" for i in range(bm.dyn.v_set.dim)]
            )
            for k, t in enumerate(tr.sample_times):
                u = tr.u_record[k - 1] if k else [""] * bm.dyn.u_set.dim
                v = tr.v_record[k - 1] if k else [""] * bm.dyn.v_set.dim
                out.writerow([_fmt(t)] + [_fmt(s) for s in tr.states[k]] + [str(a) for a in u] + [str(a) for a in v])
    print(f"game={bm.name} level={_fmt(strat.level)} payoff={_fmt(res.payoff)} bound={_fmt(bound)} C={_fmt(C)}")
    return EXIT_OK if res.payoff <= bound + 1e-9 else EXIT_VIOLATION


# -- verify / gap ------------------------------------------------------------


def _run_experiment(name, bm, args):
    kw = {"timing": args.timing}
    if name in ("lemma1", "corollary1", "corollary3", "convergence", "isaacs"):
        kw["seed"] = args.seed
    if name in ("lemma1", "corollary1") and args.trials:
        kw["trials"] = args.trials
    if name == "corollary1" and args.partitions:
        kw["partitions"] = tuple(args.partitions)
    if name in ("corollary3", "convergence"):
        if args.meshes:
            kw["meshes"] = tuple(args.meshes)
        if args.random_controls is not None:
            kw["random_controls"] = args.random_controls
        if args.nodes:
            kw["nodes"] = args.nodes
    if name == "lipschitz":
        kw["nodes"], kw["slices"] = args.nodes, args.slices
    if name == "isaacs" and args.samples:
        kw["samples"] = args.samples
    return harness.EXPERIMENTS[name](bm, **kw)


def _emit(report, args):
    if args.out:
        report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    print(report.summary_line())
    extra = report.extra
    if "fitted_exponent" in extra:
        print(f"fitted exponent p={extra['fitted_exponent']!r} (C={extra['C']!r})")
    if extra.get("flagged_no_isaacs"):
        print("flagged: Isaacs' condition fails for this game")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_verify(args):
    bm = resolve_game(args.game)
    return _emit(_run_experiment(args.experiment, bm, args), args)


def cmd_gap(args):
    bm = resolve_game(args.game)
    report = harness.isaacs_study(bm, samples=args.samples or 100_000, seed=args.seed, timing=args.timing)
    print(f"max local-game gap {report.extra['max_gap']!r}")
    return _emit(report, args)


def build_parser():
    parser = _Parser(prog="diffgame", description="Zero-sum differential games: values, extremal play, bound checks.")
    parser.add_argument("--threads", type=int, help=f"cap worker threads (also {THREADS_ENV})")
    parser.add_argument("--seed", type=int, default=harness.DEFAULT_SEED, help="random seed (default %(default)s)")
    parser.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend (default from DIFFGAME_BACKEND)")
    parser.add_argument("-v", "--verbose", action="store_true")
    # the global flags are also accepted after the subcommand
    shared = _Parser(add_help=False)
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, outputs=True):
        p.add_argument("--game", required=True, help="builtin name or path to a TOML game config")
        p.add_argument("--nodes", type=int, help="grid nodes per axis")
        p.add_argument("--slices", type=int, help="number of time intervals")
        if outputs:
            p.add_argument("--out", help="write the JSON report here")
            p.add_argument("--csv", help="write one CSV row per trial here")
            p.add_argument("--timing", action="store_true", help="add wall-clock runtime to the report")

    p = sub.add_parser("solve", parents=[shared], help="compute lower and upper values")
    common(p, outputs=False)
    p.add_argument("--cache", help="write value grids to CACHE.lower.txt and CACHE.upper.txt")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", parents=[shared], help="play a u-control against the extremal strategy")
    common(p, outputs=False)
    p.add_argument("--u-control", required=True, help="'const:a[,b]' or CSV t_start,t_end,u0[,u1...]")
    p.add_argument("--value-cache", help="lower-value grid file to reuse or create")
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[shared], help="run a verification experiment")
    p.add_argument("experiment", choices=sorted(harness.EXPERIMENTS))
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--partitions", type=_int_list, help="comma-separated interval counts")
    p.add_argument("--meshes", type=_float_list, help="comma-separated mesh sizes")
    p.add_argument("--random-controls", type=int)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gap", parents=[shared], help="fuzz the local game for Isaacs gaps")
    p.add_argument("--game", required=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_gap)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        set_threads(args.threads)
        if args.backend:
            kernels.use_backend(args.backend)
        return args.func(args)
    except PreconditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, InvalidActionError, OutOfBoxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DiffGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
