"""Time the numba kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats 5]

Prints per-kernel timings for 1-, 2- and 3-dimensional grids, full lower-value
solves on two builtin games, and the largest disagreement between backends.
"""

import argparse
import time

import numpy as np

from diffgame import _kernels_numba as nb
from diffgame import _kernels_numpy as npk
from diffgame import kernels
from diffgame.dynamics import Partition
from diffgame.games import get_benchmark
from diffgame.value_dp import SpatialGrid, compute_lower_value

BACKENDS = (("numba", nb), ("numpy", npk))


def _best(fn, repeats):
    fn()  # warm-up: compiles or loads the numba cache
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _grid_case(rng, dim, nodes, actions):
    res = np.full(dim, nodes, dtype=np.int64)
    lo, hi = -2.0 * np.ones(dim), 2.0 * np.ones(dim)
    vals = rng.normal(size=nodes**dim)
    axes = np.meshgrid(*[np.linspace(-2.0, 2.0, nodes)] * dim, indexing="ij")
    pts = np.stack([a.ravel() for a in axes], axis=1)
    disp = 0.3 * rng.normal(size=(pts.shape[0], actions, actions, dim))
    return vals, lo, hi, res, pts, disp


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for dim, nodes in ((1, 201), (2, 61), (3, 15)):
        vals, lo, hi, res, pts, disp = _grid_case(rng, dim, nodes, 9)
        shifted = pts + disp[:, 0, 0]
        times, outs = {}, {}
        for name, mod in BACKENDS:
            times[f"backup {name}"] = _best(lambda: mod.backup(vals, lo, hi, res, pts, disp, 0, 1e-9), repeats)
            times[f"interp {name}"] = _best(lambda: mod.interp(vals, lo, hi, res, shifted), repeats)
            outs[name] = (mod.backup(vals, lo, hi, res, pts, disp, 0, 1e-9)[0], mod.interp(vals, lo, hi, res, shifted))
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(outs["numba"], outs["numpy"]))
        rows.append((f"{dim}D grid, {pts.shape[0]} nodes x 81 action pairs", times, diff))
    return rows


def bench_solves(repeats):
    rows = []
    for game in ("pursuit-line", "rot2d"):
        bm = get_benchmark(game)
        grid = SpatialGrid.covering(bm.dyn, bm.core_lo, bm.core_hi, bm.nodes)
        p = Partition.uniform(bm.slices)
        times, vals = {}, {}
        before = kernels.active_backend()
        try:
            for name, _ in BACKENDS:
                kernels.use_backend(name)
                times[f"solve {name}"] = _best(lambda: compute_lower_value(bm.dyn, bm.payoff, p, grid), repeats)
                vals[name] = compute_lower_value(bm.dyn, bm.payoff, p, grid).values
        finally:
            kernels.use_backend(before)
        diff = float(np.max(np.abs(vals["numba"] - vals["numpy"])))
        rows.append((f"lower value of {game} ({bm.nodes} nodes/axis, {bm.slices} slices)", times, diff))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    for label, times, diff in bench_kernels(args.repeats) + bench_solves(max(1, args.repeats // 2)):
        print(label)
        names = sorted({k.split()[0] for k in times})
        for what in names:
            fast, slow = times[f"{what} numba"], times[f"{what} numpy"]
            print(f"  {what:7s} numba {fast * 1e3:9.2f} ms   numpy {slow * 1e3:9.2f} ms   speedup {slow / fast:6.1f}x")
        print(f"  max backend difference {diff:.1e}")


if __name__ == "__main__":
    main()
