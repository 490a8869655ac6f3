"""Grid dynamic programming for the lower/upper value and level-set geometry.

Value functions live on a tensor grid of nodes per time slice and are read
between nodes by multilinear interpolation (linear in time between slices).
One DP step is

    V(t_m, x) = max_u min_v V~(t_{m+1}, x + (t_{m+1} - t_m) f(t_m, x, u, v))

(min/max swapped for the upper value), with the departure point clamped to
the grid box. Clamped transitions that start inside the reachable tube of the
core region are counted; a nonzero count fails validation.

Value-grid file format (text, one header line of JSON after a magic line,
then one line per time slice, node values in C order, ``repr`` floats)::

    # diffgame value grid v1
    # {"kind": "lower", "lo": [...], "hi": [...], "resolution": [...], "times": [...], ...}
    v(t_0, node_0) v(t_0, node_1) ...
    v(t_1, node_0) ...
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import Partition
from .errors import ConfigError, EmptyLevelSetError, OutOfBoxError

logger = logging.getLogger(__name__)

MAGIC = "# diffgame value grid v1"
MEMBERSHIP_TOL = 1e-9
KINDS = ("lower", "upper", "candidate")


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Tensor grid of ``resolution[d]`` nodes on ``[lo[d], hi[d]]`` per axis.

    ``core_lo``/``core_hi`` (optional) is the region of initial states the
    grid was built to cover.
    """

    lo: np.ndarray
    hi: np.ndarray
    resolution: tuple
    core_lo: np.ndarray | None = None
    core_hi: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        res = tuple(int(r) for r in np.broadcast_to(np.asarray(self.resolution), lo.shape))
        if np.any(lo >= hi):
            raise ConfigError("grid box needs lo < hi on every axis")
        if min(res) < 2:
            raise ConfigError("grid resolution must be at least 2 per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "resolution", res)
        if self.core_lo is not None:
            object.__setattr__(self, "core_lo", np.atleast_1d(np.asarray(self.core_lo, float)))
            object.__setattr__(self, "core_hi", np.atleast_1d(np.asarray(self.core_hi, float)))

    @classmethod
    def covering(cls, dyn, core_lo, core_hi, resolution, t0=0.0, horizon=1.0, pad_cells=2):
        """Grid over the core box inflated by the reach radius plus ``pad_cells`` cells."""
        core_lo = np.atleast_1d(np.asarray(core_lo, dtype=np.float64))
        core_hi = np.atleast_1d(np.asarray(core_hi, dtype=np.float64))
        res = np.broadcast_to(np.asarray(resolution), core_lo.shape).astype(int)
        r0 = float(np.linalg.norm(np.maximum(np.abs(core_lo), np.abs(core_hi))))
        reach = dyn.reach_radius(horizon - t0, r0)
        span = core_hi - core_lo + 2.0 * reach
        span = np.where(span > 0, span, 1.0)
        if np.any(res - 1 - 2 * pad_cells < 1):
            raise ConfigError("resolution too small for the requested padding")
        h = span / (res - 1 - 2 * pad_cells)
        lo = core_lo - reach - pad_cells * h
        hi = core_hi + reach + pad_cells * h
        if np.any(lo < dyn.box_lo - 1e-12) or np.any(hi > dyn.box_hi + 1e-12):
            logger.warning("grid box %s..%s exceeds the state box of %s", lo, hi, dyn.name)
        return cls(lo, hi, tuple(res), core_lo, core_hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def res_array(self):
        return np.asarray(self.resolution, dtype=np.int64)

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.res_array - 1)

    @property
    def diag_spacing(self):
        return float(np.linalg.norm(self.spacing))

    @property
    def n_nodes(self):
        return int(np.prod(self.resolution))

    def axes(self):
        return [np.linspace(self.lo[d], self.hi[d], self.resolution[d]) for d in range(self.dim)]

    def nodes(self):
        if "nodes" not in self._cache:
            mesh_ = np.meshgrid(*self.axes(), indexing="ij")
            nodes = np.stack([m.ravel() for m in mesh_], axis=-1)
            nodes.setflags(write=False)
            self._cache["nodes"] = nodes
        return self._cache["nodes"]

    def tube_mask(self, dyn, tau):
        """Nodes within the reach of the core after time ``tau`` (all nodes if no core)."""
        if self.core_lo is None:
            return np.ones(self.n_nodes, dtype=bool)
        r0 = float(np.linalg.norm(np.maximum(np.abs(self.core_lo), np.abs(self.core_hi))))
        r = dyn.reach_radius(tau, r0) + 1e-12
        x = self.nodes()
        return np.all((x >= self.core_lo - r) & (x <= self.core_hi + r), axis=1)

    def describe(self):
        out = {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "resolution": list(self.resolution)}
        if self.core_lo is not None:
            out["core"] = [self.core_lo.tolist(), self.core_hi.tolist()]
        return out


@dataclass(frozen=True, eq=False)
class ValueGrid:
    """A function sampled on time slices x grid nodes: the lower/upper value or a candidate."""

    partition: Partition
    grid: SpatialGrid
    values: np.ndarray
    kind: str = "candidate"
    out_of_box: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(self.partition.times.size, self.grid.n_nodes)
        if self.kind not in KINDS:
            raise ConfigError(f"value grid kind must be one of {KINDS}")
        if not np.all(np.isfinite(vals)):
            raise ConfigError("value grid contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, partition, grid, fn, kind="candidate"):
        """Sample ``fn(t, nodes)`` (nodes shaped (N, n)) on every slice."""
        nodes = grid.nodes()
        vals = np.stack([np.broadcast_to(fn(t, nodes), (grid.n_nodes,)) for t in partition.times])
        return cls(partition, grid, vals, kind)

    def with_values(self, values, kind=None):
        return ValueGrid(self.partition, self.grid, values, kind or self.kind, self.out_of_box)

    @property
    def times(self):
        return self.partition.times

    def slice_at(self, t):
        """Node values at time ``t``, linear in time between slices."""
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        m = int(np.searchsorted(times, t, side="right")) - 1
        if abs(t - times[m]) <= 1e-12:
            return self.values[m]
        if abs(times[m + 1] - t) <= 1e-12:
            return self.values[m + 1]
        w = (t - times[m]) / (times[m + 1] - times[m])
        return (1.0 - w) * self.values[m] + w * self.values[m + 1]

    def __call__(self, t, x):
        x = np.asarray(x, dtype=np.float64)
        g = self.grid
        return kernels.interp(self.slice_at(float(t)), g.lo, g.hi, g.res_array, x)

    def validate(self):
        if self.out_of_box:
            raise OutOfBoxError(
                f"{self.out_of_box} DP transitions from the reachable tube left the grid box "
                f"{self.grid.lo.tolist()}..{self.grid.hi.tolist()}; enlarge the box"
            )
        return self

    def header(self):
        return {
            "kind": self.kind,
            "lo": self.grid.lo.tolist(),
            "hi": self.grid.hi.tolist(),
            "resolution": list(self.grid.resolution),
            "core": None
            if self.grid.core_lo is None
            else [self.grid.core_lo.tolist(), self.grid.core_hi.tolist()],
            "times": self.times.tolist(),
            "horizon": self.partition.horizon,
            "out_of_box": self.out_of_box,
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MAGIC + "\n")
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            for row in self.values:
                fh.write(" ".join(map(repr, row.tolist())) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            if fh.readline().rstrip("\n") != MAGIC:
                raise ConfigError(f"{path}: not a diffgame value grid file")
            head = json.loads(fh.readline()[2:])
            rows = [np.array(line.split(), dtype=np.float64) for line in fh if line.strip()]
        core = head.get("core")
        grid = SpatialGrid(
            head["lo"],
            head["hi"],
            tuple(head["resolution"]),
            None if core is None else core[0],
            None if core is None else core[1],
        )
        part = Partition(np.array(head["times"]), head["horizon"])
        return cls(part, grid, np.stack(rows), head["kind"], head["out_of_box"])


def _transition_tol(grid):
    return 1e-9 * grid.spacing


def one_step(dyn, t, dt, next_values, grid, points, mode):
    """Backed-up values at ``points`` from the slice ``next_values`` one step ahead."""
    disp = dt * dyn.velocities(t, points)
    return kernels.backup(
        next_values, grid.lo, grid.hi, grid.res_array, np.asarray(points, float), disp, mode, _transition_tol(grid)
    )


def _dp(dyn, payoff, p, grid, mode, strict):
    if grid.dim != dyn.state_dim:
        raise ConfigError("grid dimension does not match the game's state dimension")
    nodes = grid.nodes()
    times = p.times
    vals = np.empty((times.size, grid.n_nodes))
    vals[-1] = payoff.g(nodes)
    vel = dyn.velocities(times[0], nodes) if dyn.autonomous else None
    tol = _transition_tol(grid)
    lo, hi, res = grid.lo, grid.hi, grid.res_array
    out_count = 0
    for m in range(times.size - 2, -1, -1):
        dt = times[m + 1] - times[m]
        v = vel if vel is not None else dyn.velocities(times[m], nodes)
        vals[m], outside = kernels.backup(vals[m + 1], lo, hi, res, nodes, dt * v, mode, tol)
        if outside.any():
            out_count += int(np.count_nonzero(outside & grid.tube_mask(dyn, times[m] - times[0])))
    out = ValueGrid(p, grid, vals, "lower" if mode == 0 else "upper", out_count)
    if strict:
        out.validate()
    return out


def compute_lower_value(dyn, payoff, p, grid, strict=True):
    """Lower value by backward maxmin recursion from ``V(t_N, .) = g``."""
    return _dp(dyn, payoff, p, grid, 0, strict)


def compute_upper_value(dyn, payoff, p, grid, strict=True):
    """Upper value by backward minmax recursion from ``V(t_N, .) = g``."""
    return _dp(dyn, payoff, p, grid, 1, strict)


class LevelSet:
    """Sub-level set ``{x : phi(t, x) <= level}`` of an interpolated value grid.

    Closest points are searched among the sub-level nodes and the level
    crossings on grid edges of the (time-interpolated) slice; ties go to the
    first candidate in node order.
    """

    def __init__(self, phi, level, tol=MEMBERSHIP_TOL):
        self.phi = phi
        self.level = float(level)
        self.tol = tol
        self._cands = {}

    def contains(self, t, x):
        return np.asarray(self.phi(t, x)) <= self.level + self.tol

    def candidates(self, t):
        key = float(t)
        if key not in self._cands:
            g = self.phi.grid
            c = kernels.levelset_candidates(
                np.ascontiguousarray(self.phi.slice_at(key)), g.lo, g.hi, g.res_array, self.level + self.tol
            )
            if c.shape[0] == 0:
                raise EmptyLevelSetError(key, self.level)
            if len(self._cands) > 64:
                self._cands.clear()
            self._cands[key] = c
        return self._cands[key]

    def project(self, t, x):
        """Closest point and distance for a state (n,) or a batch (B, n); members map to themselves."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        cands = self.candidates(t)
        idx, dist = kernels.nearest(cands, xb)
        proj = cands[idx].copy()
        member = np.atleast_1d(self.contains(t, xb))
        proj[member] = xb[member]
        dist = np.where(member, 0.0, dist)
        if single:
            return proj[0], float(dist[0])
        return proj, dist


def distance_to_set(x, t, w):
    """Distance from ``x`` to ``W(t)``; zero exactly for members."""
    return w.project(t, x)[1]


def project_to_levelset(x, t, w):
    """A closest point to ``x`` in ``W(t)``."""
    return w.project(t, x)[0]


@dataclass
class CandidateReport:
    """Violations of the candidate properties found on a value grid."""

    terminal_violations: list
    dpp_violations: list
    sample_violations: list
    worst_dpp_slack: float
    worst_sample_slack: float = -math.inf
    sample_tol: float = 0.0
    lower_semicontinuity: str = "holds: the multilinear interpolant is continuous"

    @property
    def ok(self):
        return not (self.terminal_violations or self.dpp_violations or self.sample_violations)

    def to_dict(self):
        return {
            "terminal_violations": self.terminal_violations,
            "dpp_violations": self.dpp_violations,
            "sample_violations": self.sample_violations,
            "worst_dpp_slack": self.worst_dpp_slack,
            "worst_sample_slack": self.worst_sample_slack,
            "sample_tol": self.sample_tol,
            "lower_semicontinuity": self.lower_semicontinuity,
            "ok": self.ok,
        }


def _sample_box(grid, dyn, tau):
    """Box of the reachable tube after ``tau`` (the whole grid if no core is recorded)."""
    if grid.core_lo is None:
        return grid.lo, grid.hi
    r0 = float(np.linalg.norm(np.maximum(np.abs(grid.core_lo), np.abs(grid.core_hi))))
    r = dyn.reach_radius(tau, r0)
    return np.maximum(grid.core_lo - r, grid.lo), np.minimum(grid.core_hi + r, grid.hi)


def check_candidate_properties(phi, dyn, payoff, sample_count=0, seed=0, tol=1e-9, sample_tol=None):
    """Check ``phi(1, .) >= g`` at nodes and the one-step maxmin inequality.

    The maxmin inequality ``phi(t_m, x) >= max_u min_v phi(t_{m+1}, x + dt f)``
    is checked with tolerance ``tol`` at every node of every slice. With
    ``sample_count > 0`` it is also checked at that many random points per
    slice inside the reachable tube. Off the nodes both sides are Lipschitz
    interpolants that agree at nodes, so there the default tolerance adds the
    Lipschitz estimate of ``phi`` times the cell diagonal. Violations are
    listed as node indices, ``(slice, node)`` pairs and ``(slice, point)``
    pairs.
    """
    grid = phi.grid
    nodes = grid.nodes()
    times = phi.times
    term = np.flatnonzero(phi.values[-1] < payoff.g(nodes) - tol).tolist()
    if sample_tol is None:
        sample_tol = tol + lipschitz_estimate(phi) * grid.diag_spacing if sample_count else tol
    rng = np.random.default_rng(seed)
    dpp, samples = [], []
    worst = worst_sample = -math.inf
    for m in range(times.size - 1):
        dt = times[m + 1] - times[m]
        rhs, _ = one_step(dyn, times[m], dt, phi.values[m + 1], grid, nodes, 0)
        slack = rhs - phi.values[m]
        worst = max(worst, float(slack.max()))
        dpp.extend((m, int(i)) for i in np.flatnonzero(slack > tol))
        if sample_count:
            lo, hi = _sample_box(grid, dyn, times[m] - times[0])
            pts = rng.uniform(lo, hi, size=(sample_count, grid.dim))
            rhs_s, _ = one_step(dyn, times[m], dt, phi.values[m + 1], grid, pts, 0)
            gap = rhs_s - phi(times[m], pts)
            worst_sample = max(worst_sample, float(gap.max()))
            samples.extend((m, pts[i].tolist()) for i in np.flatnonzero(gap > sample_tol))
    return CandidateReport(term, dpp, samples, worst, worst_sample, float(sample_tol))


def lipschitz_estimate(v):
    """Largest difference quotient between adjacent nodes over all slices and axes."""
    vals = v.values.reshape((v.times.size,) + v.grid.resolution)
    h = v.grid.spacing
    best = 0.0
    for d in range(v.grid.dim):
        q = np.abs(np.diff(vals, axis=d + 1)) / h[d]
        best = max(best, float(q.max()))
    return best
