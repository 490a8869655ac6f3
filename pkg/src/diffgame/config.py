"""Game configuration files (TOML).

A file either names a builtin game::

    builtin = "pursuit-line"

or declares affine dynamics ``f = M x + Bu u + Bv v + b``::

    name = "my-game"
    [dynamics]
    M = [[1.0]]
    Bu = [[1.0]]
    Bv = [[-1.0]]
    b = [0.0]
    u = "interval(-1, 1, 21)"      # or an explicit list such as [[-1.0], [0.0], [1.0]]
    v = "interval(-0.5, 0.5, 21)"
    box = [[-4.0], [4.0]]          # state box: lower corner, upper corner

Both forms accept optional tables that override the benchmark defaults::

    [payoff]                       # kind: linear, abs, norm, polynomial, constant
    kind = "linear"
    coef = [1.0]
    kappa = 1.0                    # optional when it follows from the parameters
    gamma = { kind = "constant", value = 1.0 }   # optional running payoff

    [initial]
    x0 = [0.0]
    t0 = 0.0
    core = [[-0.25], [0.25]]

    [grid]
    nodes = 201
    slices = 100

A running payoff is absorbed into an extra state coordinate on load.
"""

from __future__ import annotations

import os
import re
import sys
from dataclasses import replace

import numpy as np

from .dynamics import ControlSet, PayoffSpec, RunningPayoff, bolza_to_mayer
from .errors import ConfigError
from .games import BUILTINS, Benchmark, affine_dynamics, get_benchmark

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_INTERVAL = re.compile(r"^\s*interval\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)\s*$")
_PAYOFF_KEYS = {"kind", "kappa", "gamma"}


def parse_action_set(spec, label):
    """``"interval(lo, hi, count)"``, a list of scalars or a list of vectors."""
    if isinstance(spec, str):
        m = _INTERVAL.match(spec)
        if not m:
            raise ConfigError(f"action set {label}: cannot parse {spec!r}; expected 'interval(lo, hi, count)'")
        try:
            lo, hi = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise ConfigError(f"action set {label}: bad bounds in {spec!r}") from None
        return ControlSet.interval(lo, hi, int(m.group(3)), label)
    if isinstance(spec, list) and spec:
        return ControlSet(np.array(spec, dtype=np.float64), label)
    raise ConfigError(f"action set {label}: expected a nonempty list or 'interval(...)', got {spec!r}")


def _vec(value, n, what):
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if arr.shape != (n,):
        raise ConfigError(f"{what} must have {n} components, got {arr.tolist()}")
    return arr


def _box(value, n, what):
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(f"{what} must be [lower corner, upper corner]")
    lo, hi = _vec(value[0], n, what), _vec(value[1], n, what)
    if np.any(lo >= hi):
        raise ConfigError(f"{what}: need lower < upper on every axis")
    return lo, hi


def parse_payoff(table):
    kind = table.get("kind")
    if kind is None:
        raise ConfigError("payoff table needs a 'kind'")
    params = {k: v for k, v in table.items() if k not in _PAYOFF_KEYS}
    gamma = table.get("gamma")
    running = None
    if gamma is not None:
        running = RunningPayoff(gamma.get("kind", "constant"), float(gamma.get("value", 0.0)))
    return PayoffSpec(kind, params, table.get("kappa"), running)


def _affine_game(name, dyn_table):
    try:
        u_set = parse_action_set(dyn_table["u"], "U")
        v_set = parse_action_set(dyn_table["v"], "V")
        M = dyn_table["M"]
        n = len(M)
        lo, hi = _box(dyn_table["box"], n, "dynamics.box")
        Bu = dyn_table.get("Bu", np.zeros((n, u_set.dim)).tolist())
        Bv = dyn_table.get("Bv", np.zeros((n, v_set.dim)).tolist())
        b = dyn_table.get("b", [0.0] * n)
    except KeyError as exc:
        raise ConfigError(f"dynamics table is missing {exc.args[0]!r}") from None
    return affine_dynamics(name, M, Bu, Bv, b, u_set, v_set, lo, hi)


def benchmark_from_dict(data, source="<config>"):
    """Build a ``Benchmark`` from a parsed config mapping."""
    unknown = set(data) - {"builtin", "name", "dynamics", "payoff", "initial", "grid"}
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    if "builtin" in data:
        if "dynamics" in data:
            raise ConfigError(f"{source}: give either 'builtin' or a [dynamics] table, not both")
        bm = get_benchmark(data["builtin"])
    elif "dynamics" in data:
        dyn = _affine_game(data.get("name", "affine"), data["dynamics"])
        n = dyn.state_dim
        core = (dyn.box_lo + 0.4 * (dyn.box_hi - dyn.box_lo), dyn.box_hi - 0.4 * (dyn.box_hi - dyn.box_lo))
        payoff = PayoffSpec("linear", {"coef": [1.0] + [0.0] * (n - 1)})
        bm = Benchmark(dyn, payoff, x0=0.5 * (dyn.box_lo + dyn.box_hi), core_lo=core[0], core_hi=core[1])
    else:
        raise ConfigError(f"{source}: needs 'builtin = <name>' (one of {sorted(BUILTINS)}) or a [dynamics] table")
    n = bm.dyn.state_dim
    changes = {}
    if "payoff" in data:
        changes["payoff"] = parse_payoff(data["payoff"])
        changes["lower_value"] = changes["upper_value"] = None
    init = data.get("initial", {})
    if "x0" in init:
        changes["x0"] = _vec(init["x0"], n, "initial.x0")
    if "t0" in init:
        t0 = float(init["t0"])
        if not 0.0 <= t0 < 1.0:
            raise ConfigError(f"initial.t0 must lie in [0, 1), got {t0}")
        changes["t0"] = t0
    if "core" in init:
        changes["core_lo"], changes["core_hi"] = _box(init["core"], n, "initial.core")
    grid = data.get("grid", {})
    if "nodes" in grid:
        changes["nodes"] = int(grid["nodes"])
    if "slices" in grid:
        changes["slices"] = int(grid["slices"])
    bm = replace(bm, **changes)
    if bm.payoff.gamma is not None:
        dyn, pay = bolza_to_mayer(bm.dyn, bm.payoff)
        bm = replace(
            bm,
            dyn=dyn,
            payoff=pay,
            x0=np.append(bm.x0, 0.0),
            core_lo=np.append(bm.core_lo, 0.0),
            core_hi=np.append(bm.core_hi, 0.0),
        )
    return bm


def load_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"game config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from None
    return benchmark_from_dict(data, path)


def resolve_game(name_or_path):
    """A builtin benchmark by name, otherwise a config file path."""
    if name_or_path in BUILTINS:
        return get_benchmark(name_or_path)
    return load_config(name_or_path)
