import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from diffgame import kernels
from diffgame.dynamics import Partition
from diffgame.games import get_benchmark
from diffgame.value_dp import SpatialGrid, compute_lower_value

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    """Run a test once per kernel backend, restoring the active one afterwards."""
    before = kernels.active_backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(before)


@pytest.fixture(scope="session")
def pursuit():
    return get_benchmark("pursuit-line")


@pytest.fixture(scope="session")
def pursuit_lower(pursuit):
    """Lower value of pursuit-line at the default 201 nodes x 100 slices."""
    p = Partition.uniform(pursuit.slices)
    grid = SpatialGrid.covering(pursuit.dyn, pursuit.core_lo, pursuit.core_hi, pursuit.nodes)
    return compute_lower_value(pursuit.dyn, pursuit.payoff, p, grid)


def pursuit_exact(t, x):
    return np.asarray(x)[..., 0] + (1.0 - np.asarray(t)) / 2.0


def fine_pursuit_dp(nodes=801, steps=400):
    """Brute-force lower-value DP for pursuit-line written directly with np.interp.

    Independent of the package kernels; the default sizes are 4x the
    benchmark resolution. Returns the node coordinates and ``V(0, .)``.
    """
    xs = np.linspace(-2.5, 2.5, nodes)
    u = np.linspace(-1.0, 1.0, 21)
    v = np.linspace(-0.5, 0.5, 21)
    disp = (u[:, None] - v[None, :]).ravel() / steps
    val = xs.copy()
    for _ in range(steps):
        nxt = np.interp(xs[:, None] + disp[None, :], xs, val).reshape(xs.size, u.size, v.size)
        val = nxt.min(axis=2).max(axis=1)
    return xs, val


@pytest.fixture(scope="session")
def fine_pursuit_oracle():
    return fine_pursuit_dp()


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
