import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgame.dynamics import (
    ControlSet,
    Partition,
    PayoffSpec,
    PiecewiseControl,
    RunningPayoff,
    bolza_to_mayer,
    derived_constants,
    eval_dynamics,
    integrate,
    mesh,
    validate_constants,
)
from diffgame.errors import ConfigError, InvalidActionError, NumericError
from diffgame.games import BUILTINS, affine_dynamics, get_benchmark
from diffgame.value_dp import SpatialGrid, compute_lower_value


def test_eval_pursuit_line_substitution():
    dyn = get_benchmark("pursuit-line").dyn
    assert eval_dynamics(dyn, 0.0, [0.0], [1.0], [0.5]) == pytest.approx([0.5], abs=0)


def test_eval_sum_cancels():
    dyn = get_benchmark("sum").dyn
    for t, x in ((0.0, 0.3), (0.7, -1.2)):
        assert eval_dynamics(dyn, t, [x], [-1.0], [1.0]).tolist() == [0.0]


def test_eval_rot2d_matches_hand_rotation():
    dyn = get_benchmark("rot2d").dyn
    rng = np.random.default_rng(5)
    for _ in range(5):
        t = rng.uniform(0, 1)
        x = rng.uniform(-1, 1, 2)
        u = dyn.u_set.actions[rng.integers(len(dyn.u_set))]
        v = dyn.v_set.actions[rng.integers(len(dyn.v_set))]
        c, s = math.cos(t), math.sin(t)
        expected = [c * u[0] - s * u[1] - v[0], s * u[0] + c * u[1] - v[1]]
        np.testing.assert_allclose(eval_dynamics(dyn, t, x, u, v), expected, atol=1e-15)


def test_eval_rejects_foreign_action_and_bad_state():
    dyn = get_benchmark("pursuit-line").dyn
    with pytest.raises(InvalidActionError):
        eval_dynamics(dyn, 0.0, [0.0], [0.33], [0.0])
    with pytest.raises(NumericError):
        eval_dynamics(dyn, 0.0, [np.nan], [1.0], [0.0])


def test_integrate_constant_velocity_is_exact():
    dyn = get_benchmark("pursuit-line").dyn
    for step in (0.3, 1e-3):
        tr = integrate(dyn, 0.0, [0.0], PiecewiseControl.constant([1.0]), PiecewiseControl.constant([0.5]), 1.0, step)
        assert tr.final[0] == pytest.approx(0.5, abs=1e-14)


def test_integrate_cancelling_controls_stays_put():
    dyn = get_benchmark("sum").dyn
    tr = integrate(dyn, 0.0, [0.2], PiecewiseControl.constant([-1.0]), PiecewiseControl.constant([1.0]), 1.0)
    assert np.all(tr.states == 0.2)


def test_integrate_linear_matches_exponential():
    dyn = get_benchmark("linear").dyn
    zero = PiecewiseControl.constant([0.0])
    tr = integrate(dyn, 0.0, [1.0], zero, zero, 1.0, step=1e-3)
    assert abs(tr.final[0] - math.e) < 1e-9


def test_integrate_rk4_order_on_rot2d():
    dyn = get_benchmark("rot2d").dyn
    u = PiecewiseControl.constant(dyn.u_set.actions[3])
    v = PiecewiseControl.constant(dyn.v_set.actions[5])
    finals = [integrate(dyn, 0.0, [0.1, -0.2], u, v, 1.0, step=h).final for h in (0.2, 0.1, 0.05, 0.025)]
    diffs = [np.linalg.norm(a - b) for a, b in zip(finals, finals[1:])]
    steps = np.log([0.2, 0.1, 0.05])
    order = np.polyfit(steps, np.log(diffs), 1)[0]
    assert order >= 3.5


def test_integrate_substeps_respect_breakpoints():
    dyn = get_benchmark("pursuit-line").dyn
    u = PiecewiseControl(np.array([0.0, 0.3, 1.0]), np.array([[1.0], [-1.0]]))
    tr = integrate(dyn, 0.0, [0.0], u, PiecewiseControl.constant([0.0]), 1.0, step=0.07)
    assert np.any(np.isclose(tr.sample_times, 0.3, atol=0))
    assert tr.final[0] == pytest.approx(0.3 - 0.7, abs=1e-14)


def test_integrate_errors():
    dyn = get_benchmark("pursuit-line").dyn
    c = PiecewiseControl.constant([0.0])
    with pytest.raises(ConfigError):
        integrate(dyn, 0.5, [0.0], c, c, 0.2)
    with pytest.raises(ConfigError):
        integrate(dyn, 0.0, [0.0], c, c, 1.0, step=-1.0)
    with pytest.raises(ConfigError):
        integrate(dyn, 0.0, [0.0], PiecewiseControl.constant([0.0], 0.0, 0.5), c, 1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integrate_blames_time_of_blowup():
    u_set = ControlSet.interval(0.0, 0.0, 1)
    dyn = affine_dynamics("blowup", [[5000.0]], [[0.0]], [[0.0]], [0.0], u_set, u_set, [-1.0], [1.0])
    c = PiecewiseControl.constant([0.0])
    with pytest.raises(NumericError, match="t="):
        integrate(dyn, 0.0, [1.0], c, c, 1.0, step=0.01)


def test_mesh_examples():
    assert mesh(Partition(np.array([0.0, 0.5, 1.0]))) == 0.5
    assert mesh(Partition(np.array([0.0, 0.1, 1.0]))) == pytest.approx(0.9)
    for n in (1, 7, 100):
        assert mesh(Partition.uniform(n)) == pytest.approx(1.0 / n, rel=1e-12)


@pytest.mark.parametrize("times", [[0.0], [0.0, 0.5, 0.5, 1.0], [0.0, 0.5], [0.2, 0.1, 1.0]])
def test_partition_invariants(times):
    with pytest.raises(ConfigError):
        Partition(np.array(times))


def test_derived_constants_examples():
    assert derived_constants(get_benchmark("pursuit-line").dyn) == (3.0, 9.0)
    assert derived_constants(get_benchmark("zero").dyn) == (0.0, 0.0)
    dyn = get_benchmark("pursuit-line").dyn
    assert derived_constants(replace(dyn, f_bound=2.0, lip_c=1.0)) == (7.0, 22.0)
    with pytest.raises(ConfigError):
        derived_constants(replace(dyn, f_bound=-1.0))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_declared_constants_dominate_samples(name):
    dyn = get_benchmark(name).dyn
    rep = validate_constants(dyn, samples=3000, seed=1)
    assert rep["max_norm"] <= dyn.f_bound + 1e-12
    assert rep["max_quotient"] <= dyn.lip_c + 1e-9


def test_bolza_zero_running_payoff_keeps_value():
    bm = get_benchmark("pursuit-line")
    pay = PayoffSpec("linear", {"coef": [1.0]}, gamma=RunningPayoff("constant", 0.0))
    aug, apay = bolza_to_mayer(bm.dyn, pay)
    assert aug.state_dim == 2 and apay.gamma is None
    p = Partition.uniform(20)
    g1 = SpatialGrid.covering(bm.dyn, [-0.5], [0.5], 41)
    g2 = SpatialGrid.covering(aug, [-0.5, 0.0], [0.5, 0.0], (41, 9))
    v1 = compute_lower_value(bm.dyn, bm.payoff, p, g1)
    v2 = compute_lower_value(aug, apay, p, g2)
    xs = np.linspace(-0.5, 0.5, 7)
    np.testing.assert_allclose(v2(0.0, np.stack([xs, 0 * xs], 1)), v1(0.0, xs[:, None]), atol=1e-10)


def test_bolza_unit_running_payoff_integrates_time():
    dyn = get_benchmark("pursuit-line").dyn
    pay = PayoffSpec("constant", {"value": 0.0}, gamma=RunningPayoff("constant", 1.0))
    aug, apay = bolza_to_mayer(dyn, pay)
    rng = np.random.default_rng(3)
    u = PiecewiseControl(np.linspace(0, 1, 6), dyn.u_set.actions[rng.integers(21, size=5)])
    v = PiecewiseControl(np.linspace(0, 1, 4), dyn.v_set.actions[rng.integers(21, size=3)])
    tr = integrate(aug, 0.0, [0.3, 0.0], u, v, 1.0)
    assert apay.g(tr.final) == pytest.approx(1.0, abs=1e-12)


def test_bolza_uv_running_payoff_matches_trapezoid():
    dyn = get_benchmark("sum").dyn
    pay = PayoffSpec("linear", {"coef": [1.0]}, gamma=RunningPayoff("uv"))
    aug, apay = bolza_to_mayer(dyn, pay)
    rng = np.random.default_rng(11)
    ub = np.sort(np.r_[0.0, rng.uniform(0, 1, 4), 1.0])
    vb = np.sort(np.r_[0.0, rng.uniform(0, 1, 3), 1.0])
    u = PiecewiseControl(ub, dyn.u_set.actions[rng.integers(21, size=5)])
    v = PiecewiseControl(vb, dyn.v_set.actions[rng.integers(21, size=4)])
    tr = integrate(aug, 0.0, [0.0, 0.0], u, v, 1.0)
    # oracle: trapezoid rule on each piece where both controls are constant
    knots = np.union1d(ub, vb)
    quad = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (a + b)
        val = float(u.at(mid) @ v.at(mid))
        quad += np.trapezoid([val, val], [a, b])
    assert tr.final[1] == pytest.approx(quad, abs=1e-10)
    assert apay.g(tr.final) == pytest.approx(tr.final[0] + quad, abs=1e-10)


def test_bolza_without_running_payoff_is_noop(caplog):
    bm = get_benchmark("sum")
    dyn, pay = bolza_to_mayer(bm.dyn, bm.payoff)
    assert dyn is bm.dyn and pay is bm.payoff
    assert "no-op" in caplog.text


@given(
    seed=st.integers(0, 2**31),
    name=st.sampled_from(["pursuit-line", "sum", "rot2d", "linear"]),
    switches=st.integers(1, 6),
)
def test_trajectory_speed_bounded(seed, name, switches):
    bm = get_benchmark(name)
    dyn = bm.dyn
    rng = np.random.default_rng(seed)
    br = np.linspace(0, 1, switches + 1)
    u = PiecewiseControl(br, dyn.u_set.actions[rng.integers(len(dyn.u_set), size=switches)])
    v = PiecewiseControl(br, dyn.v_set.actions[rng.integers(len(dyn.v_set), size=switches)])
    x0 = rng.uniform(bm.core_lo, bm.core_hi)
    tr = integrate(dyn, 0.0, x0, u, v, 1.0, step=0.01)
    assert tr.max_speed_ratio(dyn.f_bound) <= 1.0 + 1e-9


@given(seed=st.integers(0, 2**31))
def test_control_set_index_round_trip(seed):
    cs = ControlSet.circle(0.5, 8)
    i = int(np.random.default_rng(seed).integers(len(cs)))
    assert cs.index_of(cs.actions[i]) == i
