import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgame.dynamics import ControlSet
from diffgame.errors import NumericError
from diffgame.games import BUILTINS, SEPARATED_BENCHMARKS, get_benchmark
from diffgame.local_game import isaacs_gap_report, optimal_action_v, solve_local_game, solve_local_games
from dataclasses import replace


def _small_pursuit():
    dyn = get_benchmark("pursuit-line").dyn
    return replace(dyn, u_set=ControlSet.interval(-1, 1, 3), v_set=ControlSet.interval(-0.5, 0.5, 3))


def _enumerate(dyn, t, x, xi):
    """Oracle: plain double loops over the action sets."""
    U, V = dyn.u_set.actions, dyn.v_set.actions
    pay = np.array([[float(np.dot(xi, dyn.f(t, np.asarray(x), u, v))) for v in V] for u in U])
    rows = [min(r) for r in pay]
    cols = [max(pay[:, j]) for j in range(len(V))]
    return max(rows), min(cols), rows.index(max(rows)), cols.index(min(cols))


def test_pursuit_three_by_three():
    res = solve_local_game(_small_pursuit(), 0.0, [0.0], [2.0])
    assert res.h_minus == res.h_plus == 1.0
    assert (res.u_star, res.v_star) == (2, 2)
    assert _enumerate(_small_pursuit(), 0.0, [0.0], [2.0]) == (1.0, 1.0, 2, 2)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_zero_covector_picks_first_actions(name):
    dyn = get_benchmark(name).dyn
    res = solve_local_game(dyn, 0.3, np.zeros(dyn.state_dim), np.zeros(dyn.state_dim))
    assert (res.h_minus, res.h_plus, res.u_star, res.v_star) == (0.0, 0.0, 0, 0)


def test_sum_separable_value_zero():
    dyn = replace(get_benchmark("sum").dyn, u_set=ControlSet.interval(-1, 1, 2), v_set=ControlSet.interval(-1, 1, 2))
    res = solve_local_game(dyn, 0.0, [0.0], [1.0])
    assert res.h_minus == res.h_plus == 0.0


def test_optimal_action_v_examples():
    dyn = get_benchmark("pursuit-line").dyn
    assert optimal_action_v(dyn, 0.0, [0.0], [0.1]).tolist() == [0.5]
    assert optimal_action_v(dyn, 0.0, [0.0], [-0.1]).tolist() == [-0.5]
    assert optimal_action_v(dyn, 0.0, [0.0], [0.0]).tolist() == [-0.5]


def test_non_finite_inputs_raise():
    dyn = get_benchmark("pursuit-line").dyn
    with pytest.raises(NumericError):
        solve_local_game(dyn, 0.0, [0.0], [np.inf])
    with pytest.raises(NumericError):
        solve_local_game(dyn, 0.0, [np.nan], [1.0])


@pytest.mark.parametrize("name", ["pursuit-line", "sum"])
def test_separable_gap_report(name):
    rep = isaacs_gap_report(get_benchmark(name).dyn, 1000, seed=0)
    assert rep.max_gap <= 1e-12 and rep.samples == 1000


def test_coupled_gap_is_two():
    dyn = get_benchmark("coupled-uv").dyn
    res = solve_local_game(dyn, 0.0, [0.0], [1.0])
    assert (res.h_minus, res.h_plus, res.gap) == (-1.0, 1.0, 2.0)
    assert _enumerate(dyn, 0.0, [0.0], [1.0])[:2] == (-1.0, 1.0)


@given(seed=st.integers(0, 2**31), name=st.sampled_from(sorted(BUILTINS)))
def test_matches_enumeration_oracle(seed, name):
    dyn = get_benchmark(name).dyn
    rng = np.random.default_rng(seed)
    t = float(rng.uniform(0, 1))
    x = rng.uniform(dyn.box_lo, dyn.box_hi)
    xi = rng.normal(size=dyn.state_dim)
    res = solve_local_game(dyn, t, x, xi)
    hm, hp, us, vs = _enumerate(dyn, t, x, xi)
    assert res.h_minus == pytest.approx(hm, abs=1e-12) and res.h_plus == pytest.approx(hp, abs=1e-12)
    # the chosen actions attain the optima when re-evaluated
    U, V = dyn.u_set.actions, dyn.v_set.actions
    row = min(float(np.dot(xi, dyn.f(t, x, U[res.u_star], v))) for v in V)
    col = max(float(np.dot(xi, dyn.f(t, x, u, V[res.v_star]))) for u in U)
    assert row == pytest.approx(res.h_minus, abs=1e-12) and col == pytest.approx(res.h_plus, abs=1e-12)


@given(seed=st.integers(0, 2**31), name=st.sampled_from(sorted(BUILTINS)))
def test_maxmin_never_exceeds_minmax(seed, name):
    dyn = get_benchmark(name).dyn
    rng = np.random.default_rng(seed)
    k = 200
    hm, hp, _, _ = solve_local_games(
        dyn,
        rng.uniform(0, 1, k),
        rng.uniform(dyn.box_lo, dyn.box_hi, (k, dyn.state_dim)),
        rng.normal(size=(k, dyn.state_dim)) * rng.uniform(0, 5, (k, 1)),
    )
    assert np.all(hm <= hp)


@given(
    seed=st.integers(0, 2**31),
    scale=st.floats(1e-3, 1e3),
    name=st.sampled_from(sorted(BUILTINS)),
)
def test_positive_homogeneity(seed, scale, name):
    dyn = get_benchmark(name).dyn
    rng = np.random.default_rng(seed)
    t = float(rng.uniform(0, 1))
    x = rng.uniform(dyn.box_lo, dyn.box_hi)
    # integer covectors keep the scaled payoffs free of rounding-induced tie flips
    xi = rng.integers(-4, 5, size=dyn.state_dim).astype(float)
    scale = float(2.0 ** round(np.log2(scale)))
    a = solve_local_game(dyn, t, x, xi)
    b = solve_local_game(dyn, t, x, scale * xi)
    assert (a.u_star, a.v_star) == (b.u_star, b.v_star)
    assert b.h_minus == pytest.approx(scale * a.h_minus, rel=1e-12, abs=1e-12)
    assert b.h_plus == pytest.approx(scale * a.h_plus, rel=1e-12, abs=1e-12)


@given(seed=st.integers(0, 2**31), name=st.sampled_from(sorted(BUILTINS)))
def test_action_permutation_keeps_values(seed, name):
    dyn = get_benchmark(name).dyn
    rng = np.random.default_rng(seed)
    perm = replace(
        dyn,
        u_set=ControlSet(dyn.u_set.actions[rng.permutation(len(dyn.u_set))]),
        v_set=ControlSet(dyn.v_set.actions[rng.permutation(len(dyn.v_set))]),
    )
    t = float(rng.uniform(0, 1))
    x = rng.uniform(dyn.box_lo, dyn.box_hi)
    xi = rng.normal(size=dyn.state_dim)
    a, b = solve_local_game(dyn, t, x, xi), solve_local_game(perm, t, x, xi)
    assert a.h_minus == b.h_minus and a.h_plus == b.h_plus


@pytest.mark.parametrize("name", SEPARATED_BENCHMARKS)
def test_separated_games_have_zero_gap(name):
    dyn = get_benchmark(name).dyn
    rng = np.random.default_rng(7)
    k = 2000
    hm, hp, _, _ = solve_local_games(
        dyn, rng.uniform(0, 1, k), rng.uniform(dyn.box_lo, dyn.box_hi, (k, dyn.state_dim)), rng.normal(size=(k, dyn.state_dim))
    )
    assert np.max(hp - hm) <= 1e-12


def test_tie_break_prefers_lowest_index():
    dyn = get_benchmark("coupled-uv").dyn
    # xi = 0 makes every entry a tie
    for u, v in itertools.product(range(2), range(2)):
        res = solve_local_game(dyn, 0.0, [float(u)], [0.0])
        assert (res.u_star, res.v_star) == (0, 0)
