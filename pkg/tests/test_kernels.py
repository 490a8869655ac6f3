"""The numba and numpy kernels must agree; both are checked against direct formulas."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgame import _kernels_numba as kn
from diffgame import _kernels_numpy as kp


def _grid_case(rng, n, m):
    res = np.full(n, m, dtype=np.int64)
    lo = rng.uniform(-2, -0.5, n)
    hi = lo + rng.uniform(0.5, 3, n)
    vals = rng.normal(size=m**n)
    return vals, lo, hi, res


@given(seed=st.integers(0, 2**31), n=st.integers(1, 4))
def test_interp_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    vals, lo, hi, res = _grid_case(rng, n, 5)
    pts = rng.uniform(lo - 0.5, hi + 0.5, size=(40, n))
    np.testing.assert_allclose(kn.interp(vals, lo, hi, res, pts), kp.interp(vals, lo, hi, res, pts), atol=1e-13)


@given(seed=st.integers(0, 2**31), n=st.integers(1, 4), mode=st.sampled_from([0, 1]))
def test_backup_backends_agree(seed, n, mode):
    rng = np.random.default_rng(seed)
    vals, lo, hi, res = _grid_case(rng, n, 4)
    pts = rng.uniform(lo, hi, size=(30, n))
    disp = rng.normal(scale=0.4, size=(30, 3, 4, n))
    a_v, a_o = kn.backup(vals, lo, hi, res, pts, disp, mode, 1e-9)
    b_v, b_o = kp.backup(vals, lo, hi, res, pts, disp, mode, 1e-9)
    np.testing.assert_allclose(a_v, b_v, atol=1e-13)
    assert np.array_equal(a_o, b_o)


@given(seed=st.integers(0, 2**31))
def test_saddle_backends_agree(seed):
    rng = np.random.default_rng(seed)
    # small integers produce plenty of ties
    pay = rng.integers(-2, 3, size=(25, 4, 5)).astype(float)
    for a, b in zip(kn.saddle(pay), kp.saddle(pay)):
        assert np.array_equal(a, b)


@given(seed=st.integers(0, 2**31), n=st.integers(1, 3))
def test_levelset_candidates_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    vals, lo, hi, res = _grid_case(rng, n, 5)
    np.testing.assert_allclose(kn.levelset_candidates(vals, lo, hi, res, 0.1), kp.levelset_candidates(vals, lo, hi, res, 0.1), atol=1e-14)


@given(seed=st.integers(0, 2**31))
def test_nearest_backends_agree(seed):
    rng = np.random.default_rng(seed)
    cands = rng.integers(-3, 4, size=(30, 2)).astype(float)
    q = rng.integers(-3, 4, size=(20, 2)).astype(float) + 0.5
    a, b = kn.nearest(cands, q), kp.nearest(cands, q)
    assert np.array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], atol=0)


def test_interp_reproduces_multilinear_functions():
    rng = np.random.default_rng(0)
    lo, hi, res = np.array([-1.0, 0.0]), np.array([1.0, 2.0]), np.array([7, 9])
    ax = [np.linspace(lo[d], hi[d], res[d]) for d in range(2)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    f = lambda x, y: 1.0 + 2.0 * x - 3.0 * y + 0.5 * x * y
    vals = f(X, Y).ravel()
    pts = rng.uniform(lo, hi, size=(100, 2))
    for mod in (kn, kp):
        np.testing.assert_allclose(mod.interp(vals, lo, hi, res, pts), f(pts[:, 0], pts[:, 1]), atol=1e-12)


def test_interp_clamps_outside_points():
    lo, hi, res = np.array([0.0]), np.array([1.0]), np.array([3])
    vals = np.array([1.0, 2.0, 4.0])
    for mod in (kn, kp):
        assert mod.interp(vals, lo, hi, res, np.array([[-5.0], [9.0]])).tolist() == [1.0, 4.0]


def test_backup_flags_departures_outside_box():
    lo, hi, res = np.array([0.0]), np.array([1.0]), np.array([3])
    vals = np.zeros(3)
    pts = np.array([[0.0], [0.5]])
    disp = np.array([[[[-0.1]]], [[[0.2]]]])
    for mod in (kn, kp):
        _, out = mod.backup(vals, lo, hi, res, pts, disp, 0, 1e-9)
        assert out.tolist() == [True, False]


def test_levelset_candidates_include_edge_crossings():
    lo, hi, res = np.array([0.0]), np.array([2.0]), np.array([3])
    vals = np.array([-1.0, 1.0, 3.0])  # crosses 0 at x = 0.5
    for mod in (kn, kp):
        c = mod.levelset_candidates(vals, lo, hi, res, 0.0)
        assert c[:, 0].tolist() == [0.0, 0.5]


@pytest.mark.parametrize("mod", [kn, kp])
def test_nearest_first_index_wins_ties(mod):
    cands = np.array([[0.0], [2.0]])
    idx, dist = mod.nearest(cands, np.array([[1.0]]))
    assert idx.tolist() == [0] and dist.tolist() == [1.0]
