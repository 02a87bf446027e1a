import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from grid_ev_cosim.lp import LPInfeasible, LPUnbounded, solve_lp


def test_simple_bounded_lp():
    # min -x - 2y, x + y = 1, 0 <= x, y <= 1
    res = solve_lp([-1, -2], [[1, 1]], [1], [0, 0], [1, 1])
    assert res.x == pytest.approx([0, 1])
    assert res.objective == pytest.approx(-2)


def test_free_variable():
    # x free, y in [0, 3], x - y = -2: minimizing x puts y at its lower bound
    res = solve_lp([1, 0], [[1, -1]], [-2], [-np.inf, 0], [np.inf, 3])
    assert res.x == pytest.approx([-2, 0])


def test_infeasible():
    with pytest.raises(LPInfeasible):
        solve_lp([1, 1], [[1, 1]], [5], [0, 0], [1, 1])


def test_unbounded():
    with pytest.raises(LPUnbounded):
        solve_lp([-1, 0], [[1, -1]], [0], [0, 0], [np.inf, np.inf])


def test_duals_are_shadow_prices():
    # two generators serving 150: cheap one maxed, marginal one sets the price
    res = solve_lp([25, 30], [[1, 1]], [150], [0, 0], [100, 100])
    assert res.duals[0] == pytest.approx(30)


def test_degenerate_problem_terminates():
    # many ties and redundant rows
    A = np.array([[1, 1, 1, 0], [1, 1, 1, 0], [0, 0, 1, 1]], dtype=float)
    res = solve_lp([1, 1, 1, 1], A, [2, 2, 1], [0] * 4, [2] * 4)
    assert res.objective == pytest.approx(2)


@st.composite
def random_lp(draw):
    m = draw(st.integers(1, 4))
    n = draw(st.integers(m, 7))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 2, n)
    b = A @ x0 if draw(st.booleans()) else rng.uniform(-5, 5, m)
    c = rng.integers(-5, 6, n).astype(float)
    lo = np.where(rng.random(n) < 0.2, -np.inf, 0.0)
    up = np.where(rng.random(n) < 0.3, np.inf, rng.uniform(1, 3, n))
    return c, A, b, lo, up


@settings(max_examples=300)
@given(random_lp())
def test_matches_highs(lp):
    c, A, b, lo, up = lp
    ref = linprog(c, A_eq=A, b_eq=b, bounds=list(zip(lo, up)), method="highs")
    if ref.status == 2:
        with pytest.raises(LPInfeasible):
            solve_lp(c, A, b, lo, up)
        return
    if ref.status == 3:
        with pytest.raises((LPUnbounded, LPInfeasible)):
            solve_lp(c, A, b, lo, up)
        return
    assert ref.status == 0
    res = solve_lp(c, A, b, lo, up)
    assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    assert np.allclose(A @ res.x, b, atol=1e-7)
    assert np.all(res.x >= lo - 1e-9) and np.all(res.x <= up + 1e-9)
