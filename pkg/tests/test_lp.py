import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from structhash.lp import SolverError, simplex_max, solve_restricted_master
from structhash.selftest import lp_violations, random_working_set


def highs_master(a, b, C):
    T, D = a.shape
    cost = np.concatenate([np.ones(D), [C]])
    A_ub = -np.hstack([a, np.ones((T, 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=-b, bounds=[(0, None)] * (D + 1), method="highs")
    assert res.status == 0
    return res.fun


def test_empty_working_set():
    sol = solve_restricted_master(np.zeros((0, 3)), np.zeros(0), 1.0, dims=3)
    assert sol.w.tolist() == [0, 0, 0] and sol.xi == 0.0 and sol.objective == 0.0


def test_single_entry_weight_pays():
    sol = solve_restricted_master([[2.0]], [1.0], C=10)
    assert sol.w.tolist() == pytest.approx([0.5])
    assert sol.xi == pytest.approx(0.0)
    assert sol.objective == pytest.approx(0.5)
    assert sol.duals.tolist() == pytest.approx([0.5])


def test_single_entry_grid_oracle():
    # exhaustive grid over (w, xi) for min w + 10 xi s.t. 2w + xi >= 1
    grid = np.linspace(0, 1, 2001)
    W, X = np.meshgrid(grid, grid)
    feas = 2 * W + X >= 1 - 1e-12
    best = (W + 10 * X)[feas].min()
    assert solve_restricted_master([[2.0]], [1.0], C=10).objective == pytest.approx(best, abs=1e-3)


def test_single_entry_slack_pays():
    sol = solve_restricted_master([[0.0]], [1.0], C=3)
    assert sol.w.tolist() == [0.0]
    assert sol.xi == pytest.approx(1.0)
    assert sol.objective == pytest.approx(3.0)
    assert sol.duals.tolist() == pytest.approx([3.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_restricted_master([[1.0, 2.0]], [1.0], dims=3)


def test_simplex_small_problem():
    # max 3x + 2y s.t. x + y <= 4, x + 3y <= 6
    x, y, _ = simplex_max(np.array([3.0, 2.0]), np.array([[1.0, 1.0], [1.0, 3.0]]), np.array([4.0, 6.0]))
    assert x.tolist() == pytest.approx([4.0, 0.0])
    assert y.tolist() == pytest.approx([3.0, 0.0])


def test_solver_error_carries_dump():
    err = SolverError("boom", {"a": [1]})
    assert err.dump == {"a": [1]}


@given(st.integers(0, 2**31))
def test_master_matches_highs_and_kkt(seed):
    rng = np.random.default_rng(seed)
    a, b, C = random_working_set(rng)
    sol = solve_restricted_master(a, b, C)
    assert sol.objective == pytest.approx(highs_master(a, b, C), rel=1e-7, abs=1e-9)
    v = lp_violations(a, b, C, sol)
    assert v["gap"] <= 1e-8
    assert v["feasibility"] <= 1e-8
    assert v["slackness"] <= 1e-6
    assert max(v["dual_sum"], v["dual_rows"], v["dual_sign"]) <= 1e-8


@given(st.integers(0, 2**31))
def test_adding_a_row_never_lowers_objective(seed):
    rng = np.random.default_rng(seed)
    a, b, C = random_working_set(rng, max_entries=10, max_dims=6)
    extra_a = rng.normal(size=(1, a.shape[1]))
    extra_b = rng.uniform(0, 1, 1)
    before = solve_restricted_master(a, b, C).objective
    after = solve_restricted_master(np.vstack([a, extra_a]), np.concatenate([b, extra_b]), C).objective
    assert after >= before - 1e-9
