import cvxpy as cp
import numpy as np
import pytest

from tailsitter.errors import ConvergenceError
from tailsitter.qp import AlmConfig, solve_box_qp, solve_qp


def _random_pd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + 0.5 * np.eye(n)


def _cvx_reference(H, g, C, d):
    x = cp.Variable(len(g))
    prob = cp.Problem(cp.Minimize(0.5 * cp.quad_form(x, cp.psd_wrap(H)) + g @ x), [C @ x <= d])
    prob.solve(solver=cp.CLARABEL)
    return x.value, prob.value


def test_general_inequalities_match_cvxpy():
    rng = np.random.default_rng(3)
    for _ in range(15):
        n, m = int(rng.integers(2, 12)), int(rng.integers(1, 20))
        H = _random_pd(rng, n)
        g = rng.normal(size=n) * 3
        C = rng.normal(size=(m, n))
        d = rng.uniform(0.1, 1.0, m)  # x = 0 is strictly feasible
        res = solve_qp(H, g, C, d)
        ref, val = _cvx_reference(H, g, C, d)
        assert res.converged
        np.testing.assert_allclose(res.x, ref, atol=1e-4)
        np.testing.assert_allclose(0.5 * res.x @ H @ res.x + g @ res.x, val, rtol=1e-5, atol=1e-6)
        assert np.all(C @ res.x - d <= 1e-6)


def test_box_qp_matches_cvxpy():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = int(rng.integers(2, 40))
        H = _random_pd(rng, n)
        g = rng.normal(size=n) * 10
        lb, ub = -np.ones(n), np.ones(n)
        res = solve_box_qp(H, g, lb, ub)
        x = cp.Variable(n)
        cp.Problem(cp.Minimize(0.5 * cp.quad_form(x, cp.psd_wrap(H)) + g @ x), [x >= lb, x <= ub]).solve(
            solver=cp.CLARABEL)
        assert res.converged
        np.testing.assert_allclose(res.x, x.value, atol=1e-4)
        assert np.all(res.x <= ub + 1e-6) and np.all(res.x >= lb - 1e-6)


def test_unconstrained_and_inactive_cases():
    H = np.diag([2.0, 4.0])
    g = np.array([-2.0, -4.0])
    np.testing.assert_allclose(solve_qp(H, g).x, [1.0, 1.0])
    res = solve_box_qp(H, g, [-5, -5], [5, 5])
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(res.multipliers, 0.0, atol=1e-8)


def test_infinite_bounds_are_ignored():
    H = np.eye(2)
    g = np.array([-3.0, 3.0])
    res = solve_box_qp(H, g, [-np.inf, -1.0], [1.0, np.inf])
    np.testing.assert_allclose(res.x, [1.0, -1.0], atol=1e-7)


def test_infeasible_bounds_raise():
    with pytest.raises(ConvergenceError):
        solve_box_qp(np.eye(2), np.zeros(2), [1.0, 0.0], [0.0, 1.0])


def test_iteration_budget_reports_status():
    rng = np.random.default_rng(5)
    H = _random_pd(rng, 6)
    res = solve_box_qp(H, rng.normal(size=6) * 100, -np.ones(6), np.ones(6), AlmConfig(max_outer=1))
    assert res.status in ("converged", "max_outer")
    assert res.outer_iterations == 1
