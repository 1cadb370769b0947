import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from tailsitter.lbfgs import LbfgsConfig, minimize, weak_wolfe_search


def rosenbrock(x):
    f = np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2)
    g = np.zeros_like(x)
    g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1 - x[:-1])
    g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
    return f, g


def test_rosenbrock_converges():
    res = minimize(rosenbrock, np.array([-1.2, 1.0, -0.5, 0.8]), LbfgsConfig(tolerance=1e-8, max_iterations=500))
    assert res.converged
    np.testing.assert_allclose(res.x, np.ones(4), atol=1e-6)
    assert np.all(np.diff(res.history) <= 0)


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_convex_quadratic_matches_linear_solve(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    H = A @ A.T + n * np.eye(n)
    b = rng.normal(size=n)
    res = minimize(lambda x: (0.5 * x @ H @ x - b @ x, H @ x - b), np.zeros(n), LbfgsConfig(tolerance=1e-7))
    assert res.converged
    np.testing.assert_allclose(res.x, np.linalg.solve(H, b), atol=1e-7)
    assert np.all(np.diff(res.history) <= 0)


def test_line_search_satisfies_weak_wolfe():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    d = -g0
    ls = weak_wolfe_search(rosenbrock, x, f0, g0, d, step=1.0)
    assert ls.ok
    assert ls.f <= f0 + 1e-4 * ls.step * (g0 @ d)
    assert ls.grad @ d >= 0.9 * (g0 @ d)


def test_line_search_backs_off_non_finite_region():
    def fun(x):
        if x[0] > 1.0:
            return np.inf, np.array([np.nan])
        return (x[0] - 0.9) ** 2, 2 * (x - 0.9)

    x = np.array([0.0])
    f0, g0 = fun(x)
    ls = weak_wolfe_search(fun, x, f0, g0, np.array([10.0]), step=1.0)
    assert ls.ok and ls.x[0] <= 1.0 and ls.f < f0


def test_non_smooth_objective_reports_status():
    res = minimize(lambda x: (np.abs(x).sum(), np.sign(x)), np.array([1.0, -2.0]), LbfgsConfig(max_iterations=50))
    assert res.status in ("converged", "line_search_failed", "max_iterations")
    assert res.f <= 3.0
