import numpy as np
import pytest

from conftest import WEAVE_GOAL, WEAVE_VMAX, WEAVE_WAYPOINTS
from tailsitter.errors import DomainError
from tailsitter.timeopt import (T_FLOOR, OptimizerConfig, TimeProblem, durations, max_sampled_speed, objective,
                                optimize_times, speed_penalty)


def _random_problem(rng, snap_weight=0.0):
    M = int(rng.integers(1, 5))
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = rng.normal(size=3) * 20
    s0[1] = rng.normal(size=3) * 2
    w = rng.normal(size=(M - 1, 3)) * 15
    return TimeProblem(s0, sf, w, OptimizerConfig(v_max=5.0, snap_weight=snap_weight)), M


def _central_fd(q, problem, h=1e-6):
    return np.array([(objective(q + h * e, problem)[0] - objective(q - h * e, problem)[0]) / (2 * h)
                     for e in np.eye(len(q))])


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(1)
    for k in range(20):
        problem, M = _random_problem(rng, snap_weight=1e-3 * (k % 2))
        q = np.log(rng.uniform(1.0, 4.0, M))
        _, g = objective(q, problem)
        fd = _central_fd(q, problem)
        assert np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12) < 1e-4


def test_penalty_is_zero_below_cap():
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = [10.0, 0, 0]
    problem = TimeProblem(s0, sf, [], OptimizerConfig(v_max=5.0))
    traj = problem.trajectory([20.0])
    P, dP = speed_penalty(traj, 5.0, 16)
    assert P == 0.0 and np.all(dP == 0.0)
    h, g = objective(np.log([20.0]), problem)
    np.testing.assert_allclose(h, 20.0)
    np.testing.assert_allclose(g, [20.0])


def test_durations_respect_floor():
    np.testing.assert_allclose(durations([-10.0, 0.0]), [T_FLOOR, 1.0])


def test_straight_line_respects_speed_cap():
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = [50.0, 0, 0]
    res = optimize_times(TimeProblem(s0, sf, [], OptimizerConfig(v_max=10.0)))
    assert res.status == "converged"
    assert max_sampled_speed(res.trajectory, 16) <= 10.0 * 1.001
    # a rest-to-rest min-snap profile peaks at 35/16 times the mean speed
    assert res.T[0] > 50.0 / 10.0 * 35 / 16 * 0.99


def test_weaving_instance_speed_cap_and_monotone_history():
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = WEAVE_GOAL
    res = optimize_times(TimeProblem(s0, sf, WEAVE_WAYPOINTS, OptimizerConfig(v_max=WEAVE_VMAX)))
    assert res.status == "converged"
    assert max_sampled_speed(res.trajectory, 16) <= WEAVE_VMAX * 1.001
    assert np.all(np.diff(res.history) <= 0)


def test_time_weights_shift_allocation():
    s0 = np.zeros((4, 3))
    sf = np.zeros((4, 3))
    sf[0] = [60.0, 0, 0]
    wp = [[30.0, 0, 0]]
    base = optimize_times(TimeProblem(s0, sf, wp, OptimizerConfig(v_max=8.0)))
    skew = optimize_times(TimeProblem(s0, sf, wp, OptimizerConfig(v_max=8.0, time_weights=[5.0, 1.0])))
    assert skew.T[0] < base.T[0]


def test_config_validation():
    with pytest.raises(DomainError):
        OptimizerConfig(v_max=0.0)
    with pytest.raises(DomainError):
        OptimizerConfig(penalty_weight=-1.0)
    with pytest.raises(DomainError):
        OptimizerConfig(samples=2)
    with pytest.raises(DomainError):
        OptimizerConfig(time_weights=[1.0, 0.0])
    with pytest.raises(DomainError):
        OptimizerConfig(time_weights=[1.0]).weights(2)
    goal = np.zeros((4, 3))
    goal[0] = [1.0, 0, 0]
    problem = TimeProblem(np.zeros((4, 3)), goal, [])
    with pytest.raises(DomainError):
        optimize_times(problem, q0=[np.nan])
