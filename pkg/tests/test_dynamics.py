import numpy as np
import pytest

from tailsitter.aero import aero_moment_body, airflow
from tailsitter.dynamics import (FullInput, RatePid, RatePidConfig, VehicleState, derivative, hover_attitude,
                                 mechanical_energy, rate_pid, simulate, step_rk4)
from tailsitter.errors import DivergenceError, DomainError
from tailsitter.so3 import cross, exp_map


def _hover_state():
    return VehicleState(np.zeros(3), np.zeros(3), hover_attitude(), np.zeros(3))


def test_hover_equilibrium_derivative(params, model):
    d = derivative(_hover_state(), FullInput(params.mass * 9.8), None, params, model)
    np.testing.assert_allclose(d.v, 0.0, atol=1e-12)
    np.testing.assert_allclose(d.omega, 0.0, atol=1e-12)


def test_free_fall(params):
    R = exp_map(np.array([0.4, -1.0, 0.3]))
    s = VehicleState(np.zeros(3), np.zeros(3), R, np.zeros(3))
    d = derivative(s, FullInput(0.0), None, params, None)
    np.testing.assert_allclose(d.v, params.gravity)


def test_principal_axis_spin(params):
    s = VehicleState(np.zeros(3), np.zeros(3), np.eye(3), np.array([1.0, 0.0, 0.0]))
    d = derivative(s, FullInput(0.0), None, params, None)
    np.testing.assert_allclose(d.omega, 0.0, atol=1e-15)


def test_hover_persists(params, model):
    _, states = simulate(_hover_state(), FullInput(params.mass * 9.8), None, 1e-3, 1.0, params, model)
    assert np.linalg.norm(states[-1].p) < 1e-6


def test_ballistic_drop(params):
    _, states = simulate(_hover_state(), FullInput(0.0), None, 1e-3, 1.0, params, None)
    np.testing.assert_allclose(states[-1].p, [0.0, 0.0, 4.9], atol=1e-9)


def _torque_run(dt, params, model):
    s = VehicleState(np.zeros(3), np.array([6.0, 0.0, -1.0]), exp_map(np.array([0.0, -0.3, 0.0])), np.zeros(3))

    def u(t):
        return FullInput(12.0 + 2.0 * np.sin(3 * t), 0.01 * np.array([np.sin(2 * t), np.cos(3 * t), 0.5]))

    _, states = simulate(s, u, None, dt, 1.0, params, model)
    return states[-1]


def test_rk4_fourth_order(params, model):
    ref = _torque_run(1e-4, params, model)
    e1 = np.linalg.norm(_torque_run(4e-3, params, model).p - ref.p)
    e2 = np.linalg.norm(_torque_run(2e-3, params, model).p - ref.p)
    assert 12.0 < e1 / e2 < 20.0


def test_energy_drift_torque_free(params):
    s = VehicleState(np.zeros(3), np.array([3.0, -1.0, 2.0]), exp_map(np.array([0.2, 0.1, -0.4])),
                     np.array([0.5, -1.5, 2.0]))
    e0 = mechanical_energy(s, params)
    _, states = simulate(s, FullInput(0.0), None, 1e-3, 2.0, params, None)
    assert abs(mechanical_energy(states[-1], params) - e0) / abs(e0) < 1e-5


def test_orthonormality_long_run(params, model):
    s = VehicleState(np.zeros(3), np.zeros(3), hover_attitude(), np.array([0.3, 2.0, -1.0]))
    worst = 0.0
    for k in range(60_000 // 20):
        s = step_rk4(s, FullInput(params.mass * 9.8), None, 2e-2, params, None, t=k * 2e-2)
        worst = max(worst, np.linalg.norm(s.R.T @ s.R - np.eye(3)))
    assert worst < 1e-9
    assert np.linalg.det(s.R) > 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_errors(params, model):
    with pytest.raises(DomainError):
        step_rk4(_hover_state(), FullInput(0.0), None, 0.0, params, model)
    bad = VehicleState(np.zeros(3), np.array([np.inf, 0, 0]), np.eye(3), np.zeros(3))
    with pytest.raises(DivergenceError):
        step_rk4(bad, FullInput(0.0), None, 1e-3, params, model)


def test_pid_pure_feedforward(params):
    pid = RatePid(RatePidConfig.default_for(params))
    w = np.array([0.3, -0.2, 0.1])
    M_a = np.array([0.01, 0.02, -0.03])
    gyro = cross(w, params.inertia @ w)
    np.testing.assert_allclose(pid(w, w, 1e-3, M_a, gyro), -M_a + gyro, atol=1e-15)


def test_pid_decoupled(params):
    cfg = RatePidConfig(kp=[1.0, 2.0, 3.0], ki=[0.5, 0.5, 0.5], kd=[0.1, 0.1, 0.1], feedforward=False)
    pid = RatePid(cfg)
    tau = pid(np.array([0.0, 0.5, 0.0]), np.zeros(3), 1e-3)
    assert tau[0] == 0.0 and tau[2] == 0.0 and tau[1] > 0
    with pytest.raises(DomainError):
        rate_pid(np.zeros(3), np.zeros(3), pid, 0.0)
    with pytest.raises(DomainError):
        RatePidConfig(kp=[-1.0, 0, 0])


def test_pid_step_settles(params, model):
    """0.5 rad/s pitch-rate step around hover settles within 5% in < 0.5 s."""
    pid = RatePid(RatePidConfig.default_for(params))
    s = _hover_state()
    cmd = np.array([0.0, 0.5, 0.0])
    dt = 1e-3
    settled_at = None
    for k in range(600):
        flow = airflow(s.R, s.v)
        tau = pid(cmd, s.omega, dt, aero_moment_body(flow, params, model), cross(s.omega, params.inertia @ s.omega))
        s = step_rk4(s, FullInput(params.mass * 9.8, tau), None, dt, params, model, t=k * dt)
        inside = abs(s.omega[1] - 0.5) < 0.025
        if inside and settled_at is None:
            settled_at = (k + 1) * dt
        elif not inside:
            settled_at = None
    assert settled_at is not None and settled_at < 0.5
