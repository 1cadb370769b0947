"""Nonlinear 6-DOF rigid-body dynamics with aerodynamic loads.

State is (p, v, R, w): NED position and velocity, body-to-world rotation
and body angular rate. Thrust acts along body x.
"""

from dataclasses import dataclass, field

import numpy as np

from .aero import E1, aero_force_body, aero_moment_body, airflow
from .errors import DivergenceError, DomainError
from .so3 import cross, hat, project_to_so3


@dataclass
class VehicleState:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)

    def copy(self):
        return VehicleState(self.p.copy(), self.v.copy(), self.R.copy(), self.omega.copy())

    def is_finite(self):
        return all(np.all(np.isfinite(x)) for x in (self.p, self.v, self.R, self.omega))


@dataclass(frozen=True)
class FullInput:
    """Thrust (N, along body x) and body torque (N m)."""

    f: float
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class StateDerivative:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega: np.ndarray


def hover_attitude():
    """Nose-up attitude: body x along world -z, body y along world y."""
    return np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])


def aero_loads(state, wind, params, model):
    """Body-frame aerodynamic force and moment (zeros when ``model`` is None)."""
    if model is None:
        return np.zeros(3), np.zeros(3)
    flow = airflow(state.R, state.v, wind)
    c = model.coefficients(flow.alpha, flow.beta)
    return aero_force_body(flow, params, model, c), aero_moment_body(flow, params, model, c)


def derivative(state, u, wind, params, model):
    """Time derivative of the state under thrust/torque input ``u``."""
    f_a, m_a = aero_loads(state, wind, params, model)
    J = params.inertia
    w = state.omega
    v_dot = params.gravity + (u.f * (state.R @ E1) + state.R @ f_a) / params.mass
    w_dot = np.linalg.solve(J, u.tau + m_a - cross(w, J @ w))
    return StateDerivative(state.v, v_dot, state.R @ hat(w), w_dot)


def _advance(state, d, h):
    return VehicleState(state.p + h * d.p, state.v + h * d.v, state.R + h * d.R, state.omega + h * d.omega)


def step_rk4(state, u, wind, dt, params, model, t=0.0):
    """One classic Runge-Kutta step, then polar re-orthonormalisation of R.

    ``u`` and ``wind`` may be constants or callables of time (evaluated at
    the stage times ``t``, ``t + dt/2`` and ``t + dt``).
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    u_at = u if callable(u) else (lambda _t: u)
    w_at = wind if callable(wind) else (lambda _t: wind)

    k1 = derivative(state, u_at(t), w_at(t), params, model)
    k2 = derivative(_advance(state, k1, 0.5 * dt), u_at(t + 0.5 * dt), w_at(t + 0.5 * dt), params, model)
    k3 = derivative(_advance(state, k2, 0.5 * dt), u_at(t + 0.5 * dt), w_at(t + 0.5 * dt), params, model)
    k4 = derivative(_advance(state, k3, dt), u_at(t + dt), w_at(t + dt), params, model)

    h6 = dt / 6.0
    out = VehicleState(
        state.p + h6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p),
        state.v + h6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v),
        state.R + h6 * (k1.R + 2 * k2.R + 2 * k3.R + k4.R),
        state.omega + h6 * (k1.omega + 2 * k2.omega + 2 * k3.omega + k4.omega),
    )
    if not out.is_finite():
        raise DivergenceError(f"non-finite state after step at t={t + dt:.6g} s")
    out.R = project_to_so3(out.R)
    return out


def simulate(state, u, wind, dt, t_end, params, model, t0=0.0):
    """Integrate from ``t0`` to ``t_end``; returns (times, list of states)."""
    n = int(round((t_end - t0) / dt))
    times = t0 + dt * np.arange(n + 1)
    states = [state]
    for k in range(n):
        state = step_rk4(state, u, wind, dt, params, model, t=times[k])
        states.append(state)
    return times, states


def mechanical_energy(state, params):
    """Kinetic plus potential energy (J); potential uses the gravity vector."""
    kin = 0.5 * params.mass * state.v @ state.v + 0.5 * state.omega @ params.inertia @ state.omega
    return kin - params.mass * params.gravity @ state.p


@dataclass
class RatePidConfig:
    """Per-axis body-rate PID gains and feed-forward switch.

    Default ``kp`` is J_axis / 0.05, a 50 ms first-order rate response
    once the feed-forward cancels the aerodynamic and gyroscopic terms
    (set by :meth:`default_for`).
    """

    kp: np.ndarray
    ki: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    integrator_limit: float = 1.0
    feedforward: bool = True

    def __post_init__(self):
        self.kp = np.broadcast_to(np.asarray(self.kp, dtype=float), (3,)).copy()
        self.ki = np.broadcast_to(np.asarray(self.ki, dtype=float), (3,)).copy()
        self.kd = np.broadcast_to(np.asarray(self.kd, dtype=float), (3,)).copy()
        if np.any(self.kp < 0) or np.any(self.ki < 0) or np.any(self.kd < 0):
            raise DomainError("PID gains must be non-negative")

    @classmethod
    def default_for(cls, params):
        return cls(kp=np.diag(params.inertia) / 0.05)


class RatePid:
    """Three decoupled rate loops with aerodynamic/gyroscopic feed-forward."""

    def __init__(self, config):
        self.config = config
        self.integral = np.zeros(3)
        self._prev_error = None

    def reset(self):
        self.integral[:] = 0.0
        self._prev_error = None

    def __call__(self, omega_cmd, omega, dt, aero_moment=None, gyro=None):
        """Torque command; ``gyro`` is w x J w, ``aero_moment`` is M_a."""
        return rate_pid(omega_cmd, omega, self, dt, aero_moment, gyro)


def rate_pid(omega_cmd, omega, pid, dt, aero_moment=None, gyro=None):
    """tau = PID(omega_cmd - omega) - M_a + w x J w (feed-forward terms optional)."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    cfg = pid.config
    err = np.asarray(omega_cmd, dtype=float) - np.asarray(omega, dtype=float)
    lim = cfg.integrator_limit
    pid.integral = np.clip(pid.integral + err * dt, -lim, lim)
    derr = np.zeros(3) if pid._prev_error is None else (err - pid._prev_error) / dt
    pid._prev_error = err
    tau = cfg.kp * err + cfg.ki * pid.integral + cfg.kd * derr
    if cfg.feedforward:
        if aero_moment is not None:
            tau = tau - aero_moment
        if gyro is not None:
            tau = tau + gyro
    return tau

