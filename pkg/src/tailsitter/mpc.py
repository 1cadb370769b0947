"""Error-state model predictive control on SO(3).

The controller works on the reduced model with inputs ``u = (a_T, omega)``
(thrust acceleration f/m along body x, and body rate) and the error state

    dp = p_r - p,   dv = v_r - v,   dR = Log(R^T R_r),   du = u_r - u.

The error dynamics are linearised about the reference, discretised with
forward Euler, condensed over the horizon and solved as a box-constrained
QP with the augmented-Lagrangian solver in :mod:`tailsitter.qp`.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .aero import E1, aero_force_body, aero_moment_body, airflow, dfa_dvab
from .dynamics import FullInput, RatePid, RatePidConfig, VehicleState, hover_attitude, step_rk4
from .errors import ClampedReferenceWarning, DivergenceError, DomainError
from .qp import AlmConfig, solve_box_qp
from .so3 import a_inv_t, cross, exp_map, hat, log_map

NX, NU, NW = 9, 4, 3


@dataclass
class ErrorState:
    dp: np.ndarray
    dv: np.ndarray
    dR: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.dp, self.dv, self.dR])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6], x[6:9])

    @classmethod
    def between(cls, state, ref):
        """Error of ``state`` relative to the reference point ``ref``."""
        return cls(ref.p - state.p, ref.v - state.v, log_map(state.R.T @ ref.R))


@dataclass
class ReferencePoint:
    """One reference sample: state, reduced input and wind."""

    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    a_T: float
    omega: np.ndarray
    wind: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    @property
    def u(self):
        return np.concatenate([[self.a_T], self.omega])

    @classmethod
    def from_flatness(cls, res, wind=None):
        w = np.zeros(3) if wind is None else np.asarray(wind, dtype=float)
        return cls(res.state.p, res.state.v, res.state.R, res.a_T, res.state.omega, w, res.t)

    @classmethod
    def hover(cls, p, params, R=None):
        g = float(np.linalg.norm(params.gravity))
        return cls(np.asarray(p, dtype=float), np.zeros(3), hover_attitude() if R is None else R, g, np.zeros(3))


@dataclass
class MpcConfig:
    horizon: int = 10
    dt: float = 0.1
    Q: np.ndarray = field(default_factory=lambda: np.array([100.0] * 3 + [10.0] * 3 + [50.0] * 3))
    P: np.ndarray = field(default_factory=lambda: np.array([1.0, 10.0, 10.0, 10.0]))
    u_min: np.ndarray = None
    u_max: np.ndarray = None
    alm: AlmConfig = field(default_factory=AlmConfig)

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.horizon < 1 or not self.dt > 0:
            raise DomainError("horizon must be >= 1 and dt > 0")
        if self.Q.shape != (NX,) or self.P.shape != (NU,) or np.any(self.Q <= 0) or np.any(self.P <= 0):
            raise DomainError("Q needs 9 and P needs 4 positive weights")

    def bounds(self, params):
        """Input bounds (a_T, omega); defaults come from the vehicle limits."""
        lo = self.u_min if self.u_min is not None else np.concatenate(
            [[params.thrust_min / params.mass], -params.rate_max])
        hi = self.u_max if self.u_max is not None else np.concatenate(
            [[params.thrust_max / params.mass], params.rate_max])
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if np.any(lo >= hi):
            raise DomainError("u_min must be below u_max")
        return lo, hi


def _reduced_accel(R, v, a_T, wind, params, model):
    flow = airflow(R, v, wind)
    f_a = aero_force_body(flow, params, model)
    return params.gravity + a_T * (R @ E1) + R @ f_a / params.mass


def error_dynamics(dx, du, dw, ref, params, model):
    """Exact time derivative of the error state.

    ``dx`` is the 9-vector (dp, dv, dR), ``du`` the input error and ``dw``
    the wind error w_r - w. The actual state and input are reconstructed
    from the reference and the errors, so the result is exact for any
    error size on the principal log branch.
    """
    dx = np.asarray(dx, dtype=float)
    du = np.asarray(du, dtype=float)
    dR = dx[6:9]
    v = ref.v - dx[3:6]
    R = ref.R @ exp_map(-dR)
    a_T = ref.a_T - du[0]
    omega = ref.omega - du[1:]
    wind = ref.wind - np.asarray(dw, dtype=float)
    acc_r = _reduced_accel(ref.R, ref.v, ref.a_T, ref.wind, params, model)
    acc = _reduced_accel(R, v, a_T, wind, params, model)
    rel = ref.omega - exp_map(-dR) @ omega
    return np.concatenate([dx[3:6], acc_r - acc, a_inv_t(dR) @ rel])


def k_matrix(dR, omega):
    """K = d(hat(dR)^2 omega)/d(dR), the curvature term of the attitude block."""
    dR = np.asarray(dR, dtype=float)
    omega = np.asarray(omega, dtype=float)
    # hat(a)^2 w = a (a.w) - w |a|^2
    return np.outer(dR, omega) + (dR @ omega) * np.eye(3) - 2.0 * np.outer(omega, dR)


def jacobians(ref, params, model, dR=None, domega=None):
    """(F_x, F_u, F_w) of the error dynamics about ``ref``.

    ``dR`` and ``domega`` give the current attitude and rate errors for the
    second-order attitude terms; both default to zero (exact linearisation
    at the reference).
    """
    m = params.mass
    dR = np.zeros(3) if dR is None else np.asarray(dR, dtype=float)
    dw_ = np.zeros(3) if domega is None else np.asarray(domega, dtype=float)
    Rr = ref.R
    flow = airflow(Rr, ref.v, ref.wind)
    c = model.coefficients(flow.alpha, flow.beta)
    f_a = aero_force_body(flow, params, model, c)
    dfa = dfa_dvab(flow, params, model, c, allow_degenerate=True)
    omega = ref.omega - dw_

    Fx = np.zeros((NX, NX))
    Fx[0:3, 3:6] = np.eye(3)
    Fvv = Rr @ dfa @ Rr.T / m
    Fx[3:6, 3:6] = Fvv
    Fx[3:6, 6:9] = Rr @ (-ref.a_T * hat(E1) - hat(f_a) / m + dfa @ hat(flow.v_air_body) / m)
    Fx[6:9, 6:9] = -hat(omega) - 0.5 * hat(dw_) + 0.5 * k_matrix(dR, omega)

    Fu = np.zeros((NX, NU))
    Fu[3:6, 0] = Rr @ E1
    Fu[6:9, 1:4] = np.eye(3) + 0.5 * hat(dR)

    Fw = np.zeros((NX, NW))
    Fw[3:6, :] = -Fvv
    return Fx, Fu, Fw


@dataclass
class MpcSolution:
    u: np.ndarray
    du: np.ndarray
    status: str
    outer_iterations: int
    clamped_reference: bool
    predicted: np.ndarray


def condense(dx0, refs, params, model, config):
    """Condensed quadratic (H, g) over the stacked input errors."""
    N, dt = config.horizon, config.dt
    A_list, B_list = [], []
    for k in range(N):
        Fx, Fu, _ = jacobians(refs[k], params, model)
        A_list.append(np.eye(NX) + dt * Fx)
        B_list.append(dt * Fu)
    # x_{k+1} = Phi_{k+1} x0 + sum_j Gamma[k+1, j] u_j
    Phi = np.zeros((N + 1, NX, NX))
    Phi[0] = np.eye(NX)
    Gam = np.zeros((N + 1, N, NX, NU))
    for k in range(N):
        Phi[k + 1] = A_list[k] @ Phi[k]
        Gam[k + 1, :k] = np.einsum("ab,jbc->jac", A_list[k], Gam[k, :k])
        Gam[k + 1, k] = B_list[k]
    G = Gam[1:].transpose(0, 2, 1, 3).reshape(N * NX, N * NU)
    F = Phi[1:].reshape(N * NX, NX)
    Qbar = np.tile(config.Q, N)
    Pbar = np.tile(config.P, N)
    H = G.T @ (Qbar[:, None] * G) + np.diag(Pbar)
    g = G.T @ (Qbar * (F @ dx0))
    return 0.5 * (H + H.T), g, F, G


def solve_mpc(state, refs, params, model, config, bounds=None):
    """One receding-horizon solve; returns the applied reduced input.

    ``refs`` holds at least ``horizon`` reference points spaced ``dt``
    apart, starting at the current time.
    """
    N = config.horizon
    if len(refs) < N:
        raise DomainError(f"need {N} reference points, got {len(refs)}")
    lo, hi = bounds if bounds is not None else config.bounds(params)
    dx0 = ErrorState.between(state, refs[0]).vector
    H, g, F, G = condense(dx0, refs, params, model, config)
    u_r = np.concatenate([refs[k].u for k in range(N)])
    lb = u_r - np.tile(hi, N)
    ub = u_r - np.tile(lo, N)
    clamped = bool(np.any(lb > 0) or np.any(ub < 0))
    if clamped:
        warnings.warn("reference input outside actuator bounds", ClampedReferenceWarning, stacklevel=2)
    res = solve_box_qp(H, g, lb, ub, config.alm)
    du = res.x
    u = np.clip(refs[0].u - du[:NU], lo, hi)
    pred = (F @ dx0 + G @ du).reshape(N, NX)
    return MpcSolution(u, du, res.status, res.outer_iterations, clamped, pred)


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class TrackingLog:
    times: np.ndarray
    states: list
    refs: list
    inputs: np.ndarray
    torques: np.ndarray
    statuses: list
    bound_violations: int

    @property
    def position_errors(self):
        return np.array([np.linalg.norm(r.p - s.p) for s, r in zip(self.states, self.refs)])


class ReferenceTrack:
    """Time-indexed reference, clamped to its final sample beyond the end."""

    def __init__(self, times, points):
        self.times = np.asarray(times, dtype=float)
        self.points = list(points)

    def at(self, t):
        i = int(np.clip(np.searchsorted(self.times, t - 1e-9), 0, len(self.points) - 1))
        return self.points[i]

    def window(self, t, n, dt):
        return [self.at(t + k * dt) for k in range(n)]

    @property
    def duration(self):
        return float(self.times[-1])


def track(track_ref, x0, params, model, config=None, pid_config=None, sim_dt=1e-3, t_end=None,
          wind=None, plant_model=None):
    """Closed-loop MPC + rate PID against the full nonlinear dynamics.

    The MPC runs every ``config.dt`` and holds (thrust, rate command); the
    rate PID and the plant run at ``sim_dt``. ``wind`` is the true wind
    seen by the plant (constant vector or callable of t), which may differ
    from the reference wind. On divergence the raised
    :class:`DivergenceError` carries the partial log as ``.log``.
    """
    config = config or MpcConfig()
    pid = RatePid(pid_config or RatePidConfig.default_for(params))
    plant_model = model if plant_model is None else plant_model
    lo, hi = config.bounds(params)
    t_end = track_ref.duration if t_end is None else t_end
    steps_per = int(round(config.dt / sim_dt))
    n_ctrl = int(np.ceil(t_end / config.dt - 1e-9))
    wind_at = wind if callable(wind) else (lambda _t, w=wind: w)

    state = x0.copy()
    times, states, refs, inputs, torques, statuses = [0.0], [state], [track_ref.at(0.0)], [], [], []
    violations = 0
    t = 0.0
    J = params.inertia

    def partial():
        return TrackingLog(np.array(times), states, refs, np.array(inputs).reshape(-1, 4),
                           np.array(torques).reshape(-1, 3), statuses, violations)

    for _ in range(n_ctrl):
        win = track_ref.window(t, config.horizon, config.dt)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampedReferenceWarning)
            sol = solve_mpc(state, win, params, model, config, (lo, hi))
        statuses.append(sol.status)
        u = sol.u
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            violations += 1
        f = params.mass * u[0]
        for _ in range(steps_per):
            w_now = wind_at(t)
            flow = airflow(state.R, state.v, w_now)
            M_a = aero_moment_body(flow, params, plant_model) if plant_model is not None else np.zeros(3)
            tau = pid(u[1:], state.omega, sim_dt, M_a, cross(state.omega, J @ state.omega))
            try:
                state = step_rk4(state, FullInput(f, tau), wind_at, sim_dt, params, plant_model, t=t)
            except DivergenceError as exc:
                exc.log = partial()
                raise
            t += sim_dt
            if np.linalg.norm(state.p) > 1e6:
                exc = DivergenceError(f"tracking diverged at t={t:.3f} s")
                exc.log = partial()
                raise exc
        times.append(t)
        states.append(state)
        refs.append(track_ref.at(t))
        inputs.append(u)
        torques.append(tau)
    return partial()


def reference_from_plan(plan_result, wind=None):
    """Reference track from a plan; ``wind`` is what the planner was given."""
    if callable(wind):
        pts = [ReferencePoint.from_flatness(r, wind(r.t)[0]) for r in plan_result.reference]
    else:
        pts = [ReferencePoint.from_flatness(r, wind) for r in plan_result.reference]
    return ReferenceTrack(plan_result.times, pts)


def hover_reference(p, params, duration=10.0, dt=0.01):
    times = np.arange(0.0, duration + dt / 2, dt)
    ref = ReferencePoint.hover(p, params)
    return ReferenceTrack(times, [ref] * len(times))


def initial_state_from(ref):
    return VehicleState(ref.p.copy(), ref.v.copy(), ref.R.copy(), ref.omega.copy())
