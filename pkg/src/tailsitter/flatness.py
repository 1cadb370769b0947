"""Differential-flatness map for a coordinated-flight tail-sitter.

Given position derivatives up to snap (and the wind with two derivatives),
recover attitude, body rates, angular acceleration, thrust and torque.

The lateral body axis is normal to both the airspeed and the specific
force, so the vehicle flies with zero sideslip. The angle of attack solves
the scalar force balance ``h sin(gamma - alpha) + Cz(alpha, 0) = 0``
along the body z axis. Rates and angular accelerations come from a 4x4
linear system in (thrust-rate, body-rate) and its time derivative.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .aero import E1, E2, V_EPS, aero_moment_body, airflow, dfa_dvab
from .dynamics import FullInput, VehicleState
from .errors import ConvergenceError, NearSingularityError, StallError, StallWarning
from .so3 import cross, hat, norm3

#: below this |v_a x (a - g)| the lateral axis is carried over
PARALLEL_EPS = 1e-9
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
FALLBACK_HALF_WIDTH = np.radians(30.0)
N_COND_MAX = 1e12


@dataclass
class FlatSample:
    """Flat output derivatives at one instant, plus the wind and its rates."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    s: np.ndarray
    wind: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wind_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wind_ddot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        for name in ("p", "v", "a", "j", "s", "wind", "wind_dot", "wind_ddot"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def from_trajectory(cls, traj, t, wind=None):
        """Sample a :class:`~tailsitter.minco.PiecewiseTrajectory` at ``t``.

        ``wind`` is None, a constant 3-vector, or a callable returning
        ``(w, w_dot, w_ddot)`` at time t.
        """
        d = traj.derivatives(t, 4)
        if wind is None:
            w = (np.zeros(3),) * 3
        elif callable(wind):
            w = wind(t)
        else:
            w = (np.asarray(wind, dtype=float), np.zeros(3), np.zeros(3))
        return cls(*d, *w, t=t)


@dataclass
class FlatnessMemory:
    """Sign and warm-start memory carried along a trajectory."""

    y_b_prev: np.ndarray = field(default_factory=lambda: E2.copy())
    alpha_prev: float = 0.5 * np.pi


@dataclass
class AlphaSolution:
    alpha: float
    iterations: int
    residual: float
    bracketed: bool = False


@dataclass
class FlatnessResult:
    """Full state, inputs and the intermediate quantities of the flat map."""

    state: VehicleState
    input: FullInput
    a_T: float
    a_T_dot: float
    omega_dot: np.ndarray
    alpha: float
    gamma: float
    h: float
    r: float
    y_b_prev: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    force_residual: float = 0.0
    hover: bool = False
    stalled: bool = False
    #: airspeed parallel to the specific force: roll about the airspeed is free
    parallel: bool = False
    t: float = 0.0

    @property
    def R(self):
        return self.state.R

    @property
    def omega(self):
        return self.state.omega


# ---------------------------------------------------------------------------
# attitude


def lateral_axis(v_a, a_minus_g, y_b_prev):
    """Unit lateral axis normal to airspeed and specific force, and its sign.

    The sign ``r`` keeps the new axis within 90 degrees of ``y_b_prev``. When
    the two vectors are (anti)parallel the previous axis, projected normal
    to the airspeed, is reused with ``r = +1``.
    """
    y_b_prev = np.asarray(y_b_prev, dtype=float)
    n = cross(v_a, a_minus_g)
    norm = norm3(n)
    if norm < PARALLEL_EPS:
        V = norm3(v_a)
        y = y_b_prev - (y_b_prev @ v_a) * v_a / V**2 if V > 0 else y_b_prev
        return y / norm3(y), 1.0
    r = 1.0 if n @ y_b_prev >= 0 else -1.0
    return r * n / norm, r


def flight_path_angle(v_a, a_minus_g, r):
    """Signed angle from the airspeed to the specific force (about y_b)."""
    return r * float(np.arctan2(norm3(cross(a_minus_g, v_a)), a_minus_g @ v_a))


def lift_ratio(a_minus_g, V, params):
    """h = 2 m |a - g| / (rho V^2 S): specific force over dynamic pressure."""
    return params.mass * norm3(a_minus_g) / (params.qbar_factor * V * V)


def alpha_residual(alpha, h, gamma, model):
    cz, dcz = model.cz_and_slope(alpha)
    return h * np.sin(gamma - alpha) + cz, -h * np.cos(gamma - alpha) + dcz


def solve_alpha(h, gamma, alpha_guess, model, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Newton-Raphson root of ``h sin(gamma - alpha) + Cz(alpha, 0)``.

    Converges when |F| < ``tol`` or, for very large h where that is below
    the floating-point resolution of F, when the step stalls at machine
    precision. Raises :class:`ConvergenceError` otherwise.
    """
    alpha = float(alpha_guess)
    F, dF = alpha_residual(alpha, h, gamma, model)
    for it in range(1, max_iter + 1):
        if abs(F) < tol:
            return AlphaSolution(alpha, it - 1, abs(F))
        if abs(dF) < 1e-12:
            raise ConvergenceError("flat derivative in alpha solve", it, abs(F))
        step = F / dF
        alpha -= step
        F, dF = alpha_residual(alpha, h, gamma, model)
        floor = 8 * np.finfo(float).eps * (abs(h) + abs(F) + 1.0)
        if abs(F) < tol or (abs(step) < 4 * np.finfo(float).eps * max(1.0, abs(alpha)) and abs(F) < floor):
            return AlphaSolution(alpha, it, abs(F))
    raise ConvergenceError(f"alpha solve did not converge (|F|={abs(F):.3g})", max_iter, abs(F))


def solve_alpha_robust(h, gamma, alpha_guess, model, tol=NEWTON_TOL):
    """Newton with a bracketing fallback on alpha_guess +- 30 degrees.

    Raises :class:`StallError` when no sign change exists in the bracket,
    which is the signature of a demanded lift the wing cannot produce.
    """
    try:
        sol = solve_alpha(h, gamma, alpha_guess, model, tol)
        if abs(sol.alpha - alpha_guess) <= np.pi / 2:
            return sol
    except ConvergenceError:
        pass
    grid = alpha_guess + np.linspace(-FALLBACK_HALF_WIDTH, FALLBACK_HALF_WIDTH, 61)
    vals = np.array([alpha_residual(a, h, gamma, model)[0] for a in grid])
    order = np.argsort(np.abs(grid - alpha_guess))
    for k in order:
        for lo, hi in ((k - 1, k), (k, k + 1)):
            if 0 <= lo and hi < len(grid) and vals[lo] * vals[hi] <= 0:
                a = brentq(lambda x: alpha_residual(x, h, gamma, model)[0], grid[lo], grid[hi],
                           xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
                sol = solve_alpha(h, gamma, a, model, tol)
                return AlphaSolution(sol.alpha, sol.iterations, sol.residual, bracketed=True)
    best = grid[int(np.argmin(np.abs(vals)))]
    raise StallError(
        f"no angle-of-attack root within 30 deg of {np.degrees(alpha_guess):.1f} deg "
        f"(min |F| = {np.min(np.abs(vals)):.3g} at {np.degrees(best):.1f} deg)",
        iterations=None, residual=float(np.min(np.abs(vals))),
    )


def body_axes(v_a, y_b, alpha):
    """R = [x_b y_b z_b] with x_b rotated from the airspeed by alpha about y_b."""
    vh = v_a / norm3(v_a)
    x_b = vh * np.cos(alpha) + cross(y_b, vh) * np.sin(alpha)
    z_b = cross(x_b, y_b)
    return np.column_stack([x_b, y_b, z_b])


def _hover_axes(a_minus_g, y_b_prev):
    na = norm3(a_minus_g)
    if na < 1e-9:
        raise NearSingularityError("zero specific force: attitude undefined in free fall")
    x_b = a_minus_g / na
    y = y_b_prev - (y_b_prev @ x_b) * x_b
    if norm3(y) < 1e-9:
        raise NearSingularityError("lateral memory parallel to thrust axis")
    y_b = y / norm3(y)
    return np.column_stack([x_b, y_b, cross(x_b, y_b)])


def flat_to_state(sample, memory, params, model):
    """Attitude, angle of attack and thrust for one flat sample.

    Returns a :class:`FlatnessResult` with zero rates (fill them with
    :func:`flat_to_rates` and :func:`flat_to_torque`). ``memory`` is not
    modified; the new lateral axis is reported in ``y_b_prev``.
    """
    g = params.gravity
    a_mg = sample.a - g
    v_a = sample.v - sample.wind
    V = norm3(v_a)
    if V < V_EPS:
        R = _hover_axes(a_mg, memory.y_b_prev)
        a_T = norm3(a_mg)
        return FlatnessResult(
            VehicleState(sample.p, sample.v, R, np.zeros(3)), FullInput(params.mass * a_T),
            a_T, 0.0, np.zeros(3), memory.alpha_prev, 0.5 * np.pi, np.inf, 1.0, R[:, 1].copy(),
            hover=True, t=sample.t,
        )
    y_b, r = lateral_axis(v_a, a_mg, memory.y_b_prev)
    gamma = flight_path_angle(v_a, a_mg, r)
    h = lift_ratio(a_mg, V, params)
    sol = solve_alpha_robust(h, gamma, memory.alpha_prev, model)
    R = body_axes(v_a, y_b, sol.alpha)
    c = model.coefficients(sol.alpha, 0.0)
    f_a = params.qbar_factor * V * V * c.C
    a_T = float(R[:, 0] @ a_mg - f_a[0] / params.mass)
    a_T_cos = norm3(a_mg) * math.cos(gamma - sol.alpha) - float(f_a[0]) / params.mass
    if abs(a_T - a_T_cos) > 1e-8 * max(1.0, norm3(a_mg)) + 1e-8 * abs(a_T_cos):
        raise ArithmeticError(f"thrust forms disagree: {a_T} vs {a_T_cos}")
    force_res = float(R[:, 2] @ a_mg - f_a[2] / params.mass)
    return FlatnessResult(
        VehicleState(sample.p, sample.v, R, np.zeros(3)), FullInput(params.mass * a_T),
        a_T, 0.0, np.zeros(3), sol.alpha, gamma, h, r, y_b,
        iterations=sol.iterations, residual=sol.residual, force_residual=force_res, t=sample.t,
        parallel=norm3(cross(v_a, a_mg)) < PARALLEL_EPS,
    )


# ---------------------------------------------------------------------------
# rates and torque


@dataclass
class _RateSystem:
    N: np.ndarray
    rhs: np.ndarray
    v_b: np.ndarray
    v_a_dot: np.ndarray
    f_a: np.ndarray
    dfa: np.ndarray
    B: np.ndarray
    coeffs: object
    N_inv: np.ndarray = None


def _rate_system(sample, base, params, model):
    m = params.mass
    R = base.R
    v_a_dot = sample.a - sample.wind_dot
    flow = airflow(R, sample.v, sample.wind)
    c = model.coefficients(base.alpha, 0.0)
    v_b = flow.v_air_body
    f_a = params.qbar_factor * flow.speed**2 * c.C
    dfa = dfa_dvab(flow, params, model, c)
    B = -hat(base.a_T * E1 + f_a / m) + dfa @ hat(v_b) / m
    N = np.zeros((4, 4))
    N[0, 1:] = -cross(E2, v_b)
    N[1:, 0] = R[:, 0]
    N[1:, 1:] = R @ B
    rhs = np.concatenate([[R[:, 1] @ v_a_dot], sample.j - R @ dfa @ R.T @ v_a_dot / m])
    # with airspeed parallel to the specific force the roll about the airspeed
    # drops out of N; the minimum-norm solution keeps that roll rate at zero
    N_inv = np.linalg.pinv(N, rcond=1e-10) if base.parallel else _checked_inverse(N)
    return _RateSystem(N, rhs, v_b, v_a_dot, f_a, dfa, B, c, N_inv)


def _checked_inverse(N):
    """Inverse of the 4x4 rate matrix; both rate solves reuse it."""
    try:
        N_inv = np.linalg.inv(N)
    except np.linalg.LinAlgError:
        raise NearSingularityError("flatness N-matrix is singular") from None
    cond = np.abs(N).sum(axis=0).max() * np.abs(N_inv).sum(axis=0).max()
    if not np.isfinite(cond) or cond > N_COND_MAX:
        raise NearSingularityError(f"flatness N-matrix condition number {cond:.3g}")
    return N_inv


def flat_to_rates(sample, base, params, model, _sys=None):
    """Body rate and thrust-acceleration rate: returns ``(omega, a_T_dot)``."""
    if base.hover:
        omega, a_T_dot, _, _ = _hover_rates(sample, base)
        return omega, a_T_dot
    sys = _sys or _rate_system(sample, base, params, model)
    x = sys.N_inv @ sys.rhs
    return x[1:], float(x[0])


def flat_to_torque(sample, base, rates, params, model, _sys=None):
    """Angular acceleration, torque and thrust: returns ``(omega_dot, tau, f)``.

    Differentiates the rate system once more; this needs snap and the
    second partials of the coefficient model.
    """
    omega, a_T_dot = rates
    J = params.inertia
    m = params.mass
    if base.hover:
        _, _, omega_dot, _ = _hover_rates(sample, base)
        tau = J @ omega_dot + cross(omega, J @ omega)
        return omega_dot, tau, m * base.a_T
    R = base.R
    sys = _sys or _rate_system(sample, base, params, model)
    c = sys.coeffs
    k = params.qbar_factor
    v_b, v_a_dot, dfa = sys.v_b, sys.v_a_dot, sys.dfa
    W = hat(omega)
    V = norm3(v_b)

    v_b_dot = hat(v_b) @ omega + R.T @ v_a_dot
    alpha_dot = (v_b_dot[2] * v_b[0] - v_b[2] * v_b_dot[0]) / (v_b[0] ** 2 + v_b[2] ** 2)
    V_dot = float(v_b @ v_b_dot) / V
    f_a_dot = dfa @ v_b_dot
    he2 = hat(E2)
    dfa_dot = k * (
        2.0 * alpha_dot * np.outer(c.dC_dalpha, v_b)
        + 2.0 * np.outer(c.C, v_b_dot)
        + alpha_dot * np.outer(c.d2C_dalpha2, v_b @ he2)
        + np.outer(c.dC_dalpha, v_b_dot @ he2)
        + V_dot * np.outer(c.dC_dbeta, E2)
        + V * alpha_dot * np.outer(c.d2C_dbeta_dalpha, E2)
    )
    B_dot = -hat(a_T_dot * E1 + f_a_dot / m) + (dfa_dot @ hat(v_b) + dfa @ hat(v_b_dot)) / m

    N_dot = np.zeros((4, 4))
    N_dot[0, 1:] = -cross(E2, v_b_dot)
    N_dot[1:, 0] = R @ W @ E1
    N_dot[1:, 1:] = R @ W @ sys.B + R @ B_dot

    v_a_ddot = sample.j - sample.wind_ddot
    u = R.T @ v_a_dot
    u_dot = -W @ u + R.T @ v_a_ddot
    rhs_dot = np.concatenate([
        [R[:, 1] @ v_a_ddot - E2 @ W @ u],
        sample.s - (R @ W @ dfa @ u + R @ dfa_dot @ u + R @ dfa @ u_dot) / m,
    ])
    x = np.concatenate([[a_T_dot], omega])
    y = sys.N_inv @ (rhs_dot - N_dot @ x)
    omega_dot = y[1:]

    flow = airflow(R, sample.v, sample.wind)
    M_a = aero_moment_body(flow, params, model, c)
    tau = J @ omega_dot - M_a + cross(omega, J @ omega)
    return omega_dot, tau, m * base.a_T


def _hover_rates(sample, base):
    """Quadrotor-style rates when the airspeed is too small for the wing model."""
    R, a_T = base.R, base.a_T
    x_b, y_b, z_b = R.T
    j, s = sample.j, sample.s
    a_T_dot = float(x_b @ j)
    omega = np.array([0.0, -(z_b @ j) / a_T, (y_b @ j) / a_T])
    wx1 = R @ cross(omega, E1)
    rest = s - 2.0 * a_T_dot * wx1 - a_T * (R @ cross(omega, cross(omega, E1)))
    omega_dot = np.array([0.0, -(z_b @ rest) / a_T, (y_b @ rest) / a_T])
    return omega, a_T_dot, omega_dot, float(x_b @ rest)


# ---------------------------------------------------------------------------
# full map and sweeps


def flatness_map(sample, memory, params, model, update_memory=True):
    """State, rates, torque and thrust for one sample.

    With ``update_memory`` the lateral-axis and warm-start memory advance
    to this sample, which is how sequential sweeps keep sign continuity.
    """
    base = flat_to_state(sample, memory, params, model)
    sys = None if base.hover else _rate_system(sample, base, params, model)
    omega, a_T_dot = flat_to_rates(sample, base, params, model, sys)
    omega_dot, tau, f = flat_to_torque(sample, base, (omega, a_T_dot), params, model, sys)
    state = VehicleState(base.state.p, base.state.v, base.state.R, omega)
    out = replace(base, state=state, input=FullInput(f, tau), a_T_dot=a_T_dot, omega_dot=omega_dot)
    if update_memory:
        memory.y_b_prev = out.y_b_prev.copy()
        if not out.hover:
            memory.alpha_prev = out.alpha
    return out


def initial_memory(traj, wind=None, gravity=None):
    """Memory for the start of ``traj``.

    The lateral axis is e3 x (horizontal direction of the first motion), so
    that pitching forward from a nose-up hover keeps the belly down. With
    no horizontal motion the world y axis is used. The angle-of-attack
    guess is the angle between the initial airspeed and specific force,
    which is 90 degrees for any level departure from rest and 0 for a
    straight vertical climb; without airspeed it is 90 degrees.
    """
    pts = np.vstack([traj.start[0], traj.waypoints, traj.goal[0]])
    if wind is None:
        w0 = np.zeros(3)
    else:
        w0 = np.asarray(wind(0.0)[0] if callable(wind) else wind, dtype=float)
    g = np.array([0.0, 0.0, 9.8]) if gravity is None else np.asarray(gravity, dtype=float)
    v0 = traj.evaluate(0.0, 1) - w0
    f0 = traj.evaluate(0.0, 2) - g
    alpha0 = 0.5 * np.pi
    if norm3(v0) >= V_EPS and norm3(f0) > 0:
        alpha0 = float(np.arctan2(norm3(cross(v0, f0)), v0 @ f0))
    candidates = [v0] + [p - pts[0] for p in pts[1:]]
    for d in candidates:
        yb = cross([0.0, 0.0, 1.0], d)
        if norm3(yb) > 1e-6:
            return FlatnessMemory(yb / norm3(yb), alpha0)
    return FlatnessMemory(E2.copy(), alpha0)


@dataclass
class SweepResult:
    times: np.ndarray
    results: list
    stall_times: list

    @property
    def max_iterations(self):
        return max((r.iterations for r in self.results), default=0)

    @property
    def max_residual(self):
        return max((r.residual for r in self.results), default=0.0)


def sweep(traj, times, params, model, wind=None, memory=None, on_stall="warn"):
    """Evaluate the flat map sequentially at ``times`` with warm starts.

    Stalled samples (no angle-of-attack root near the warm start) raise
    when ``on_stall == "raise"``; otherwise a :class:`StallWarning` names
    the timestamp and the sample keeps the previous angle of attack.
    """
    memory = initial_memory(traj, wind, params.gravity) if memory is None else memory
    results, stalls = [], []
    for t in times:
        sample = FlatSample.from_trajectory(traj, float(t), wind)
        try:
            results.append(flatness_map(sample, memory, params, model))
        except StallError as exc:
            if on_stall == "raise":
                raise
            warnings.warn(f"t={t:.3f} s: {exc}", StallWarning, stacklevel=2)
            stalls.append(float(t))
            results.append(_stalled_result(sample, memory, params, model))
    return SweepResult(np.asarray(times, dtype=float), results, stalls)


def _stalled_result(sample, memory, params, model):
    """Best-effort attitude at the previous alpha, flagged as stalled."""
    v_a = sample.v - sample.wind
    a_mg = sample.a - params.gravity
    y_b, r = lateral_axis(v_a, a_mg, memory.y_b_prev)
    R = body_axes(v_a, y_b, memory.alpha_prev)
    a_T = float(R[:, 0] @ a_mg)
    memory.y_b_prev = y_b
    return FlatnessResult(
        VehicleState(sample.p, sample.v, R, np.zeros(3)), FullInput(params.mass * a_T),
        a_T, 0.0, np.zeros(3), memory.alpha_prev, flight_path_angle(v_a, a_mg, r),
        lift_ratio(a_mg, np.linalg.norm(v_a), params), r, y_b, stalled=True, t=sample.t,
    )


class FlatInputSchedule:
    """Callable t -> FullInput from the flat map, for open-loop simulation.

    Calls must come in non-decreasing time order (as RK4 stage times do)
    so the warm-start memory stays valid.
    """

    def __init__(self, traj, params, model, wind=None, memory=None):
        self.traj, self.params, self.model, self.wind = traj, params, model, wind
        self.memory = initial_memory(traj, wind, params.gravity) if memory is None else memory
        self._cache = {}

    def result(self, t):
        # RK4 asks for the midpoint twice and the step end again as the next
        # step start; rounding the key absorbs the last-bit drift of t + dt
        key = round(float(t), 12)
        if key not in self._cache:
            t_eval = min(max(key, 0.0), self.traj.duration)
            sample = FlatSample.from_trajectory(self.traj, t_eval, self.wind)
            res = flatness_map(sample, self.memory, self.params, self.model)
            self._cache = {k: v for k, v in self._cache.items() if k > key - 1e-6}
            self._cache[key] = res
        return self._cache[key]

    def __call__(self, t):
        return self.result(t).input


# ---------------------------------------------------------------------------
# trim


def trim_speed(alpha, params, model):
    """Level-flight airspeed at angle of attack ``alpha`` (closed form).

    In level flight gamma = 90 deg, so the force balance reads
    h cos(alpha) = -Cz(alpha); solve h for V.
    """
    cz, _ = model.cz_and_slope(alpha)
    if cz >= 0 or np.cos(alpha) <= 0:
        raise ValueError(f"no level-flight trim at alpha = {np.degrees(alpha):.2f} deg")
    g = float(np.linalg.norm(params.gravity))
    return float(np.sqrt(params.mass * g * np.cos(alpha) / (params.qbar_factor * -cz)))


def level_flight_sample(V, heading=0.0, altitude=0.0, wind=None):
    """Flat sample for steady straight level flight at ground speed V."""
    d = np.array([np.cos(heading), np.sin(heading), 0.0])
    z = np.zeros(3)
    w = z if wind is None else np.asarray(wind, dtype=float)
    return FlatSample(np.array([0.0, 0.0, -altitude]), V * d, z, z, z, w)
