"""Segment-duration optimisation for minimum-snap trajectories.

The durations are parameterised as ``T = exp(q)`` so the search is
unconstrained. The objective is a weighted total time plus a cubic penalty
on sampled speeds above ``v_max``; its gradient flows through the MINCO
solve with a single adjoint solve per evaluation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import lbfgs
from .errors import ConditioningError, DomainError
from .minco import basis, snap_gram, snap_gram_dT, solve_trajectory

#: lower bound on every segment duration (s)
T_FLOOR = 0.01
Q_FLOOR = float(np.log(T_FLOOR))


@dataclass
class OptimizerConfig:
    """Weights and solver settings for duration optimisation.

    ``time_weights`` of None means b_i = 1 for every segment.
    """

    v_max: float = 10.0
    time_weights: np.ndarray = None
    penalty_weight: float = 1e4
    samples: int = 16
    memory: int = 8
    tolerance: float = None
    max_iterations: int = 200
    snap_weight: float = 0.0

    def __post_init__(self):
        if not self.v_max > 0:
            raise DomainError("v_max must be positive")
        if not self.penalty_weight > 0:
            raise DomainError("penalty weight must be positive")
        if self.samples < 4:
            raise DomainError("need at least 4 samples per segment")
        if self.snap_weight < 0:
            raise DomainError("snap weight must be non-negative")
        if self.time_weights is not None:
            self.time_weights = np.asarray(self.time_weights, dtype=float)
            if np.any(self.time_weights < 0) or not self.time_weights[-1] > 0:
                raise DomainError("time weights must be non-negative with b_M > 0")

    def weights(self, M):
        if self.time_weights is None:
            return np.ones(M)
        if len(self.time_weights) != M:
            raise DomainError(f"expected {M} time weights, got {len(self.time_weights)}")
        return self.time_weights


@dataclass
class TimeProblem:
    """Fixed data of a duration-allocation problem."""

    start: np.ndarray
    goal: np.ndarray
    waypoints: np.ndarray
    config: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(4, 3)
        self.goal = np.asarray(self.goal, dtype=float).reshape(4, 3)
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 3)

    @property
    def M(self):
        return len(self.waypoints) + 1

    def points(self):
        return np.vstack([self.start[0], self.waypoints, self.goal[0]])

    def initial_q(self):
        """log(chord / (0.5 v_max)) per segment, floored at the duration floor."""
        chords = np.linalg.norm(np.diff(self.points(), axis=0), axis=1)
        T0 = np.maximum(chords / (0.5 * self.config.v_max), 10 * T_FLOOR)
        return np.log(T0)

    def trajectory(self, T):
        return solve_trajectory(self.start, self.goal, self.waypoints, T)


def sample_times(T_i, N):
    """Relative sample times j T_i / N for j = 1..N."""
    return np.arange(1, N + 1) * (T_i / N)


def speed_penalty(traj, v_max, N, with_coeff_grad=False):
    """Cubic speed-excess penalty and its gradient w.r.t. the durations.

    Returns ``(P, dP_dT)``; with ``with_coeff_grad`` also the partial
    gradient w.r.t. the stacked coefficients (8M x 3), which lets callers
    combine several coefficient-dependent terms into one adjoint solve.
    """
    M = traj.M
    P = 0.0
    grad_c = np.zeros((M, 8, 3))
    explicit = np.zeros(M)
    for i in range(M):
        tau = sample_times(traj.T[i], N)
        B1 = basis(tau, 1)
        vel = B1 @ traj.coeffs[i]
        acc = basis(tau, 2) @ traj.coeffs[i]
        speed = np.linalg.norm(vel, axis=1)
        excess = np.maximum(speed - v_max, 0.0)
        P += float(np.sum(excess**3))
        active = excess > 0
        if not np.any(active):
            continue
        # dP/dV * dV/dvel = 3 e^2 vel / V
        w = (3.0 * excess[active] ** 2 / speed[active])[:, None] * vel[active]
        grad_c[i] += B1[active].T @ w
        frac = np.arange(1, N + 1)[active] / N
        explicit[i] += float(np.sum(frac * np.sum(w * acc[active], axis=1)))
    grad_c = grad_c.reshape(-1, 3)
    if with_coeff_grad:
        return P, explicit, grad_c
    return P, explicit + traj.grad_T_from_grad_c(grad_c)


def snap_energy(traj):
    """Snap integral with its explicit-T partials and coefficient gradient."""
    J = 0.0
    explicit = np.zeros(traj.M)
    grad_c = np.zeros_like(traj.coeffs)
    for i, (c, Ti) in enumerate(zip(traj.coeffs, traj.T)):
        Q = snap_gram(Ti)
        J += float(np.sum(c * (Q @ c)))
        grad_c[i] = 2.0 * Q @ c
        explicit[i] = float(np.sum(c * (snap_gram_dT(Ti) @ c)))
    return J, explicit, grad_c.reshape(-1, 3)


def durations(q):
    """T = exp(q) with q clamped at log of the duration floor."""
    return np.exp(np.maximum(np.asarray(q, dtype=float), Q_FLOOR))


def objective(q, problem, return_traj=False):
    """h(q) = sum b_i T_i + w P (+ snap term) and its gradient in q."""
    q = np.asarray(q, dtype=float)
    cfg = problem.config
    T = durations(q)
    b = cfg.weights(len(T))
    traj = problem.trajectory(T)
    P, explicit, grad_c = speed_penalty(traj, cfg.v_max, cfg.samples, with_coeff_grad=True)
    h = float(b @ T) + cfg.penalty_weight * P
    dT = b + cfg.penalty_weight * explicit
    grad_c = cfg.penalty_weight * grad_c
    if cfg.snap_weight > 0:
        J, ex_j, gc_j = snap_energy(traj)
        h += cfg.snap_weight * J
        dT = dT + cfg.snap_weight * ex_j
        grad_c = grad_c + cfg.snap_weight * gc_j
    if np.any(grad_c):
        dT = dT + traj.grad_T_from_grad_c(grad_c)
    grad = dT * T * (q > Q_FLOOR)
    return (h, grad, traj) if return_traj else (h, grad)


@dataclass
class TimeOptResult:
    q: np.ndarray
    trajectory: object
    value: float
    status: str
    iterations: int
    evaluations: int
    history: list

    @property
    def T(self):
        return self.trajectory.T


def optimize_times(problem, q0=None):
    """Run cautious L-BFGS on :func:`objective` from ``q0``.

    Solver failures inside the line search (ill-conditioned MINCO systems)
    are treated as infinite objective values so the search backs off.
    """
    cfg = problem.config
    q0 = problem.initial_q() if q0 is None else np.asarray(q0, dtype=float)
    if len(q0) != problem.M or not np.all(np.isfinite(q0)):
        raise DomainError("q0 must be a finite vector with one entry per segment")

    def fun(q):
        try:
            return objective(q, problem)
        except ConditioningError:
            return np.inf, np.full(len(q), np.nan)

    res = lbfgs.minimize(
        fun, q0,
        lbfgs.LbfgsConfig(memory=cfg.memory, max_iterations=cfg.max_iterations, tolerance=cfg.tolerance),
    )
    q = np.maximum(res.x, Q_FLOOR)
    traj = problem.trajectory(durations(q))
    return TimeOptResult(q, traj, res.f, res.status, res.iterations, res.evaluations, res.history)


def max_sampled_speed(traj, N):
    """Largest speed over the penalty sample grid (plus t=0)."""
    best = float(np.linalg.norm(traj.evaluate(0.0, 1)))
    for i in range(traj.M):
        vel = basis(sample_times(traj.T[i], N), 1) @ traj.coeffs[i]
        best = max(best, float(np.max(np.linalg.norm(vel, axis=1))))
    return best
