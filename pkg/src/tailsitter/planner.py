"""End-to-end planning: durations, minimum-snap trajectory, flat reference."""

from dataclasses import dataclass, field

import numpy as np

from .aero import AnalyticAeroModel, VehicleParams
from .flatness import initial_memory, sweep
from .timeopt import OptimizerConfig, TimeProblem, max_sampled_speed, optimize_times

#: speed given to boundary states declared at rest (m/s)
ENDPOINT_SPEED_FLOOR = 0.3


@dataclass
class PlanResult:
    trajectory: object
    times: np.ndarray
    reference: list
    status: str
    iterations: int
    stall_times: list = field(default_factory=list)
    start: np.ndarray = None
    goal: np.ndarray = None

    @property
    def duration(self):
        return self.trajectory.duration

    @property
    def ok(self):
        return not self.stall_times


def _horizontal_dir(d):
    h = np.array([d[0], d[1], 0.0])
    if np.linalg.norm(h) > 1e-9:
        return h / np.linalg.norm(h)
    if np.linalg.norm(d) > 1e-9:
        return np.asarray(d, dtype=float) / np.linalg.norm(d)
    return None


def apply_speed_floor(start, goal, waypoints, floor=ENDPOINT_SPEED_FLOOR):
    """Give rest endpoints a small airspeed along the adjacent horizontal chord.

    The wing model needs a defined airflow direction, so a boundary velocity
    that is exactly zero becomes ``floor`` m/s along the horizontal direction
    to the neighbouring point (or along the chord itself when it is
    vertical). Endpoints with no chord at all are left untouched.
    """
    start = np.array(start, dtype=float).reshape(4, 3)
    goal = np.array(goal, dtype=float).reshape(4, 3)
    pts = np.vstack([start[0], np.asarray(waypoints, dtype=float).reshape(-1, 3), goal[0]])
    if floor > 0 and not np.any(start[1]):
        d = _horizontal_dir(pts[1] - pts[0])
        if d is not None:
            start[1] = floor * d
    if floor > 0 and not np.any(goal[1]):
        d = _horizontal_dir(pts[-1] - pts[-2])
        if d is not None:
            goal[1] = floor * d
    return start, goal


def plan(start, goal, waypoints, config=None, params=None, model=None, wind=None,
         rate_hz=100.0, speed_floor=ENDPOINT_SPEED_FLOOR, on_stall="warn"):
    """Optimise durations, then sweep the flat map at ``rate_hz``.

    ``start`` and ``goal`` are 4x3 arrays (position, velocity, acceleration,
    jerk). Stalled samples are reported in ``stall_times``.
    """
    config = config or OptimizerConfig()
    params = params or VehicleParams()
    model = model or AnalyticAeroModel()
    start, goal = apply_speed_floor(start, goal, waypoints, speed_floor)
    problem = TimeProblem(start, goal, waypoints, config)
    opt = optimize_times(problem)
    traj = opt.trajectory
    n = int(np.floor(traj.duration * rate_hz + 1e-9))
    times = np.arange(n + 1) / rate_hz
    if times[-1] < traj.duration - 1e-12:
        times = np.append(times, traj.duration)
    sw = sweep(traj, times, params, model, wind, initial_memory(traj, wind, params.gravity), on_stall)
    return PlanResult(traj, times, sw.results, opt.status, opt.iterations, sw.stall_times, start, goal)


def plan_summary(result, samples):
    """Small dict of headline plan numbers for logs and reports."""
    ref = result.reference
    return {
        "duration_s": result.duration,
        "segments": result.trajectory.M,
        "segment_durations_s": result.trajectory.T.tolist(),
        "optimizer_status": result.status,
        "optimizer_iterations": result.iterations,
        "max_sampled_speed_mps": max_sampled_speed(result.trajectory, samples),
        "max_alpha_deg": float(np.degrees(max(abs(r.alpha) for r in ref))),
        "max_newton_iterations": int(max(r.iterations for r in ref)),
        "max_alpha_residual": float(max(r.residual for r in ref)),
        "peak_thrust_N": float(max(r.input.f for r in ref)),
        "peak_rate_dps": float(np.degrees(max(np.linalg.norm(r.omega) for r in ref))),
        "stall_times_s": list(result.stall_times),
    }
