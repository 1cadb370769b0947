"""Scenario runs behind the command-line verbs.

Each ``run_*`` function takes a validated :class:`~tailsitter.scenario.Scenario`
and an output directory, writes its artifacts there and returns a summary
dict. Failures raise :class:`PlannerFailure` or
:class:`~tailsitter.errors.DivergenceError`; partial artifacts are written
before raising.
"""

import hashlib
import json
import warnings
from pathlib import Path

import numpy as np

from . import baselines as bl
from .errors import ConditioningError, ConvergenceError, DivergenceError, StallWarning, ValidationError
from .flatness import trim_speed
from .io import (REFERENCE_COLUMNS, TRACKING_COLUMNS, read_csv, read_json, reference_rows, tracking_metrics,
                 tracking_rows, write_csv, write_json, write_trajectory)
from .mpc import ReferencePoint, ReferenceTrack, initial_state_from, track
from .planner import plan, plan_summary
from .so3 import quaternion_to_rotation

#: yaw-rate change per unit time above which consecutive samples count as a jump (rad/s^2)
JUMP_RATE = 5.0


class PlannerFailure(RuntimeError):
    """Planning produced no usable reference; ``diagnostics`` says why."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def scenario_digest(scenario):
    """Hash of the planning inputs, used to tell whether a saved plan is stale."""
    payload = {
        "start": scenario.start.tolist(),
        "goal": scenario.goal.tolist(),
        "waypoints": scenario.waypoints.tolist(),
        "optimizer": repr(scenario.optimizer),
        "rate_hz": scenario.rate_hz,
        "wind": repr(scenario.wind),
        "params": repr(scenario.params),
        "model": repr(scenario.model),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _plan(scenario, start=None, goal=None, speed_floor=None):
    kw = {} if speed_floor is None else {"speed_floor": speed_floor}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StallWarning)
        try:
            return plan(scenario.start if start is None else start, scenario.goal if goal is None else goal,
                        scenario.waypoints, scenario.optimizer, scenario.params, scenario.model,
                        scenario.wind.for_planner(), scenario.rate_hz, on_stall="warn", **kw)
        except (ConditioningError, ConvergenceError) as exc:
            raise PlannerFailure(f"planning failed: {exc}", {"error": str(exc)}) from exc


def run_plan(scenario, out_dir, figures=True):
    """Plan, sweep the flat map and write trajectory.json, reference.csv, plan.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = _plan(scenario)
    summary = plan_summary(res, scenario.optimizer.samples)
    summary["scenario"] = scenario.name
    summary["digest"] = scenario_digest(scenario)
    write_trajectory(out / "trajectory.json", res.trajectory)
    rows = reference_rows(res, scenario.wind.for_planner())
    write_csv(out / "reference.csv", REFERENCE_COLUMNS, rows)
    if res.stall_times:
        summary["status"] = "stall"
        write_json(out / "plan.json", summary)
        raise PlannerFailure(f"alpha solve failed at {len(res.stall_times)} samples", summary)
    summary["status"] = "ok"
    if figures:
        from .report import plan_figures

        summary["figures"] = [p.name for p in plan_figures(rows, out)]
    write_json(out / "plan.json", summary)
    return summary


def reference_track_from_rows(rows, wind=None):
    """Rebuild the controller reference from reference-CSV rows."""
    c = list(REFERENCE_COLUMNS)
    iq, iw, ia = c.index("qw"), c.index("omegax"), c.index("aT")
    pts = []
    for r in rows:
        t = r[0]
        if wind is None:
            w = np.zeros(3)
        else:
            w = np.asarray(wind(t)[0] if callable(wind) else wind, dtype=float)
        pts.append(ReferencePoint(r[1:4].copy(), r[4:7].copy(), quaternion_to_rotation(r[iq:iq + 4]), float(r[ia]),
                                  r[iw:iw + 3].copy(), w, float(t)))
    return ReferenceTrack(rows[:, 0], pts)


def _load_or_plan(scenario, out, figures):
    plan_file, ref_file = out / "plan.json", out / "reference.csv"
    if plan_file.is_file() and ref_file.is_file():
        saved = read_json(plan_file)
        if saved.get("digest") == scenario_digest(scenario) and saved.get("status") == "ok":
            return read_csv(ref_file)[1]
    run_plan(scenario, out, figures)
    return read_csv(ref_file)[1]


def run_track(scenario, out_dir, figures=True):
    """Track the saved (or freshly planned) reference; writes tracking.csv and metrics.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reference = _load_or_plan(scenario, out, figures)
    ref_track = reference_track_from_rows(reference, scenario.wind.for_planner())
    sim = scenario.simulation
    t_end = min(ref_track.duration + sim.tail, sim.duration_cap)
    t_end = max(t_end, scenario.mpc.dt)
    x0 = initial_state_from(ref_track.at(0.0))
    diverged = None
    try:
        log = track(ref_track, x0, scenario.params, scenario.model, scenario.mpc, scenario.pid, sim.dt, t_end,
                    scenario.plant_wind.for_plant())
    except DivergenceError as exc:
        diverged, log = exc, exc.log
    rows = tracking_rows(log, reference)
    write_csv(out / "tracking.csv", TRACKING_COLUMNS, rows)
    metrics = tracking_metrics(log, reference, diverged is not None)
    metrics["scenario"] = scenario.name
    if diverged is None and figures:
        from .report import track_figures

        metrics["figures"] = [p.name for p in track_figures(rows, out)]
    write_json(out / "metrics.json", metrics)
    if diverged is not None:
        raise diverged
    return metrics


# ---------------------------------------------------------------------------
# comparison with the fixed-wing baselines


def yaw_rate_jumps(times, rates, jump_rate=JUMP_RATE):
    """Times at which a sampled rate changes faster than ``jump_rate`` per second."""
    dt = np.diff(times)
    ok = dt > 0
    slope = np.zeros_like(dt)
    slope[ok] = np.abs(np.diff(rates))[ok] / dt[ok]
    return times[1:][slope > jump_rate]


def baseline_speed(scenario):
    cfg = scenario.baselines
    if cfg.speed is not None:
        return cfg.speed
    return trim_speed(cfg.cruise_alpha, scenario.params, scenario.model)


def _cruise_boundaries(scenario, V):
    """Boundary states for the comparison: zero velocity becomes cruise along the chord."""
    start, goal = scenario.start.copy(), scenario.goal.copy()
    pts = np.vstack([start[0], scenario.waypoints, goal[0]])
    for bnd, d in ((start, pts[1] - pts[0]), (goal, pts[-1] - pts[-2])):
        if not np.any(bnd[1]):
            h = np.array([d[0], d[1], 0.0])
            if np.linalg.norm(h) > 0:
                bnd[1] = V * h / np.linalg.norm(h)
    return start, goal


def compare_methods(scenario):
    """Fly the proposed planner, L1 guidance and Dubins paths over the same waypoints.

    Returns (summary dict, traces dict of arrays with columns
    t, x, y, speed, yaw_rate).
    """
    if not scenario.is_planar:
        raise ValidationError("waypoints", "comparison needs a planar scenario (constant altitude)")
    cfg = scenario.baselines
    V = baseline_speed(scenario)
    if V > scenario.optimizer.v_max * (1 + 1e-9):
        raise ValidationError("baselines.speed", f"baseline speed {V:.3f} m/s exceeds planner.v_max")
    start, goal = _cruise_boundaries(scenario, V)
    res = _plan(scenario, start, goal, speed_floor=0.0)
    if res.stall_times:
        raise PlannerFailure(f"alpha solve failed at {len(res.stall_times)} samples",
                             {"stall_times_s": res.stall_times})
    traj = res.trajectory
    pts = np.vstack([start[0], scenario.waypoints, goal[0]])[:, :2]

    t = res.times
    v = traj.sample(t, 1)[:, :2]
    a = traj.sample(t, 2)[:, :2]
    speed = np.linalg.norm(v, axis=1)
    psi_dot = (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / np.maximum(speed**2, 1e-12)
    pos = traj.sample(t, 0)[:, :2]
    omega = np.array([r.omega for r in res.reference])
    traces = {"proposed": np.column_stack([t, pos, speed, psi_dot])}
    omega_jumps = yaw_rate_jumps(t, np.linalg.norm(omega, axis=1))
    omega_jumps = np.union1d(omega_jumps, np.concatenate([yaw_rate_jumps(t, omega[:, i]) for i in range(3)]))
    methods = {
        "proposed": {
            "duration_s": traj.duration,
            "path_length_m": float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1))),
            "max_speed_mps": float(np.max(speed)),
            "yaw_rate_jumps": int(len(yaw_rate_jumps(t, psi_dot))),
            "body_rate_jumps": int(len(omega_jumps)),
        }
    }

    heading0 = np.arctan2(start[1, 1], start[1, 0])
    heading1 = np.arctan2(goal[1, 1], goal[1, 0])
    if cfg.l1:
        tr = bl.fly_l1(pts, V, cfg.l1_distance, cfg.acceptance_radius, cfg.dt,
                       start=bl.PlanarPose(*pts[0], heading0))
        traces["l1"] = np.column_stack([tr.times, tr.poses[:, :2], np.full(len(tr.times), V), tr.yaw_rates])
        jumps = yaw_rate_jumps(tr.times, tr.yaw_rates)
        methods["l1"] = {
            "duration_s": tr.duration,
            "path_length_m": V * tr.duration,
            "max_speed_mps": V,
            "yaw_rate_jumps": int(len(jumps)),
            "switch_times_s": [float(x) for x in tr.events],
        }
    if cfg.dubins:
        hd = bl.waypoint_headings(pts, heading0, heading1)
        chain = bl.dubins_chain(pts, cfg.turn_radius, hd)
        tr = bl.fly_dubins(chain, V, cfg.dt)
        traces["dubins"] = np.column_stack([tr.times, tr.poses[:, :2], np.full(len(tr.times), V), tr.yaw_rates])
        length = sum(p.length for p in chain)
        methods["dubins"] = {
            "duration_s": length / V,
            "path_length_m": length,
            "max_speed_mps": V,
            "yaw_rate_jumps": int(len(yaw_rate_jumps(tr.times, tr.yaw_rates))),
            "words": [p.word for p in chain],
            "switch_times_s": [float(x) for x in tr.events],
        }
    others = [m["duration_s"] for k, m in methods.items() if k != "proposed"]
    summary = {
        "scenario": scenario.name,
        "baseline_speed_mps": V,
        "v_max_mps": scenario.optimizer.v_max,
        "turn_radius_m": cfg.turn_radius,
        "jump_rate_threshold": JUMP_RATE,
        "methods": methods,
        "proposed_fastest": bool(all(methods["proposed"]["duration_s"] <= d for d in others)),
    }
    return summary, traces


def run_compare(scenario, out_dir, figures=True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary, traces = compare_methods(scenario)
    for name, tr in traces.items():
        write_csv(out / f"compare_{name}.csv", ["t", "x", "y", "speed", "yaw_rate"], tr)
    if figures:
        from .report import compare_figures

        summary["figures"] = [p.name for p in compare_figures(traces, out)]
    write_json(out / "comparison.json", summary)
    return summary
