"""Plain-text artifacts: reference and tracking CSVs, metrics and trajectory JSON.

CSV files have one header line of comma-separated column names followed
by numeric rows written with ``%.12g``. Quaternions are scalar-first
(w, x, y, z) and rotate body vectors into the world frame.
"""

import json
from pathlib import Path

import numpy as np

from .aero import airflow
from .minco import PiecewiseTrajectory
from .so3 import log_map, rotation_to_quaternion

FLOAT_FORMAT = "%.12g"

REFERENCE_COLUMNS = (
    ["t"]
    + [f"p{a}" for a in "xyz"]
    + [f"v{a}" for a in "xyz"]
    + [f"a{a}" for a in "xyz"]
    + ["qw", "qx", "qy", "qz"]
    + [f"omega{a}" for a in "xyz"]
    + ["f"]
    + [f"tau{a}" for a in "xyz"]
    + ["alpha_deg", "beta_deg", "aT"]
)

_ACTUAL_COLUMNS = (
    [f"p{a}" for a in "xyz"]
    + [f"v{a}" for a in "xyz"]
    + ["qw", "qx", "qy", "qz"]
    + [f"omega{a}" for a in "xyz"]
    + ["cmd_aT"]
    + [f"cmd_omega{a}" for a in "xyz"]
    + [f"tau{a}" for a in "xyz"]
)

TRACKING_COLUMNS = (
    ["t"]
    + ["ref_" + c for c in REFERENCE_COLUMNS[1:]]
    + _ACTUAL_COLUMNS
    + ["err_pos", "err_vel", "err_att_deg"]
)


def write_csv(path, columns, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"expected {len(columns)} columns, got {rows.shape[1]}")
    np.savetxt(path, rows.reshape(-1, len(columns)), fmt=FLOAT_FORMAT, delimiter=",",
               header=",".join(columns), comments="")


def read_csv(path):
    """Return (column names, 2-D array)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data.reshape(-1, len(header))


def reference_rows(plan_result, wind=None):
    """One row per flatness sample of a plan, in :data:`REFERENCE_COLUMNS` order."""
    traj = plan_result.trajectory
    rows = []
    for res in plan_result.reference:
        if wind is None:
            w = np.zeros(3)
        else:
            w = np.asarray(wind(res.t)[0] if callable(wind) else wind, dtype=float)
        a = traj.evaluate(res.t, 2)
        s = res.state
        flow = airflow(s.R, s.v, w)
        rows.append(np.concatenate([
            [res.t], s.p, s.v, a, rotation_to_quaternion(s.R), s.omega,
            [res.input.f], res.input.tau,
            [np.degrees(res.alpha), np.degrees(flow.beta), res.a_T],
        ]))
    return np.array(rows)


def tracking_rows(log, reference):
    """Tracking log rows next to the matching reference rows.

    ``reference`` is the array from :func:`reference_rows`; each log time
    picks the reference row the controller saw at that instant.
    """
    ref_t = reference[:, 0]
    rows = []
    n_in = len(log.inputs)
    for k, (t, s, r) in enumerate(zip(log.times, log.states, log.refs)):
        i = int(np.clip(np.searchsorted(ref_t, t - 1e-9), 0, len(ref_t) - 1))
        cmd = log.inputs[k] if k < n_in else np.full(4, np.nan)
        tau = log.torques[k] if k < n_in else np.full(3, np.nan)
        att = np.degrees(np.linalg.norm(log_map(s.R.T @ r.R)))
        rows.append(np.concatenate([
            [t], reference[i, 1:], s.p, s.v, rotation_to_quaternion(s.R), s.omega, cmd, tau,
            [np.linalg.norm(r.p - s.p), np.linalg.norm(r.v - s.v), att],
        ]))
    return np.array(rows)


def tracking_metrics(log, reference, diverged=False):
    """Headline tracking numbers; reference peaks come from the 100 Hz reference."""
    err = log.position_errors
    omega = np.array([s.omega for s in log.states])
    statuses = {}
    for st in log.statuses:
        statuses[st] = statuses.get(st, 0) + 1
    return {
        "duration_s": float(log.times[-1]),
        "max_position_error_m": float(np.max(err)),
        "rms_position_error_m": float(np.sqrt(np.mean(err**2))),
        "final_position_error_m": float(err[-1]),
        "peak_reference_acceleration_mps2": float(np.max(np.linalg.norm(reference[:, 7:10], axis=1))),
        "peak_reference_body_rate_dps": float(np.degrees(np.max(np.linalg.norm(reference[:, 14:17], axis=1)))),
        "peak_body_rate_dps": float(np.degrees(np.max(np.linalg.norm(omega, axis=1)))),
        "input_bound_violations": int(log.bound_violations),
        "qp_status_counts": statuses,
        "diverged": bool(diverged),
    }


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_trajectory(path, traj):
    Path(path).write_text(traj.to_json(indent=1) + "\n")


def read_trajectory(path):
    return PiecewiseTrajectory.from_json(Path(path).read_text())
