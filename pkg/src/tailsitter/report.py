"""PNG figures for plan, track and compare runs (matplotlib, Agg backend)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import REFERENCE_COLUMNS, TRACKING_COLUMNS  # noqa: E402

_STYLE = {"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "font.size": 9}


def _col(rows, columns, name):
    return rows[:, columns.index(name)]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png")
    plt.close(fig)
    return Path(path)


def plan_figures(reference, out_dir):
    """Side view, speed, angle of attack, thrust and body rates of a reference."""
    out_dir = Path(out_dir)
    c = list(REFERENCE_COLUMNS)
    t = _col(reference, c, "t")
    p = reference[:, 1:4]
    v = reference[:, 4:7]
    paths = []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
        ax[0].plot(p[:, 0], -p[:, 2])
        ax[0].set_xlabel("north (m)")
        ax[0].set_ylabel("altitude (m)")
        ax[0].set_aspect("equal", adjustable="datalim")
        ax[1].plot(p[:, 0], p[:, 1])
        ax[1].set_xlabel("north (m)")
        ax[1].set_ylabel("east (m)")
        ax[1].set_aspect("equal", adjustable="datalim")
        paths.append(_save(fig, out_dir / "plan_path.png"))

        fig, ax = plt.subplots(4, 1, figsize=(7, 8), sharex=True)
        ax[0].plot(t, np.linalg.norm(v, axis=1))
        ax[0].set_ylabel("speed (m/s)")
        ax[1].plot(t, _col(reference, c, "alpha_deg"))
        ax[1].set_ylabel("alpha (deg)")
        ax[2].plot(t, _col(reference, c, "f"))
        ax[2].set_ylabel("thrust (N)")
        for name in ("omegax", "omegay", "omegaz"):
            ax[3].plot(t, np.degrees(_col(reference, c, name)), label=name[-1])
        ax[3].set_ylabel("body rate (deg/s)")
        ax[3].set_xlabel("t (s)")
        ax[3].legend(loc="best")
        paths.append(_save(fig, out_dir / "plan_states.png"))
    return paths


def track_figures(rows, out_dir):
    """Reference versus flown path and the error histories."""
    out_dir = Path(out_dir)
    c = list(TRACKING_COLUMNS)
    t = _col(rows, c, "t")
    paths = []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(_col(rows, c, "ref_px"), -_col(rows, c, "ref_pz"), label="reference")
        ax.plot(_col(rows, c, "px"), -_col(rows, c, "pz"), "--", label="flown")
        ax.set_xlabel("north (m)")
        ax.set_ylabel("altitude (m)")
        ax.legend(loc="best")
        paths.append(_save(fig, out_dir / "track_path.png"))

        fig, ax = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
        ax[0].plot(t, _col(rows, c, "err_pos"))
        ax[0].set_ylabel("position error (m)")
        ax[1].plot(t, _col(rows, c, "err_att_deg"))
        ax[1].set_ylabel("attitude error (deg)")
        ax[2].plot(t, _col(rows, c, "cmd_aT"), label="commanded")
        ax[2].plot(t, _col(rows, c, "ref_aT"), "--", label="reference")
        ax[2].set_ylabel("thrust accel (m/s^2)")
        ax[2].set_xlabel("t (s)")
        ax[2].legend(loc="best")
        paths.append(_save(fig, out_dir / "track_errors.png"))
    return paths


def compare_figures(traces, out_dir):
    """Paths, speeds and yaw rates of the compared methods.

    ``traces`` maps a method name to an array with columns
    (t, x, y, speed, yaw_rate).
    """
    out_dir = Path(out_dir)
    paths = []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 5))
        for name, tr in traces.items():
            ax.plot(tr[:, 1], tr[:, 2], label=name)
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best")
        paths.append(_save(fig, out_dir / "compare_paths.png"))

        fig, ax = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
        for name, tr in traces.items():
            ax[0].plot(tr[:, 0], tr[:, 3], label=name)
            ax[1].plot(tr[:, 0], np.degrees(tr[:, 4]), label=name)
        ax[0].set_ylabel("speed (m/s)")
        ax[1].set_ylabel("yaw rate (deg/s)")
        ax[1].set_xlabel("t (s)")
        ax[0].legend(loc="best")
        paths.append(_save(fig, out_dir / "compare_rates.png"))
    return paths
