"""Scenario documents: JSON in, validated configuration objects out.

Units are SI except angles, which are degrees in the file and radians in
memory. Unknown top-level keys are rejected so typos surface early.

Example::

    {
      "name": "climb",
      "start": {"position": [0, 0, 0]},
      "goal": {"position": [80, 0, -20]},
      "waypoints": [[30, 0, -5], [55, 0, -18]],
      "planner": {"v_max": 8.0},
      "wind": {"constant": [0, 0, 0]}
    }
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aero import AnalyticAeroModel, VehicleParams, load_coefficient_table
from .dynamics import RatePidConfig
from .errors import DomainError, TableParseError, ValidationError
from .mpc import MpcConfig
from .timeopt import OptimizerConfig

_TOP_KEYS = {"name", "vehicle", "start", "goal", "waypoints", "planner", "mpc", "wind",
             "disturbance", "simulation", "baselines"}


@dataclass(frozen=True)
class Gust:
    """One-minus-cosine gust added to the base wind over [t_start, t_start + duration]."""

    t_start: float
    duration: float
    amplitude: np.ndarray

    def rates(self, t):
        s = (t - self.t_start) / self.duration
        if not 0.0 <= s <= 1.0:
            return np.zeros(3), np.zeros(3), np.zeros(3)
        k = 2 * math.pi / self.duration
        a = 0.5 * self.amplitude
        ph = 2 * math.pi * s
        return a * (1 - math.cos(ph)), a * k * math.sin(ph), a * k * k * math.cos(ph)


@dataclass(frozen=True)
class WindProfile:
    """Constant base wind plus an optional gust schedule (NED, m/s)."""

    base: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gusts: tuple = ()

    @property
    def is_constant(self):
        return not self.gusts

    def rates(self, t):
        """Wind and its first two time derivatives at ``t``."""
        w, wd, wdd = self.base.copy(), np.zeros(3), np.zeros(3)
        for g in self.gusts:
            a, b, c = g.rates(t)
            w, wd, wdd = w + a, wd + b, wdd + c
        return w, wd, wdd

    def at(self, t):
        return self.rates(t)[0]

    def __add__(self, other):
        return WindProfile(self.base + other.base, self.gusts + other.gusts)

    def for_planner(self):
        """Constant vector when possible, else the rates callable."""
        return self.base.copy() if self.is_constant else self.rates

    def for_plant(self):
        return self.base.copy() if self.is_constant else self.at


@dataclass
class BaselineConfig:
    l1: bool = True
    dubins: bool = True
    turn_radius: float = 8.0
    l1_distance: float = 10.0
    acceptance_radius: float = 2.0
    speed: float = None
    cruise_alpha: float = math.radians(15.0)
    dt: float = 0.01


@dataclass
class SimulationConfig:
    dt: float = 1e-3
    duration_cap: float = 120.0
    tail: float = 0.0


@dataclass
class Scenario:
    name: str
    params: VehicleParams
    model: object
    start: np.ndarray
    goal: np.ndarray
    waypoints: np.ndarray
    optimizer: OptimizerConfig
    rate_hz: float
    mpc: MpcConfig
    pid: RatePidConfig
    wind: WindProfile
    disturbance: WindProfile
    simulation: SimulationConfig
    baselines: BaselineConfig
    source: Path = None

    @property
    def plant_wind(self):
        return self.wind + self.disturbance

    @property
    def is_planar(self):
        z = np.concatenate([[self.start[0, 2], self.goal[0, 2]], self.waypoints[:, 2]])
        return bool(np.ptp(z) < 1e-9 and abs(self.start[1, 2]) < 1e-12 and abs(self.goal[1, 2]) < 1e-12)


# ---------------------------------------------------------------------------
# field helpers


def _vec(obj, key, path, n=3, default=None):
    if key not in obj:
        if default is None:
            raise ValidationError(path, "missing")
        return np.array(default, dtype=float)
    try:
        v = np.array(obj[key], dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(path, "must be numeric") from None
    if v.shape != (n,):
        raise ValidationError(path, f"must have {n} components")
    if not np.all(np.isfinite(v)):
        raise ValidationError(path, "must be finite")
    return v


def _num(obj, key, path, default, positive=False, nonnegative=False, integer=False):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(path, "must be a number")
    if integer and int(v) != v:
        raise ValidationError(path, "must be an integer")
    if not math.isfinite(v):
        raise ValidationError(path, "must be finite")
    if positive and not v > 0:
        raise ValidationError(path, "must be positive")
    if nonnegative and v < 0:
        raise ValidationError(path, "must be non-negative")
    return int(v) if integer else float(v)


def _bool(obj, key, path, default):
    if key not in obj:
        return default
    if not isinstance(obj[key], bool):
        raise ValidationError(path, "must be true or false")
    return obj[key]


def _section(doc, key):
    sec = doc.get(key, {})
    if not isinstance(sec, dict):
        raise ValidationError(key, "must be an object")
    return sec


def _check_keys(sec, allowed, path):
    for k in sec:
        if k not in allowed:
            raise ValidationError(f"{path}.{k}" if path else k, "unknown key")


# ---------------------------------------------------------------------------
# sections


def _vehicle(sec, base_dir):
    _check_keys(sec, {"mass", "inertia", "wing_area", "chord", "span", "rho", "gravity", "thrust_min",
                      "thrust_max", "rate_max_dps", "coefficient_table"}, "vehicle")
    d = VehicleParams()
    kw = {name: _num(sec, name, f"vehicle.{name}", getattr(d, name), positive=True)
          for name in ("mass", "wing_area", "chord", "span", "rho", "thrust_max")}
    kw["thrust_min"] = _num(sec, "thrust_min", "vehicle.thrust_min", d.thrust_min, nonnegative=True)
    kw["gravity"] = _vec(sec, "gravity", "vehicle.gravity", default=d.gravity)
    if "inertia" in sec:
        J = np.array(sec["inertia"], dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3):
            raise ValidationError("vehicle.inertia", "must be 3 diagonal entries or a 3x3 matrix")
        kw["inertia"] = J
    if "rate_max_dps" in sec:
        r = np.broadcast_to(np.array(sec["rate_max_dps"], dtype=float), (3,))
        kw["rate_max"] = np.radians(r)
    try:
        params = VehicleParams(**kw)
    except DomainError as exc:
        raise ValidationError("vehicle", str(exc)) from None
    model = AnalyticAeroModel()
    if "coefficient_table" in sec:
        path = Path(sec["coefficient_table"])
        path = path if path.is_absolute() else base_dir / path
        if not path.is_file():
            raise ValidationError("vehicle.coefficient_table", f"file not found: {path}")
        try:
            model = load_coefficient_table(path)
        except TableParseError as exc:
            raise ValidationError("vehicle.coefficient_table", str(exc)) from None
    return params, model


def _boundary(doc, key):
    sec = doc.get(key)
    if not isinstance(sec, dict):
        raise ValidationError(key, "missing or not an object")
    _check_keys(sec, {"position", "velocity", "acceleration", "jerk"}, key)
    out = np.zeros((4, 3))
    for i, name in enumerate(("position", "velocity", "acceleration", "jerk")):
        out[i] = _vec(sec, name, f"{key}.{name}", default=None if i == 0 else np.zeros(3))
    return out


def _waypoints(doc):
    raw = doc.get("waypoints", [])
    if not isinstance(raw, list):
        raise ValidationError("waypoints", "must be a list of 3-vectors")
    try:
        w = np.array(raw, dtype=float).reshape(-1, 3) if raw else np.zeros((0, 3))
    except (TypeError, ValueError):
        raise ValidationError("waypoints", "must be a list of 3-vectors") from None
    if raw and (np.array(raw, dtype=object).ndim != 2 or not np.all(np.isfinite(w))):
        raise ValidationError("waypoints", "must be a list of finite 3-vectors")
    return w


def _planner(sec, n_segments):
    _check_keys(sec, {"v_max", "time_weights", "penalty_weight", "samples", "rate_hz", "max_iterations",
                      "memory", "snap_weight"}, "planner")
    kw = {
        "v_max": _num(sec, "v_max", "planner.v_max", 10.0, positive=True),
        "penalty_weight": _num(sec, "penalty_weight", "planner.penalty_weight", 1e4, positive=True),
        "samples": _num(sec, "samples", "planner.samples", 16, positive=True, integer=True),
        "max_iterations": _num(sec, "max_iterations", "planner.max_iterations", 200, positive=True, integer=True),
        "memory": _num(sec, "memory", "planner.memory", 8, positive=True, integer=True),
        "snap_weight": _num(sec, "snap_weight", "planner.snap_weight", 0.0, nonnegative=True),
    }
    if "time_weights" in sec:
        b = np.atleast_1d(np.array(sec["time_weights"], dtype=float))
        if b.size not in (1, n_segments) or np.any(b <= 0):
            raise ValidationError("planner.time_weights", f"must be one or {n_segments} positive numbers")
        kw["time_weights"] = np.broadcast_to(b, (n_segments,)).copy()
    rate = _num(sec, "rate_hz", "planner.rate_hz", 100.0, positive=True)
    if kw["samples"] < 4:
        raise ValidationError("planner.samples", "must be at least 4")
    try:
        return OptimizerConfig(**kw), rate
    except DomainError as exc:
        raise ValidationError("planner", str(exc)) from None


def _mpc(sec, params):
    _check_keys(sec, {"horizon", "dt", "Q", "P", "pid_time_constant"}, "mpc")
    kw = {
        "horizon": _num(sec, "horizon", "mpc.horizon", 10, positive=True, integer=True),
        "dt": _num(sec, "dt", "mpc.dt", 0.1, positive=True),
    }
    for key, n in (("Q", 9), ("P", 4)):
        if key in sec:
            v = _vec(sec, key, f"mpc.{key}", n=n)
            if np.any(v <= 0):
                raise ValidationError(f"mpc.{key}", "weights must be positive")
            kw[key] = v
    tc = _num(sec, "pid_time_constant", "mpc.pid_time_constant", 0.05, positive=True)
    pid = RatePidConfig.default_for(params)
    pid.kp = np.diag(params.inertia) / tc
    return MpcConfig(**kw), pid


def _wind(doc, key):
    sec = _section(doc, key)
    _check_keys(sec, {"constant", "gusts"}, key)
    base = _vec(sec, "constant", f"{key}.constant", default=np.zeros(3))
    gusts = []
    raw = sec.get("gusts", [])
    if not isinstance(raw, list):
        raise ValidationError(f"{key}.gusts", "must be a list")
    for i, g in enumerate(raw):
        path = f"{key}.gusts[{i}]"
        if not isinstance(g, dict):
            raise ValidationError(path, "must be an object")
        _check_keys(g, {"t_start", "duration", "amplitude"}, path)
        gusts.append(Gust(
            _num(g, "t_start", f"{path}.t_start", 0.0, nonnegative=True),
            _num(g, "duration", f"{path}.duration", 1.0, positive=True),
            _vec(g, "amplitude", f"{path}.amplitude"),
        ))
    return WindProfile(base, tuple(gusts))


def _simulation(sec):
    _check_keys(sec, {"dt", "duration_cap", "tail"}, "simulation")
    return SimulationConfig(
        _num(sec, "dt", "simulation.dt", 1e-3, positive=True),
        _num(sec, "duration_cap", "simulation.duration_cap", 120.0, positive=True),
        _num(sec, "tail", "simulation.tail", 0.0, nonnegative=True),
    )


def _baselines(sec):
    _check_keys(sec, {"l1", "dubins", "turn_radius", "l1_distance", "acceptance_radius", "speed",
                      "cruise_alpha_deg", "dt"}, "baselines")
    speed = sec.get("speed")
    if speed is not None:
        speed = _num(sec, "speed", "baselines.speed", None, positive=True)
    return BaselineConfig(
        _bool(sec, "l1", "baselines.l1", True),
        _bool(sec, "dubins", "baselines.dubins", True),
        _num(sec, "turn_radius", "baselines.turn_radius", 8.0, positive=True),
        _num(sec, "l1_distance", "baselines.l1_distance", 10.0, positive=True),
        _num(sec, "acceptance_radius", "baselines.acceptance_radius", 2.0, positive=True),
        speed,
        math.radians(_num(sec, "cruise_alpha_deg", "baselines.cruise_alpha_deg", 15.0, positive=True)),
        _num(sec, "dt", "baselines.dt", 0.01, positive=True),
    )


def scenario_from_dict(doc, base_dir=None):
    """Validate a parsed document; raises :class:`ValidationError` naming the field."""
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "scenario must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "")
    base_dir = Path(base_dir or ".")
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ValidationError("name", "must be a string")
    params, model = _vehicle(_section(doc, "vehicle"), base_dir)
    start, goal = _boundary(doc, "start"), _boundary(doc, "goal")
    wps = _waypoints(doc)
    optimizer, rate = _planner(_section(doc, "planner"), len(wps) + 1)
    mpc, pid = _mpc(_section(doc, "mpc"), params)
    return Scenario(
        name=name, params=params, model=model, start=start, goal=goal, waypoints=wps,
        optimizer=optimizer, rate_hz=rate, mpc=mpc, pid=pid,
        wind=_wind(doc, "wind"), disturbance=_wind(doc, "disturbance"),
        simulation=_simulation(_section(doc, "simulation")),
        baselines=_baselines(_section(doc, "baselines")),
    )


def load_scenario(path):
    """Read and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError("scenario", f"file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("scenario", f"invalid JSON: {exc}") from None
    sc = scenario_from_dict(doc, path.parent)
    sc.source = path
    return sc
