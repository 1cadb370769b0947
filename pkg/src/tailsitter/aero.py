"""Aerodynamic coefficients, airflow angles and aerodynamic loads.

Two coefficient models share one interface (``model.coefficients(alpha,
beta)``): :class:`AnalyticAeroModel`, a smooth closed-form blend used by
default, and :class:`TableAeroModel`, a bicubic spline over a tabulated
10-degree grid loaded with :func:`load_coefficient_table`.

Frames: world is NED, body is FRD, thrust along body x. Angles are radians
in memory and degrees in files.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DegenerateSpeedError, DomainError, SymmetrizationWarning, TableParseError
from .so3 import hat

#: Below this airspeed (m/s) alpha and beta are not computed from the flow.
V_EPS = 0.1

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


@dataclass
class VehicleParams:
    """Rigid-body, geometric and actuator parameters of the vehicle.

    The inertia default is a placeholder; the source vehicle's tensor is
    not published.
    """

    mass: float = 1.3328
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.015, 0.025, 0.035]))
    wing_area: float = 0.33
    chord: float = 0.30
    span: float = 1.085
    rho: float = 1.225
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 9.8]))
    thrust_min: float = 0.0
    thrust_max: float = 30.0
    rate_max: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 4.0]))

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.gravity = np.asarray(self.gravity, dtype=float)
        self.rate_max = np.broadcast_to(np.asarray(self.rate_max, dtype=float), (3,)).copy()
        if not (self.mass > 0 and self.wing_area > 0 and self.rho > 0):
            raise DomainError("mass, wing_area and rho must be positive")
        if self.inertia.shape != (3, 3) or not np.allclose(self.inertia, self.inertia.T):
            raise DomainError("inertia must be a symmetric 3x3 matrix")
        if np.min(np.linalg.eigvalsh(self.inertia)) <= 0:
            raise DomainError("inertia must be positive definite")
        if self.thrust_min >= self.thrust_max:
            raise DomainError("thrust_min must be below thrust_max")
        if np.any(self.rate_max <= 0):
            raise DomainError("rate_max must be positive")

    @property
    def qbar_factor(self):
        """rho * S / 2, so that the dynamic force is qbar_factor * V^2 * C."""
        return 0.5 * self.rho * self.wing_area


@dataclass(frozen=True)
class AeroCoefficients:
    """Body-axis force coefficients C = (Cx, Cy, Cz), moments and partials.

    ``dC_dalpha`` and the other partials are 3-vectors over (Cx, Cy, Cz).
    """

    C: np.ndarray
    Cl: float
    Cm: float
    Cn: float
    dC_dalpha: np.ndarray
    dC_dbeta: np.ndarray
    d2C_dalpha2: np.ndarray
    d2C_dbeta_dalpha: np.ndarray

    @property
    def Cx(self):
        return self.C[0]

    @property
    def Cy(self):
        return self.C[1]

    @property
    def Cz(self):
        return self.C[2]

    @property
    def moments(self):
        return np.array([self.Cl, self.Cm, self.Cn])


@dataclass(frozen=True)
class AirflowState:
    """Relative airflow seen by the vehicle.

    ``v_air`` is world-frame, ``v_air_body`` body-frame; ``speed`` is their
    common norm.
    """

    v_air: np.ndarray
    v_air_body: np.ndarray
    speed: float
    alpha: float
    beta: float
    wind: np.ndarray


def airflow(R, v, wind=None, previous=None):
    """Airspeed, angle of attack and sideslip for attitude ``R``, velocity ``v``.

    Below :data:`V_EPS` the angles cannot be trusted; they are carried over
    from ``previous`` (an ``(alpha, beta)`` pair) or set to (pi/2, 0).
    """
    wind = np.zeros(3) if wind is None else np.asarray(wind, dtype=float)
    v_air = np.asarray(v, dtype=float) - wind
    v_body = R.T @ v_air
    speed = math.sqrt(float(v_body @ v_body))
    if speed < V_EPS:
        alpha, beta = previous if previous is not None else (0.5 * np.pi, 0.0)
    else:
        alpha = float(np.arctan2(v_body[2], v_body[0]))
        beta = float(np.arcsin(np.clip(v_body[1] / speed, -1.0, 1.0)))
    return AirflowState(v_air, v_body, speed, float(alpha), float(beta), wind)


def airflow_from_state(state, wind=None, previous=None):
    """:func:`airflow` for a :class:`~tailsitter.dynamics.VehicleState`."""
    return airflow(state.R, state.v, wind, previous)


# ---------------------------------------------------------------------------
# wind-axis -> body-axis coefficient assembly


@dataclass(frozen=True)
class _WindAxis:
    """(CL, CD, CY) values and partials, each a length-3 array."""

    val: np.ndarray
    a: np.ndarray
    b: np.ndarray
    aa: np.ndarray
    ab: np.ndarray


def _body_coefficients(alpha, w, moments):
    """Rotate lift/drag/side coefficients into body axes with partials."""
    sa, ca = math.sin(alpha), math.cos(alpha)
    L, D, Y = w.val
    La, Da, Ya = w.a
    Lb, Db, Yb = w.b
    Laa, Daa, Yaa = w.aa
    Lab, Dab, Yab = w.ab

    C = np.array([-D * ca + L * sa, Y, -D * sa - L * ca])
    dA = np.array([
        -Da * ca + D * sa + La * sa + L * ca,
        Ya,
        -Da * sa - D * ca - La * ca + L * sa,
    ])
    dAA = np.array([
        -Daa * ca + 2 * Da * sa + D * ca + Laa * sa + 2 * La * ca - L * sa,
        Yaa,
        -Daa * sa - 2 * Da * ca + D * sa - Laa * ca + 2 * La * sa + L * ca,
    ])
    dB = np.array([-Db * ca + Lb * sa, Yb, -Db * sa - Lb * ca])
    dAB = np.array([
        -Dab * ca + Db * sa + Lab * sa + Lb * ca,
        Yab,
        -Dab * sa - Db * ca - Lab * ca + Lb * sa,
    ])
    Cl, Cm, Cn = moments
    return AeroCoefficients(C, float(Cl), float(Cm), float(Cn), dA, dB, dAA, dAB)


class AeroModel:
    """Interface shared by the coefficient models."""

    def coefficients(self, alpha, beta=0.0):
        raise NotImplementedError

    def cz_and_slope(self, alpha):
        """C_z(alpha, 0) and its alpha-derivative (the alpha root-finder's needs)."""
        c = self.coefficients(alpha, 0.0)
        return c.C[2], c.dC_dalpha[2]


@dataclass(frozen=True)
class AnalyticAeroModel(AeroModel):
    """Smooth closed-form coefficients, valid over the full alpha range.

    Longitudinal::

        CL(a, b) = (lift_slope / 2) sin(2a) cos(b)
        CD(a, b) = cd0 + cd90 sin^2(a) + cd_beta sin^2(b)
        Cm(a, b) = cm0 + cm_alpha sin(a) cos(b)

    Lateral (antisymmetric in sideslip)::

        CY = cy_beta sin(b),  Cl = cl_beta sin(b),  Cn = cn_beta sin(b)

    The sin(2a) lift term is the flat-plate shape scaled to the requested
    slope at zero alpha, so CL vanishes at +-90 degrees.
    """

    lift_slope: float = 2.5
    cd0: float = 0.02
    cd90: float = 1.3
    cd_beta: float = 0.1
    cy_beta: float = -0.3
    cm0: float = 0.0
    cm_alpha: float = -0.15
    cl_beta: float = -0.05
    cn_beta: float = 0.05

    def coefficients(self, alpha, beta=0.0):
        k = 0.5 * self.lift_slope
        s2a, c2a = math.sin(2 * alpha), math.cos(2 * alpha)
        sb, cb = math.sin(beta), math.cos(beta)
        sa = math.sin(alpha)

        CL, CL_a, CL_aa = k * s2a * cb, 2 * k * c2a * cb, -4 * k * s2a * cb
        CL_b, CL_ab = -k * s2a * sb, -2 * k * c2a * sb
        CD = self.cd0 + self.cd90 * sa * sa + self.cd_beta * sb * sb
        CD_a, CD_aa = self.cd90 * s2a, 2 * self.cd90 * c2a
        CD_b, CD_ab = self.cd_beta * 2 * sb * cb, 0.0
        CY, CY_b = self.cy_beta * sb, self.cy_beta * cb

        w = _WindAxis(
            val=np.array([CL, CD, CY]),
            a=np.array([CL_a, CD_a, 0.0]),
            b=np.array([CL_b, CD_b, CY_b]),
            aa=np.array([CL_aa, CD_aa, 0.0]),
            ab=np.array([CL_ab, CD_ab, 0.0]),
        )
        moments = (self.cl_beta * sb, self.cm0 + self.cm_alpha * sa * cb, self.cn_beta * sb)
        return _body_coefficients(alpha, w, moments)

    def cz_and_slope(self, alpha):
        # scalar fast path for the angle-of-attack root finder (beta = 0)
        sa, ca = math.sin(alpha), math.cos(alpha)
        k = 0.5 * self.lift_slope
        CL, CL_a = k * 2 * sa * ca, 2 * k * (ca * ca - sa * sa)
        CD, CD_a = self.cd0 + self.cd90 * sa * sa, self.cd90 * 2 * sa * ca
        cz = -CD * sa - CL * ca
        return cz, -CD_a * sa - CD * ca - CL_a * ca + CL * sa


# ---------------------------------------------------------------------------
# tabulated model

TABLE_COLUMNS = ("alpha_deg", "beta_deg", "CL", "CD", "CY", "Cl", "Cm", "Cn")
GRID_STEP_DEG = 10.0
# +1 for beta-symmetric columns, -1 for antisymmetric ones
_PARITY = {"CL": 1, "CD": 1, "CY": -1, "Cl": -1, "Cm": 1, "Cn": -1}


class TableAeroModel(AeroModel):
    """Bicubic-spline coefficient model over an (alpha, beta) degree grid.

    Lateral symmetry is imposed at evaluation time by averaging the
    spline with its beta-mirror, so ``CY(a, 0) == 0`` holds exactly. When
    the alpha grid spans a full turn, alpha is wrapped into it; otherwise
    out-of-range angles raise :class:`DomainError`.
    """

    def __init__(self, alpha_deg, beta_deg, values):
        self.alpha_deg = np.asarray(alpha_deg, dtype=float)
        self.beta_deg = np.asarray(beta_deg, dtype=float)
        self._splines = {
            name: RectBivariateSpline(self.alpha_deg, self.beta_deg, values[name], kx=3, ky=3, s=0)
            for name in _PARITY
        }
        self._periodic = np.isclose(self.alpha_deg[-1] - self.alpha_deg[0], 360.0)

    def _locate(self, alpha, beta):
        a = np.degrees(alpha)
        b = np.degrees(beta)
        lo, hi = self.alpha_deg[0], self.alpha_deg[-1]
        if self._periodic:
            a = (a - lo) % 360.0 + lo
        tol = 1e-9
        if not (lo - tol <= a <= hi + tol) or not (
            self.beta_deg[0] - tol <= b <= self.beta_deg[-1] + tol
            and self.beta_deg[0] - tol <= -b <= self.beta_deg[-1] + tol
        ):
            raise DomainError(
                f"(alpha, beta) = ({np.degrees(alpha):.3f}, {b:.3f}) deg outside the tabulated domain"
            )
        return float(np.clip(a, lo, hi)), float(b)

    def _eval(self, name, a, b):
        """Symmetrized value and partials (per degree) of one coefficient."""
        sp = self._splines[name]
        par = _PARITY[name]

        def ev(dx, dy):
            plus = sp(a, b, dx=dx, dy=dy)[0, 0]
            minus = sp(a, -b, dx=dx, dy=dy)[0, 0]
            # d/db of f(a, -b) flips sign once per beta derivative
            return 0.5 * (plus + par * (-1) ** dy * minus)

        return ev(0, 0), ev(1, 0), ev(0, 1), ev(2, 0), ev(1, 1)

    def coefficients(self, alpha, beta=0.0):
        a, b = self._locate(alpha, beta)
        d = np.degrees(1.0)
        out = {n: self._eval(n, a, b) for n in _PARITY}

        def stack(i, scale):
            return np.array([out["CL"][i], out["CD"][i], out["CY"][i]]) * scale

        w = _WindAxis(
            val=stack(0, 1.0), a=stack(1, d), b=stack(2, d), aa=stack(3, d * d), ab=stack(4, d * d)
        )
        moments = (out["Cl"][0], out["Cm"][0], out["Cn"][0])
        return _body_coefficients(alpha, w, moments)


def _read_rows(text):
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TableParseError("empty coefficient table") from None
    if tuple(header) != TABLE_COLUMNS:
        raise TableParseError(f"header must be {','.join(TABLE_COLUMNS)}, got {','.join(header)}")
    rows = []
    for idx, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(TABLE_COLUMNS):
            raise TableParseError(f"expected {len(TABLE_COLUMNS)} fields, got {len(row)}", row=idx)
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise TableParseError(f"non-numeric field ({exc})", row=idx) from None
        if not np.all(np.isfinite(vals)):
            raise TableParseError("NaN or infinite value", row=idx)
        rows.append((idx, vals))
    if not rows:
        raise TableParseError("coefficient table has no data rows")
    return rows


def load_coefficient_table(source, symmetry_tol=1e-9):
    """Parse a coefficient CSV into a :class:`TableAeroModel`.

    ``source`` is a binary or text stream, bytes, or a path. The grid must
    be a complete 10-degree lattice, symmetric in beta. Lateral symmetry
    is enforced by replacing each coefficient with its symmetric (CL, CD,
    Cm) or antisymmetric (CY, Cl, Cn) part in beta; a
    :class:`SymmetrizationWarning` reports any correction larger than
    ``symmetry_tol``.
    """
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()

    rows = _read_rows(text)
    for idx, vals in rows:
        for angle in vals[:2]:
            if not np.isclose(angle / GRID_STEP_DEG, round(angle / GRID_STEP_DEG), atol=1e-9):
                raise TableParseError(f"angle {angle} is not on the 10-degree grid", row=idx)

    alphas = np.unique([round(v[0]) for _, v in rows]).astype(float)
    betas = np.unique([round(v[1]) for _, v in rows]).astype(float)
    for axis, name in ((alphas, "alpha"), (betas, "beta")):
        if len(axis) < 4:
            raise TableParseError(f"need at least 4 {name} grid values for a bicubic spline")
        if not np.allclose(np.diff(axis), GRID_STEP_DEG):
            missing = sorted(set(np.arange(axis[0], axis[-1] + 1, GRID_STEP_DEG)) - set(axis))
            raise TableParseError(f"{name} grid has gaps at {missing}")
    if not np.allclose(betas, -betas[::-1]):
        raise TableParseError("beta grid must be symmetric about zero")

    ia = {a: i for i, a in enumerate(alphas)}
    ib = {b: j for j, b in enumerate(betas)}
    values = {n: np.full((len(alphas), len(betas)), np.nan) for n in _PARITY}
    for idx, vals in rows:
        i, j = ia[round(vals[0])], ib[round(vals[1])]
        if not np.isnan(values["CL"][i, j]):
            raise TableParseError(f"duplicate cell (alpha, beta) = ({vals[0]:g}, {vals[1]:g})", row=idx)
        for k, n in enumerate(TABLE_COLUMNS[2:]):
            values[n][i, j] = vals[2 + k]
    holes = np.argwhere(np.isnan(values["CL"]))
    if len(holes):
        i, j = holes[0]
        raise TableParseError(
            f"missing cell (alpha, beta) = ({alphas[i]:g}, {betas[j]:g}); {len(holes)} hole(s) total"
        )

    worst = {}
    for n, par in _PARITY.items():
        sym = 0.5 * (values[n] + par * values[n][:, ::-1])
        dev = float(np.max(np.abs(sym - values[n])))
        if dev > symmetry_tol:
            worst[n] = dev
        values[n] = sym
    if worst:
        detail = ", ".join(f"{k} by up to {v:.3g}" for k, v in worst.items())
        warnings.warn(f"coefficient table symmetrized in beta: {detail}", SymmetrizationWarning, stacklevel=2)
    return TableAeroModel(alphas, betas, values)


def write_coefficient_table(model, stream, alphas_deg=None, betas_deg=None):
    """Tabulate ``model`` on a 10-degree grid in the CSV format above."""
    alphas_deg = np.arange(-180, 181, 10) if alphas_deg is None else alphas_deg
    betas_deg = np.arange(-90, 91, 10) if betas_deg is None else betas_deg
    stream.write(",".join(TABLE_COLUMNS) + "\n")
    for a in alphas_deg:
        for b in betas_deg:
            c = model.coefficients(np.radians(a), np.radians(b))
            CL, CD, CY = wind_axis_from_body(np.radians(a), c.C)
            stream.write(
                f"{a:g},{b:g},{CL:.12g},{CD:.12g},{CY:.12g},{c.Cl:.12g},{c.Cm:.12g},{c.Cn:.12g}\n"
            )


def wind_axis_from_body(alpha, C):
    """Invert the body-axis assembly: (Cx, Cy, Cz) -> (CL, CD, CY)."""
    sa, ca = np.sin(alpha), np.cos(alpha)
    Cx, Cy, Cz = C
    return Cx * sa - Cz * ca, -Cx * ca - Cz * sa, Cy


# ---------------------------------------------------------------------------
# loads


def _coeffs_for(airflow, model):
    return model.coefficients(airflow.alpha, airflow.beta)


def aero_force_body(airflow, params, model, coeffs=None):
    """Body-frame aerodynamic force 0.5 rho V^2 S C(alpha, beta) in N."""
    c = coeffs if coeffs is not None else _coeffs_for(airflow, model)
    return params.qbar_factor * airflow.speed**2 * c.C


def aero_moment_body(airflow, params, model, coeffs=None):
    """Body-frame aerodynamic moment 0.5 rho V^2 S (b Cl, c Cm, b Cn) in N m."""
    c = coeffs if coeffs is not None else _coeffs_for(airflow, model)
    q = params.qbar_factor * airflow.speed**2
    return q * np.array([params.span * c.Cl, params.chord * c.Cm, params.span * c.Cn])


def dfa_dvab(airflow, params, model, coeffs=None, allow_degenerate=False):
    """Jacobian of the body aerodynamic force w.r.t. body airspeed.

    Valid in coordinated flight (beta = 0)::

        (rho S / 2) (2 C v^T + dC/dalpha v^T hat(e2) + V dC/dbeta e2^T)

    Raises :class:`DegenerateSpeedError` below :data:`V_EPS` unless
    ``allow_degenerate``, in which case the zero matrix (the exact limit
    of a force quadratic in V) is returned.
    """
    V = airflow.speed
    if V <= V_EPS:
        if allow_degenerate:
            return np.zeros((3, 3))
        raise DegenerateSpeedError(f"airspeed {V:.3g} m/s below {V_EPS} m/s")
    c = coeffs if coeffs is not None else _coeffs_for(airflow, model)
    vb = airflow.v_air_body
    return params.qbar_factor * (
        2.0 * np.outer(c.C, vb) + np.outer(c.dC_dalpha, vb @ hat(E2)) + V * np.outer(c.dC_dbeta, E2)
    )
