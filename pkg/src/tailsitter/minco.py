"""Minimum-snap piecewise polynomials through fixed waypoints (MINCO).

Each of the M segments is a degree-7 polynomial in segment-relative time,
``p_i(t) = c_i^T rho(t)`` with ``rho(t) = (1, t, ..., t^7)``. Given the
boundary derivatives up to jerk, the interior waypoints and the durations
T, the minimum-snap coefficients are the unique solution of a banded
8M x 8M system ``A c = b``; A is factorised once with LAPACK's banded LU
and the factors are kept for derivative and adjoint solves.
"""

import json
from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, onenormest

from .errors import ConditioningError, DomainError

DEGREE = 7
NCOEF = DEGREE + 1
#: half-bandwidth of A (both lower and upper)
BANDWIDTH = 11

_FALLING = np.array(
    [[factorial(k) // factorial(k - d) if k >= d else 0 for k in range(NCOEF)] for d in range(NCOEF)],
    dtype=float,
)

_POWERS = np.maximum(np.arange(NCOEF)[None, :] - np.arange(NCOEF)[:, None], 0)


def basis(t, order=0):
    """d^order/dt^order of rho(t); ``t`` may be an array (returns (..., 8))."""
    t = np.asarray(t, dtype=float)
    if order >= NCOEF:
        return np.zeros(t.shape + (NCOEF,))
    return _FALLING[order] * np.power(t[..., None], _POWERS[order])


@dataclass(frozen=True)
class BoundaryCondition:
    """Position, velocity, acceleration and jerk at one trajectory end."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray

    @classmethod
    def at_rest(cls, p):
        z = np.zeros(3)
        return cls(np.asarray(p, dtype=float), z, z, z)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float).reshape(4, 3)
        return cls(*arr)

    def as_array(self):
        out = np.array([self.p, self.v, self.a, self.j], dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError("boundary condition must be finite")
        return out


def _check_inputs(start, goal, waypoints, T):
    T = np.atleast_1d(np.asarray(T, dtype=float))
    M = len(T)
    if M < 1:
        raise DomainError("need at least one segment")
    if np.any(~np.isfinite(T)) or np.any(T <= 0):
        raise DomainError(f"segment durations must be positive, got {T}")
    wps = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(wps) != M - 1:
        raise DomainError(f"{M} segments need {M - 1} waypoints, got {len(wps)}")
    return _as_bc(start).as_array(), _as_bc(goal).as_array(), wps, T


def _as_bc(x):
    return x if isinstance(x, BoundaryCondition) else BoundaryCondition.from_array(x)


def _blocks(M, T):
    """Yield (row0, col0, block) for every nonzero block of A."""
    yield 0, 0, np.stack([basis(0.0, d) for d in range(4)])
    for i in range(1, M):
        r = 4 + 8 * (i - 1)
        Ti = T[i - 1]
        G = np.stack([basis(Ti, 0)] + [basis(Ti, d) for d in range(7)])
        H = np.vstack([np.zeros(NCOEF)] + [-basis(0.0, d) for d in range(7)])
        yield r, 8 * (i - 1), G
        yield r, 8 * i, H
    yield 8 * M - 4, 8 * (M - 1), np.stack([basis(T[-1], d) for d in range(4)])


def assemble_system(start, goal, waypoints, T):
    """Build the sparse banded matrix A (8M x 8M) and right-hand side b (8M x 3).

    Row layout: 4 start rows (p, v, a, j at t=0 of segment 1); for each
    interior joint i an 8-row block whose first row pins the waypoint and
    whose remaining rows equate derivatives 0..6 across the joint; 4 goal
    rows at t=T_M of the last segment.
    """
    s0, sf, wps, T = _check_inputs(start, goal, waypoints, T)
    M = len(T)
    n = 8 * M
    rows, cols, vals = [], [], []
    for r0, c0, blk in _blocks(M, T):
        rr, cc = np.nonzero(blk)
        rows.append(rr + r0)
        cols.append(cc + c0)
        vals.append(blk[rr, cc])
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    b = np.zeros((n, 3))
    b[:4] = s0
    for i in range(1, M):
        b[4 + 8 * (i - 1)] = wps[i - 1]
    b[n - 4:] = sf
    return A, b


def _band_storage(A, kl=BANDWIDTH, ku=BANDWIDTH):
    """LAPACK gbtrf layout: (2*kl + ku + 1, n) with kl spare rows on top."""
    A = sp.coo_matrix(A)
    n = A.shape[0]
    ab = np.zeros((2 * kl + ku + 1, n))
    ab[kl + ku + A.row - A.col, A.col] = A.data
    return ab


class BandedFactorization:
    """Banded LU (partial pivoting) of A with forward and transposed solves.

    The factorised matrix is the equilibrated ``diag(r) A diag(col_scale)``;
    ``col_scale`` defaults to ones and ``r`` normalises row max-norms. The
    solves undo the scaling, so callers always work with A itself.
    """

    def __init__(self, A, col_scale=None, kl=BANDWIDTH, ku=BANDWIDTH):
        self.kl, self.ku = kl, ku
        A = sp.csr_matrix(A)
        n = A.shape[0]
        self.col_scale = np.ones(n) if col_scale is None else np.asarray(col_scale, dtype=float)
        As = A @ sp.diags(self.col_scale)
        self.row_scale = 1.0 / np.asarray(abs(As).max(axis=1).todense()).ravel()
        As = sp.diags(self.row_scale) @ As
        self.n = n
        self.anorm = float(abs(As).sum(axis=0).max())
        self.lu, self.piv, info = lapack.dgbtrf(_band_storage(As, kl, ku), kl, ku)
        if info > 0:
            raise ConditioningError(f"MINCO matrix is singular (zero pivot at {info})")
        # Hager-Higham estimate of the inverse 1-norm using the banded solves
        inv = LinearOperator((n, n), dtype=float,
                             matvec=lambda x: self._solve_scaled(x.reshape(-1, 1)).ravel(),
                             rmatvec=lambda x: self._solve_scaled(x.reshape(-1, 1), True).ravel())
        self.rcond = 1.0 / (self.anorm * onenormest(inv))
        if self.rcond < 1e-14:
            raise ConditioningError(f"MINCO matrix ill-conditioned (rcond={self.rcond:.3g})")

    def _solve_scaled(self, rhs, trans=False):
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, rhs, self.piv, trans=1 if trans else 0)
        if info != 0:
            raise ConditioningError(f"banded solve failed (info={info})")
        return x

    def solve(self, rhs, trans=False):
        """Solve A x = rhs (or A^T x = rhs when ``trans``)."""
        rhs = np.asarray(rhs, dtype=float)
        r, c = self.row_scale, self.col_scale
        shape = (-1,) + (1,) * (rhs.ndim - 1)
        if trans:
            return r.reshape(shape) * self._solve_scaled(c.reshape(shape) * rhs, True)
        return c.reshape(shape) * self._solve_scaled(r.reshape(shape) * rhs)


def time_scaling(T):
    """Column scale T_i^-k for coefficient k of segment i."""
    return np.concatenate([np.asarray(Ti, dtype=float) ** -np.arange(NCOEF) for Ti in T])


def solve_coefficients(A, b, return_factorization=False, T=None):
    """Solve A c = b by banded LU; O(M) time and memory.

    Passing the durations ``T`` enables time-based column scaling, which
    keeps the factorisation accurate for durations far from 1 s. Raises
    :class:`ConditioningError` for singular or ill-conditioned A or when
    the relative residual exceeds 1e-8.
    """
    fac = BandedFactorization(A, None if T is None else time_scaling(T))
    c = fac.solve(b)
    # residual of the equilibrated system; the raw A @ c cancels badly when
    # durations are far from 1 s and the high-order coefficients are large
    rb = fac.row_scale[:, None] * b
    y = c / fac.col_scale[:, None]
    As = sp.diags(fac.row_scale) @ sp.csr_matrix(A) @ sp.diags(fac.col_scale)
    scale = max(float(np.max(np.abs(rb))), 1e-300)
    res = float(np.max(np.abs(As @ y - rb)))
    if res > 1e-8 * scale and res > 1e-14:
        raise ConditioningError(f"MINCO residual {res:.3g} too large (|b|={scale:.3g})")
    return (c, fac) if return_factorization else c


@dataclass(eq=False)
class PiecewiseTrajectory:
    """Solved minimum-snap trajectory.

    ``coeffs`` has shape (M, 8, 3); :attr:`c` is the stacked 8M x 3 view.
    """

    T: np.ndarray
    coeffs: np.ndarray
    waypoints: np.ndarray
    start: np.ndarray
    goal: np.ndarray
    factorization: BandedFactorization = None

    @property
    def M(self):
        return len(self.T)

    @property
    def c(self):
        return self.coeffs.reshape(-1, 3)

    @property
    def duration(self):
        return float(np.sum(self.T))

    @property
    def knots(self):
        """Absolute start time of every segment plus the final time."""
        return np.concatenate([[0.0], np.cumsum(self.T)])

    def locate(self, t):
        """(segment index, relative time); joints resolve to the left segment."""
        total = self.duration
        if not (-1e-12 * max(1.0, total) <= t <= total * (1 + 1e-12)):
            raise DomainError(f"t={t} outside [0, {total}]")
        knots = self.knots
        i = int(np.searchsorted(knots, t, side="left")) - 1
        i = min(max(i, 0), self.M - 1)
        return i, min(max(t - knots[i], 0.0), self.T[i])

    def evaluate(self, t, order=0):
        """The ``order``-th derivative of position at absolute time ``t``."""
        if not 0 <= order <= DEGREE:
            raise DomainError("derivative order must be in 0..7")
        i, tau = self.locate(t)
        return basis(tau, order) @ self.coeffs[i]

    def evaluate_segment(self, i, tau, order=0):
        return basis(tau, order) @ self.coeffs[i]

    def derivatives(self, t, max_order=4):
        """Stack of derivatives 0..max_order at ``t``, shape (max_order+1, 3)."""
        i, tau = self.locate(t)
        return np.stack([basis(tau, d) @ self.coeffs[i] for d in range(max_order + 1)])

    def sample(self, times, order=0):
        return np.array([self.evaluate(t, order) for t in times])

    def joint_jumps(self, max_order=6):
        """Max |jump| per derivative order across interior joints."""
        jumps = np.zeros(max_order + 1)
        for i in range(self.M - 1):
            for d in range(max_order + 1):
                left = basis(self.T[i], d) @ self.coeffs[i]
                right = basis(0.0, d) @ self.coeffs[i + 1]
                jumps[d] = max(jumps[d], float(np.max(np.abs(left - right))))
        return jumps

    def snap_cost(self):
        """Integral of |p''''|^2 over the whole trajectory."""
        return float(sum(np.sum(c * (snap_gram(Ti) @ c)) for c, Ti in zip(self.coeffs, self.T)))

    # -- sensitivities -------------------------------------------------------

    def _dA_dT_times_c(self, i):
        """(dA/dT_i) c as an 8M x 3 array; nonzero only in the rows holding G_i."""
        M = self.M
        out = np.zeros((8 * M, 3))
        ci, Ti = self.coeffs[i], self.T[i]
        if i < M - 1:
            r = 4 + 8 * i
            orders = [0] + list(range(7))
        else:
            r = 8 * M - 4
            orders = list(range(4))
        for k, d in enumerate(orders):
            out[r + k] = basis(Ti, d + 1) @ ci
        return out

    def dcoeff_dT(self, i):
        """dc/dT_i = -A^{-1} (dA/dT_i) c, reusing the stored factorisation."""
        if not 0 <= i < self.M:
            raise DomainError(f"segment index {i} out of range")
        return -self.factorization.solve(self._dA_dT_times_c(i))

    def grad_T_from_grad_c(self, grad_c):
        """Chain a gradient w.r.t. c (8M x 3) through c(T) with one adjoint solve."""
        lam = self.factorization.solve(np.asarray(grad_c, dtype=float).reshape(-1, 3), trans=True)
        return np.array([-np.sum(lam * self._dA_dT_times_c(i)) for i in range(self.M)])

    # -- serialisation --------------------------------------------------------

    def to_dict(self):
        return {
            "M": self.M,
            "T": self.T.tolist(),
            "c": self.c.tolist(),
            "waypoints": self.waypoints.tolist(),
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        """Rebuild from serialised form; coefficients are taken as stored."""
        M = int(d["M"])
        T = np.asarray(d["T"], dtype=float)
        c = np.asarray(d["c"], dtype=float).reshape(M, NCOEF, 3)
        if len(T) != M:
            raise DomainError("T length does not match M")
        traj = cls(T, c, np.asarray(d["waypoints"], dtype=float).reshape(-1, 3),
                   np.asarray(d["start"], dtype=float), np.asarray(d["goal"], dtype=float))
        A, _ = assemble_system(traj.start, traj.goal, traj.waypoints, T)
        traj.factorization = BandedFactorization(A, time_scaling(T))
        return traj

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def snap_gram(T):
    """Q with c^T Q c = integral_0^T (d^4/dt^4 c^T rho)^2 dt."""
    Q = np.zeros((NCOEF, NCOEF))
    for j in range(4, NCOEF):
        for k in range(4, NCOEF):
            e = j + k - 7
            Q[j, k] = _FALLING[4, j] * _FALLING[4, k] * T**e / e
    return Q


def snap_gram_dT(T):
    """Elementwise derivative of :func:`snap_gram` with respect to T."""
    Q = np.zeros((NCOEF, NCOEF))
    for j in range(4, NCOEF):
        for k in range(4, NCOEF):
            e = j + k - 7
            Q[j, k] = _FALLING[4, j] * _FALLING[4, k] * T ** (e - 1)
    return Q


def solve_trajectory(start, goal, waypoints, T):
    """Assemble, solve and wrap the minimum-snap trajectory for durations T."""
    s0, sf, wps, T = _check_inputs(start, goal, waypoints, T)
    A, b = assemble_system(s0, sf, wps, T)
    c, fac = solve_coefficients(A, b, return_factorization=True, T=T)
    return PiecewiseTrajectory(T.copy(), c.reshape(len(T), NCOEF, 3), wps, s0, sf, fac)
