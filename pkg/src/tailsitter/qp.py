"""Convex QP with linear inequalities via the PHR augmented Lagrangian.

Solves ``min 0.5 x'Hx + g'x  s.t.  C x <= d`` with H positive definite.
Each outer iteration minimises the augmented Lagrangian

    L(x) = 0.5 x'Hx + g'x + (rho/2) |max(0, C x - d + mu/rho)|^2

exactly (it is piecewise quadratic) with a semismooth Newton method, then
updates ``mu <- max(0, mu + rho (C x - d))``. The penalty grows tenfold
whenever the constraint violation fails to drop by a factor of four.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConvergenceError


@dataclass
class AlmConfig:
    rho0: float = 10.0
    growth: float = 10.0
    max_outer: int = 20
    max_inner: int = 50
    tolerance: float = 1e-6
    rho_max: float = 1e12


@dataclass
class QPResult:
    x: np.ndarray
    multipliers: np.ndarray
    status: str
    outer_iterations: int
    violation: float
    gradient_norm: float

    @property
    def converged(self):
        return self.status == "converged"


def _inner(H, g, C, d, mu, rho, x, cfg):
    """Semismooth Newton with Armijo backtracking on the augmented Lagrangian."""

    def value(z):
        s = np.maximum(0.0, C @ z - d + mu / rho)
        return 0.5 * z @ H @ z + g @ z + 0.5 * rho * s @ s

    def grad(z):
        s = np.maximum(0.0, C @ z - d + mu / rho)
        return H @ z + g + rho * C.T @ s

    gr = grad(x)
    for _ in range(cfg.max_inner):
        if np.linalg.norm(gr, np.inf) < 0.1 * cfg.tolerance:
            break
        active = (C @ x - d + mu / rho) > 0
        Ca = C[active]
        K = H + rho * Ca.T @ Ca
        step = -cho_solve(cho_factor(K), gr)
        f0, slope = value(x), gr @ step
        t = 1.0
        while value(x + t * step) > f0 + 1e-4 * t * slope and t > 1e-12:
            t *= 0.5
        x = x + t * step
        gr = grad(x)
    return x, float(np.linalg.norm(gr, np.inf))


def solve_qp(H, g, C=None, d=None, config=None, x0=None, mu0=None):
    """Minimise 0.5 x'Hx + g'x subject to C x <= d.

    Returns a :class:`QPResult`; ``status`` is ``"converged"`` when the
    violation max(C x - d) and the Lagrangian gradient are both below the
    tolerance, else ``"max_outer"`` with the last iterate.
    """
    cfg = config or AlmConfig()
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = len(g)
    if C is None or len(C) == 0:
        x = -cho_solve(cho_factor(H), g)
        return QPResult(x, np.zeros(0), "converged", 0, 0.0, float(np.linalg.norm(H @ x + g, np.inf)))
    C = np.asarray(C, dtype=float)
    d = np.asarray(d, dtype=float)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    mu = np.zeros(len(d)) if mu0 is None else np.asarray(mu0, dtype=float).copy()
    rho = cfg.rho0
    prev_viol = np.inf
    viol = gnorm = np.inf
    for it in range(1, cfg.max_outer + 1):
        x, _ = _inner(H, g, C, d, mu, rho, x, cfg)
        c = C @ x - d
        mu = np.maximum(0.0, mu + rho * c)
        viol = float(max(0.0, np.max(c)))
        # stationarity and complementarity of the unaugmented Lagrangian
        gnorm = float(np.linalg.norm(H @ x + g + C.T @ mu, np.inf))
        comp = float(np.max(np.abs(mu * np.minimum(c, 0.0)))) if len(c) else 0.0
        if viol < cfg.tolerance and gnorm < cfg.tolerance and comp < cfg.tolerance:
            return QPResult(x, mu, "converged", it, viol, gnorm)
        if viol > 0.25 * prev_viol:
            rho = min(rho * cfg.growth, cfg.rho_max)
        prev_viol = viol
    return QPResult(x, mu, "max_outer", cfg.max_outer, viol, gnorm)


def solve_box_qp(H, g, lb, ub, config=None, x0=None):
    """:func:`solve_qp` with bounds lb <= x <= ub (infinite entries ignored)."""
    n = len(g)
    lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
    ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
    if np.any(lb > ub):
        raise ConvergenceError("infeasible bounds: lb > ub")
    eye = np.eye(n)
    up, lo = np.isfinite(ub), np.isfinite(lb)
    C = np.vstack([eye[up], -eye[lo]])
    d = np.concatenate([ub[up], -lb[lo]])
    return solve_qp(H, g, C, d, config, x0)
