"""Cautious limited-memory BFGS with a Lewis-Overton weak-Wolfe line search."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LbfgsConfig:
    memory: int = 8
    max_iterations: int = 200
    #: absolute gradient-norm tolerance; None means 1e-5 * max(1, |g0|)
    tolerance: float = None
    c1: float = 1e-4
    c2: float = 0.9
    max_bisections: int = 60
    #: cautious-update threshold: skip pairs with s'y <= eps |s|^2 |g|
    cautious_eps: float = 1e-6


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    iterations: int
    evaluations: int
    status: str
    history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


@dataclass
class LineSearchResult:
    step: float
    x: np.ndarray
    f: float
    grad: np.ndarray
    evaluations: int
    ok: bool


def weak_wolfe_search(fun, x, f0, g0, d, step=1.0, c1=1e-4, c2=0.9, max_bisections=60):
    """Bracketing line search for the weak Wolfe conditions.

    The step doubles while no upper bracket exists and bisects otherwise.
    Non-finite objective values count as sufficient-decrease failures, which
    lets the search back away from regions where ``fun`` blows up.
    """
    slope0 = float(g0 @ d)
    lo, hi = 0.0, np.inf
    t = step
    best = None
    evals = bisections = doublings = 0
    while bisections <= max_bisections and doublings <= 60:
        xt = x + t * d
        ft, gt = fun(xt)
        evals += 1
        finite = np.isfinite(ft) and np.all(np.isfinite(gt))
        if finite and (best is None or ft < best[2]):
            best = (t, xt, ft, gt)
        if not finite or ft > f0 + c1 * t * slope0:
            hi = t
        elif float(gt @ d) < c2 * slope0:
            lo = t
        else:
            return LineSearchResult(t, xt, ft, gt, evals, True)
        if np.isfinite(hi):
            t = 0.5 * (lo + hi)
            bisections += 1
        else:
            t = 2.0 * lo
            doublings += 1
    if best is not None and best[2] < f0:
        return LineSearchResult(*best, evaluations=evals, ok=False)
    return LineSearchResult(0.0, x, f0, g0, evals, False)


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += s * (a - b)
    return -q


def minimize(fun, x0, config=None, callback=None):
    """Minimise ``fun(x) -> (f, grad)`` from ``x0``.

    Status is ``"converged"`` when |grad| <= tolerance, ``"max_iterations"``
    when the budget runs out, and ``"line_search_failed"`` when no step
    satisfying the Wolfe conditions is found; in the last two cases the
    best point so far is returned.
    """
    cfg = config or LbfgsConfig()
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    evals = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at the initial point")
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-5 * max(1.0, float(np.linalg.norm(g)))
    s_hist, y_hist = [], []
    history = [f]
    status = "max_iterations"
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            status = "converged"
            it -= 1
            break
        d = _two_loop(g, s_hist, y_hist)
        if not g @ d < 0:
            d = -g
            s_hist.clear()
            y_hist.clear()
        step0 = 1.0 if s_hist else min(1.0, 1.0 / gnorm)
        ls = weak_wolfe_search(fun, x, f, g, d, step0, cfg.c1, cfg.c2, cfg.max_bisections)
        evals += ls.evaluations
        if ls.step == 0.0:
            status = "line_search_failed"
            break
        s = ls.x - x
        y = ls.grad - g
        x, f, g = ls.x, ls.f, ls.grad
        history.append(f)
        if callback is not None:
            callback(x, f, g)
        if y @ s > cfg.cautious_eps * (s @ s) * np.linalg.norm(g):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        if not ls.ok:
            status = "line_search_failed"
            break
    else:
        if float(np.linalg.norm(g)) <= tol:
            status = "converged"
    return LbfgsResult(x, float(f), g, it, evals, status, history)
