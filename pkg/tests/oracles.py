"""Independent reference implementations used only by the tests."""

import numpy as np
from scipy.optimize import brentq

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")


def _sgn(kind):
    return 1.0 if kind == "L" else -1.0


def end_pose(word, params, r, start):
    """Compose the word primitives with complex arithmetic."""
    z = complex(start[0], start[1])
    psi = start[2]
    for kind, p in zip(word, params):
        if kind == "S":
            z += r * p * np.exp(1j * psi)
        else:
            s = _sgn(kind)
            centre = z + s * r * 1j * np.exp(1j * psi)
            z = centre + (z - centre) * np.exp(1j * s * p)
            psi += s * p
    return z, psi


def _after_arc(t, kind, r, start):
    s = _sgn(kind)
    z0 = complex(start[0], start[1])
    c = z0 + s * r * 1j * np.exp(1j * start[2])
    return c + (z0 - c) * np.exp(1j * s * t), start[2] + s * t


def _word_candidates(word, r, start, goal, n_grid):
    """Sweep the first arc angle on a grid and refine each tangency root.

    CSC: in the frame of the heading after the first arc, the final circle
    centre must sit at lateral offset s3*r (the straight length is the
    forward offset). CCC: the middle circle must touch the final circle.
    """
    zg = complex(goal[0], goal[1])
    s3 = _sgn(word[2])
    cg = zg + s3 * r * 1j * np.exp(1j * goal[2])

    def local(t):
        z, psi = _after_arc(t, word[0], r, start)
        return z, psi, np.conj(np.exp(1j * psi)) * (cg - z)

    if word[1] == "S":
        def g(t):
            return local(t)[2].imag - s3 * r
    else:
        s2 = _sgn(word[1])

        def g(t):
            z, psi, _ = local(t)
            return abs(z + s2 * r * 1j * np.exp(1j * psi) - cg) - 2 * r

    ts = np.linspace(0.0, 2 * np.pi, n_grid + 1)
    vals = np.array([g(t) for t in ts])
    roots = [t for t, v in zip(ts, vals) if v == 0.0]
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        roots.append(brentq(g, ts[i], ts[i + 1], xtol=1e-14))

    lengths = []
    for t in roots:
        z, psi, rel = local(t)
        if word[1] == "S":
            p = rel.real / r
            if p < -1e-9:
                continue
            p = max(p, 0.0)
            psi2 = psi
        else:
            cm = z + s2 * r * 1j * np.exp(1j * psi)
            contact = 0.5 * (cm + cg)
            p = np.mod(s2 * (np.angle(contact - cm) - np.angle(z - cm)), 2 * np.pi)
            psi2 = psi + s2 * p
        q = np.mod(s3 * (goal[2] - psi2), 2 * np.pi)
        if q > 2 * np.pi - 1e-9:
            q = 0.0
        ze, psie = end_pose(word, (t, p, q), r, start)
        if abs(ze - zg) < 1e-6 * r and abs(np.angle(np.exp(1j * (psie - goal[2])))) < 1e-6:
            lengths.append(r * (t + p + q))
    return lengths


def dubins_bruteforce(start, goal, r, n_grid=2000):
    """Shortest Dubins length from a grid sweep of the first arc of each word.

    Every root found on the grid is refined, completed to a full path, and
    kept only if forward composition of the primitives lands on the goal.
    """
    best = np.inf
    for word in WORDS:
        for length in _word_candidates(word, r, start, goal, n_grid):
            best = min(best, length)
    return best


# ---------------------------------------------------------------------------
# minimum-snap reference


def _poly_deriv_row(t, order, degree=7):
    row = np.zeros(degree + 1)
    for k in range(order, degree + 1):
        coef = 1.0
        for j in range(order):
            coef *= k - j
        row[k] = coef * t ** (k - order)
    return row


def snap_hessian_quadrature(T, degree=7):
    """Integral of (4th-derivative basis)(4th-derivative basis)^T by Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(8)
    ts = 0.5 * T * (x + 1.0)
    Q = np.zeros((degree + 1, degree + 1))
    for t, wt in zip(ts, w):
        r = _poly_deriv_row(t, 4, degree)
        Q += 0.5 * T * wt * np.outer(r, r)
    return Q


def min_snap_dense(start, goal, waypoints, T):
    """Minimum-snap spline by a dense KKT solve.

    Constraints: start and goal position..jerk, waypoint positions and
    position..jerk continuity at every joint (higher continuity is left to
    the optimiser). Returns (coefficients (M, 8, 3), snap cost).
    """
    M = len(T)
    n = 8 * M
    H = np.zeros((n, n))
    for i in range(M):
        H[8 * i:8 * i + 8, 8 * i:8 * i + 8] = snap_hessian_quadrature(T[i])
    rows, rhs = [], []

    def add(entries, value):
        r = np.zeros(n)
        for seg, vec in entries:
            r[8 * seg:8 * seg + 8] += vec
        rows.append(r)
        rhs.append(value)

    for d in range(4):
        add([(0, _poly_deriv_row(0.0, d))], start[d])
        add([(M - 1, _poly_deriv_row(T[-1], d))], goal[d])
    for i in range(M - 1):
        add([(i, _poly_deriv_row(T[i], 0))], waypoints[i])
        for d in range(4):
            add([(i, _poly_deriv_row(T[i], d)), (i + 1, -_poly_deriv_row(0.0, d))], np.zeros(3))
    A = np.array(rows)
    B = np.array(rhs)
    K = np.block([[2 * H, A.T], [A, np.zeros((len(A), len(A)))]])
    sol = np.linalg.solve(K, np.vstack([np.zeros((n, 3)), B]))
    c = sol[:n]
    cost = float(np.sum(c * (H @ c)))
    return c.reshape(M, 8, 3), cost
