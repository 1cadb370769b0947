"""Rotation-group helpers: hat/vee, exponential and logarithmic maps.

Conventions follow the body-rate form R' = R hat(w). ``log_map`` and
``exp_map`` are inverses on the principal branch (angle < pi).
"""

import math

import numpy as np

_SMALL = 1e-6


def norm3(v):
    """Euclidean norm of a short vector without the ``np.linalg.norm`` overhead."""
    return math.sqrt(float(v @ v))


def hat(v):
    """Skew-symmetric matrix with ``hat(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross(a, b):
    """3-vector cross product (much cheaper than ``np.cross`` for single vectors)."""
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def vee(S):
    """Inverse of :func:`hat` (uses the antisymmetric part)."""
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def exp_map(theta):
    """Rodrigues formula, Taylor-expanded for small angles."""
    theta = np.asarray(theta, dtype=float)
    phi2 = float(theta @ theta)
    K = hat(theta)
    if phi2 < _SMALL**2:
        a = 1.0 - phi2 / 6.0
        b = 0.5 - phi2 / 24.0
    else:
        phi = np.sqrt(phi2)
        a = np.sin(phi) / phi
        b = (1.0 - np.cos(phi)) / phi2
    return np.eye(3) + a * K + b * (K @ K)


def log_map(R):
    """Rotation vector of ``R`` with angle in [0, pi].

    Uses the antisymmetric-part formula away from 0 and pi, a series
    expansion near 0, and the dominant column of the symmetric part near pi.
    """
    R = np.asarray(R, dtype=float)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_phi = 0.5 * np.linalg.norm(w)
    cos_phi = 0.5 * (np.trace(R) - 1.0)
    phi = np.arctan2(sin_phi, cos_phi)
    if phi < _SMALL:
        # phi / (2 sin phi) ~ 1/2 + phi^2 / 12
        return (0.5 + phi**2 / 12.0) * w
    if phi < np.pi - 1e-3:
        return phi / (2.0 * sin_phi) * w
    # near pi the axis comes from the symmetric part: n n^T = (S - cos(phi) I) / (1 - cos(phi))
    B = 0.5 * (R + R.T) - cos_phi * np.eye(3)
    k = int(np.argmax(np.diag(B)))
    n = B[:, k] / np.linalg.norm(B[:, k])
    if n @ w < 0.0:
        n = -n
    phi = np.arctan2(0.5 * (n @ w), cos_phi)
    return phi * n


def _half_cot(x):
    """(x/2) cot(x/2), with its even series near 0."""
    if abs(x) < 1e-4:
        return 1.0 - x * x / 12.0 - x**4 / 720.0
    return 0.5 * x / np.tan(0.5 * x)


def a_map(theta):
    """The map A(theta) used to write d/dt Log in terms of body rates."""
    theta = np.asarray(theta, dtype=float)
    phi = norm3(theta)
    K = hat(theta)
    if phi < 1e-4:
        c1 = 0.5 - phi**2 / 24.0
        c2 = 1.0 / 6.0 - phi**2 / 120.0
    else:
        c1 = (1.0 - np.cos(phi)) / phi**2
        c2 = (1.0 - np.sin(phi) / phi) / phi**2
    return np.eye(3) + c1 * K + c2 * (K @ K)


def a_inv_t(theta):
    """A(theta)^{-T}: maps relative body rate to d/dt of the rotation vector.

    ``I + hat/2 + (1 - (phi/2) cot(phi/2)) hat^2 / phi^2``; the last
    coefficient tends to 1/12 as phi -> 0.
    """
    theta = np.asarray(theta, dtype=float)
    phi = norm3(theta)
    K = hat(theta)
    if phi < 1e-4:
        c2 = 1.0 / 12.0 + phi**2 / 720.0
    else:
        c2 = (1.0 - _half_cot(phi)) / phi**2
    return np.eye(3) + 0.5 * K + c2 * (K @ K)


def project_to_so3(M):
    """Nearest rotation in Frobenius norm (polar decomposition)."""
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def random_rotation(rng, max_angle=np.pi):
    """Rotation with uniform random axis and angle in [0, max_angle)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_map(axis * rng.uniform(0.0, max_angle))


def rotation_to_quaternion(R):
    """Scalar-first unit quaternion (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0.0 else -q


def quaternion_to_rotation(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
