import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from tailsitter.so3 import (a_inv_t, a_map, cross, exp_map, hat, log_map, project_to_so3,
                            quaternion_to_rotation, random_rotation, rotation_to_quaternion, vee)

vec3 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)


@given(vec3, vec3)
def test_hat_matches_cross(a, b):
    np.testing.assert_allclose(hat(a) @ b, np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(cross(a, b), np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(vee(hat(a)), a, atol=1e-15)


@given(vec3)
def test_exp_is_rotation(theta):
    R = exp_map(theta)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) > 0


def test_exp_log_identity_bulk(rng):
    worst = 0.0
    for _ in range(10_000):
        R = random_rotation(rng, np.pi - 0.05)
        worst = max(worst, np.max(np.abs(exp_map(log_map(R)) - R)))
    assert worst < 1e-9


def test_log_near_pi_and_zero():
    axis = np.array([1.0, 2.0, -2.0]) / 3.0
    for phi in (np.pi - 1e-7, np.pi - 1e-4, 1e-9, 1e-5, 0.0):
        th = log_map(exp_map(phi * axis))
        np.testing.assert_allclose(th, phi * axis, atol=1e-7)


def test_a_inv_t_is_inverse_transpose(rng):
    for _ in range(50):
        th = rng.normal(size=3) * rng.uniform(0, 2.5)
        np.testing.assert_allclose(a_inv_t(th) @ a_map(th).T, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(a_inv_t(np.full(3, 1e-6)) @ a_map(np.full(3, 1e-6)).T, np.eye(3), atol=1e-12)


def test_log_derivative_matches_finite_difference(rng):
    """d/dt Log(R^T R_r) = A^{-T}(dR) (w_r - Exp(-dR) w) along both flows."""
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        R = random_rotation(rng)
        dR = rng.normal(size=3)
        dR *= rng.uniform(0.0, 2.5) / np.linalg.norm(dR)
        Rr = R @ exp_map(dR)
        w, wr = rng.normal(size=3), rng.normal(size=3)

        def err(t):
            return log_map((R @ exp_map(w * t)).T @ (Rr @ exp_map(wr * t)))

        fd = (err(h) - err(-h)) / (2 * h)
        model = a_inv_t(dR) @ (wr - exp_map(-dR) @ w)
        worst = max(worst, np.max(np.abs(fd - model)))
    assert worst < 1e-5


def test_quaternion_round_trip(rng):
    for _ in range(200):
        R = random_rotation(rng)
        q = rotation_to_quaternion(R)
        assert q[0] >= 0
        np.testing.assert_allclose(np.linalg.norm(q), 1.0, atol=1e-14)
        np.testing.assert_allclose(quaternion_to_rotation(q), R, atol=1e-12)


def test_projection_recovers_rotation(rng):
    R = random_rotation(rng)
    noisy = R + 1e-4 * rng.normal(size=(3, 3))
    P = project_to_so3(noisy)
    np.testing.assert_allclose(P.T @ P, np.eye(3), atol=1e-13)
    np.testing.assert_allclose(P, R, atol=1e-3)
