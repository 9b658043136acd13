import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from linemanifold.manifold import (
    PoseSE3,
    circle_rotate,
    rotation_angle,
    se3_exp,
    se3_retract,
    skew,
    so3_exp,
    so3_log,
    sphere_exp,
    sphere_exp_jacobian,
    tangent_basis,
)

from conftest import random_unit

finite = st.floats(-3, 3, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)


def _unit_or_skip(v):
    n = np.linalg.norm(v)
    if n < 1e-3:
        return None
    return v / n


def test_tangent_basis_frozen_values():
    # z-axis: x has the smallest |component| (tie broken by lowest index)
    b = tangent_basis(np.array([0.0, 0.0, 1.0]))
    np.testing.assert_array_equal(b.b_x, [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(b.b_y, [0.0, 1.0, 0.0])
    b = tangent_basis(np.array([1.0, 0.0, 0.0]))
    np.testing.assert_array_equal(b.b_x, [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(b.b_y, [0.0, 0.0, 1.0])


@given(vec3)
def test_tangent_basis_is_right_handed_frame(v):
    u = _unit_or_skip(v)
    if u is None:
        return
    b = tangent_basis(u)
    F = np.column_stack((b.b_x, b.b_y, u))
    np.testing.assert_allclose(F.T @ F, np.eye(3), atol=1e-12)
    assert np.linalg.det(F) > 0


def test_tangent_basis_rejects_non_unit():
    with pytest.raises(ValueError):
        tangent_basis(np.array([0.0, 0.0, 2.0]))


def test_sphere_exp_quarter_turn():
    u = np.array([0.0, 0.0, 1.0])
    v = sphere_exp(u, np.array([np.pi / 2, 0.0, 0.0]))
    np.testing.assert_allclose(v, [1.0, 0.0, 0.0], atol=1e-15)


def test_sphere_exp_zero_is_identity():
    u = np.array([0.6, 0.0, 0.8])
    assert np.array_equal(sphere_exp(u, np.zeros(3)), u)


def test_sphere_exp_matches_geodesic_ode(rng):
    # oracle: integrate x'' = -|x'|^2 x on the sphere for unit time
    for _ in range(20):
        u = random_unit(rng)
        b = tangent_basis(u)
        dm = b.matrix @ rng.normal(scale=1.0, size=2)

        def f(_, y):
            x, v = y[:3], y[3:]
            return np.concatenate((v, -(v @ v) * x))

        sol = solve_ivp(f, (0, 1), np.concatenate((u, dm)), rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(sphere_exp(u, dm), sol.y[:3, -1], atol=1e-9)


def test_sphere_exp_rejects_non_tangent():
    with pytest.raises(ValueError):
        sphere_exp(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 0.1]))


@given(vec3, st.floats(-2, 2), st.floats(-2, 2))
def test_sphere_exp_norm_and_arc_length(v, a, b):
    u = _unit_or_skip(v)
    if u is None:
        return
    B = tangent_basis(u).matrix
    dm = B @ np.array([a, b])
    w = sphere_exp(u, dm)
    assert abs(np.linalg.norm(w) - 1.0) < 1e-12
    theta = np.hypot(a, b)
    if theta < np.pi - 1e-3:
        assert abs(np.arccos(np.clip(u @ w, -1, 1)) - theta) < 1e-7


def test_sphere_exp_jacobian_central_difference(rng):
    for _ in range(30):
        u = random_unit(rng)
        b = tangent_basis(u)
        dm = b.matrix @ rng.normal(scale=0.7, size=2)
        J = sphere_exp_jacobian(u, dm, b)
        h = 1e-6
        fd = np.column_stack(
            [(sphere_exp(u, dm + h * b.matrix[:, i]) - sphere_exp(u, dm - h * b.matrix[:, i])) / (2 * h) for i in range(2)]
        )
        assert np.linalg.norm(J - fd) <= 1e-6 * np.linalg.norm(fd)


def test_sphere_exp_jacobian_at_origin_is_basis():
    u = np.array([0.0, 1.0, 0.0])
    b = tangent_basis(u)
    np.testing.assert_allclose(sphere_exp_jacobian(u, np.zeros(3), b), b.matrix, atol=1e-15)


def test_circle_rotate_frozen():
    u1, u3 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(circle_rotate(u1, u3, np.pi / 2, 2.0), [0.0, 2.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(circle_rotate(u1, u3, 0.0, 3.0), [3.0, 0.0, 0.0])


def test_circle_rotate_rejects_bad_input():
    u1, u3 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        circle_rotate(u1, u3, 0.1, 0.0)
    with pytest.raises(ValueError):
        circle_rotate(u1, u1, 0.1, 1.0)


def test_skew_is_cross_product(rng):
    a, b = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b))


def test_so3_exp_matches_scipy(rng):
    w = rng.normal(size=(50, 3))
    np.testing.assert_allclose(so3_exp(w), Rotation.from_rotvec(w).as_matrix(), atol=1e-13)
    np.testing.assert_allclose(so3_log(so3_exp(w[:5] * 0.3)), w[:5] * 0.3, atol=1e-12)


def test_se3_exp_matches_matrix_exponential(rng):
    for _ in range(20):
        xi = rng.normal(size=6)
        A = np.zeros((4, 4))
        A[:3, :3] = skew(xi[:3])
        A[:3, 3] = xi[3:]
        np.testing.assert_allclose(se3_exp(xi).matrix(), expm(A), atol=1e-12)


def test_se3_retract_is_right_multiplication(rng):
    T = PoseSE3(so3_exp(rng.normal(size=3)), rng.normal(size=3))
    xi = rng.normal(size=6)
    np.testing.assert_allclose(se3_retract(T, xi).matrix(), T.matrix() @ se3_exp(xi).matrix(), atol=1e-12)
    assert se3_retract(T, np.zeros(6)) is T
    with pytest.raises(ValueError):
        se3_retract(T, np.array([np.nan, 0, 0, 0, 0, 0]))


def test_rotation_angle_small_and_large():
    assert rotation_angle(so3_exp(np.array([0.0, 0.0, 1e-9]))) == pytest.approx(1e-9, rel=1e-6)
    assert rotation_angle(so3_exp(np.array([0.0, 3.0, 0.0]))) == pytest.approx(3.0, abs=1e-12)


def test_pose_quaternion_roundtrip(rng):
    for _ in range(10):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        T = PoseSE3.from_quaternion(q, rng.normal(size=3))
        assert np.array_equal(T.quaternion(), q)  # cached storage form
        fresh = PoseSE3(T.R, T.t).quaternion()
        np.testing.assert_allclose(fresh, q if q[0] >= 0 else -q, atol=1e-12)


def test_pose_validation_and_inverse(rng):
    with pytest.raises(ValueError):
        PoseSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    T = PoseSE3(so3_exp(rng.normal(size=3)), rng.normal(size=3))
    np.testing.assert_allclose(T.compose(T.inverse()).matrix(), np.eye(4), atol=1e-12)
    assert T == PoseSE3(T.R.copy(), T.t.copy())
