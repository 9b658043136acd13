"""Differential-geometry primitives: sphere tangent bases and exponential
map, in-plane circle rotation, and SO(3)/SE(3) helpers.

Pose tangent vectors are ordered (rotation | translation) and applied on the
right: ``T <- T @ Exp(xi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

UNIT_TOL = 1e-6
TANGENT_TOL = 1e-6
_SMALL_ANGLE = 1e-8


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix; batched over leading axes."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _check_unit(u: np.ndarray, name: str = "u") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {u.shape}")
    if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} is not a unit vector (norm {np.linalg.norm(u):.3g})")
    return u


class TangentBasis(NamedTuple):
    b_x: np.ndarray
    b_y: np.ndarray
    base: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """The 3x2 matrix ``[b_x b_y]``."""
        return np.column_stack((self.b_x, self.b_y))


def tangent_basis_batch(u: np.ndarray) -> np.ndarray:
    """Right-handed tangent bases for an (N, 3) array of unit vectors.

    Returns an (N, 3, 2) array whose columns are b_x and b_y.  The seed axis
    is the coordinate axis least aligned with ``u`` (lowest index on ties).
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    k = np.argmin(np.abs(u), axis=1)
    seed = np.zeros_like(u)
    seed[np.arange(n), k] = 1.0
    bx = seed - np.sum(seed * u, axis=1, keepdims=True) * u
    bx /= np.linalg.norm(bx, axis=1, keepdims=True)
    by = np.cross(u, bx)
    return np.stack((bx, by), axis=2)


def tangent_basis(u: np.ndarray) -> TangentBasis:
    """Deterministic orthonormal basis of the plane orthogonal to ``u``,
    with ``b_x x b_y = u``."""
    u = _check_unit(u)
    B = tangent_basis_batch(u[None, :])[0]
    return TangentBasis(B[:, 0].copy(), B[:, 1].copy(), u.copy())


def sphere_exp_batch(u: np.ndarray, dm: np.ndarray) -> np.ndarray:
    """Row-wise sphere exponential; no tangency checking."""
    theta = np.linalg.norm(dm, axis=1)
    out = np.empty_like(u)
    small = theta < _SMALL_ANGLE
    big = ~small
    if np.any(big):
        th = theta[big][:, None]
        out[big] = u[big] * np.cos(th) + dm[big] * (np.sin(th) / th)
        out[big] /= np.linalg.norm(out[big], axis=1, keepdims=True)
    if np.any(small):
        th2 = (theta[small] ** 2)[:, None]
        v = u[small] * (1.0 - 0.5 * th2) + dm[small] * (1.0 - th2 / 6.0)
        zero = theta[small] == 0.0
        v[~zero] /= np.linalg.norm(v[~zero], axis=1, keepdims=True)
        out[small] = v
    return out


def _check_tangent(u: np.ndarray, dm: np.ndarray) -> np.ndarray:
    dm = np.asarray(dm, dtype=float)
    if dm.shape != (3,):
        raise ValueError(f"dm must be a 3-vector, got shape {dm.shape}")
    if abs(float(dm @ u)) > TANGENT_TOL:
        raise ValueError(f"dm is not tangent at u (dm.u = {float(dm @ u):.3g})")
    return dm


def sphere_exp(u: np.ndarray, dm: np.ndarray) -> np.ndarray:
    """Move along the great circle from ``u`` in direction ``dm`` by arc
    length ``|dm|``."""
    u = _check_unit(u)
    dm = _check_tangent(u, dm)
    return sphere_exp_batch(u[None, :], dm[None, :])[0]


def sphere_exp_jacobian(u: np.ndarray, dm: np.ndarray, basis: TangentBasis) -> np.ndarray:
    """Derivative of ``sphere_exp(u, dm + B @ dtheta)`` wrt ``dtheta`` (3x2)."""
    u = _check_unit(u)
    dm = _check_tangent(u, dm)
    B = basis.matrix
    delta = float(np.linalg.norm(dm))
    if delta < _SMALL_ANGLE:
        D = np.eye(3) - np.outer(u, dm)
    else:
        m = dm / delta
        mm = np.outer(m, m)
        s, c = np.sin(delta), np.cos(delta)
        D = -s * np.outer(u, m) + c * mm + (s / delta) * (np.eye(3) - mm)
    return D @ B


def circle_rotate(u1: np.ndarray, u3: np.ndarray, dgamma: float, lam: float) -> np.ndarray:
    """Rotate ``u1`` towards ``u3`` by ``dgamma`` inside span{u1, u3} and
    scale the result to length ``lam``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    u1 = np.asarray(u1, dtype=float)
    u3 = np.asarray(u3, dtype=float)
    if abs(float(u1 @ u3)) > TANGENT_TOL:
        raise ValueError("u1 and u3 are not orthogonal")
    return lam * (np.cos(dgamma) * u1 + np.sin(dgamma) * u3)


# --- SO(3) / SE(3) -----------------------------------------------------------


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula, batched over leading axes."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)[..., None, None]
    W = skew(w)
    WW = W @ W
    small = th < 1e-6
    th_safe = np.where(small, 1.0, th)
    A = np.where(small, 1.0 - th**2 / 6.0, np.sin(th_safe) / th_safe)
    Bc = np.where(small, 0.5 - th**2 / 24.0, (1.0 - np.cos(th_safe)) / th_safe**2)
    return np.eye(3) + A * W + Bc * WW


def so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (batched)."""
    from scipy.spatial.transform import Rotation

    R = np.asarray(R, dtype=float)
    return Rotation.from_matrix(R).as_rotvec()


def so3_left_jacobian(w: np.ndarray) -> np.ndarray:
    """Left Jacobian of SO(3), batched; maps nu to the SE(3) translation."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)[..., None, None]
    W = skew(w)
    small = th < 1e-6
    th_safe = np.where(small, 1.0, th)
    A = np.where(small, 0.5 - th**2 / 24.0, (1.0 - np.cos(th_safe)) / th_safe**2)
    Bc = np.where(small, 1.0 / 6.0 - th**2 / 120.0, (th_safe - np.sin(th_safe)) / th_safe**3)
    return np.eye(3) + A * W + Bc * (W @ W)


def se3_retract_batch(R: np.ndarray, t: np.ndarray, xi: np.ndarray):
    """Right-multiply (N,3,3)/(N,3) poses by Exp of (N,6) increments."""
    w, v = xi[:, :3], xi[:, 3:]
    dR = so3_exp(w)
    dt = np.einsum("nij,nj->ni", so3_left_jacobian(w), v)
    return R @ dR, t + np.einsum("nij,nj->ni", R, dt)


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Geodesic angle (radians) of rotation matrices, batched."""
    R = np.asarray(R, dtype=float)
    c = (np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0
    # arccos is ill-conditioned near 0; use the skew part for accuracy
    s = np.linalg.norm(
        np.stack(
            (
                R[..., 2, 1] - R[..., 1, 2],
                R[..., 0, 2] - R[..., 2, 0],
                R[..., 1, 0] - R[..., 0, 1],
            ),
            axis=-1,
        ),
        axis=-1,
    ) / 2.0
    return np.arctan2(s, c)


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``T_wc`` (camera to world).

    ``quat`` caches the (qw, qx, qy, qz) storage form a pose was read from, so
    that writing it back reproduces the same digits.
    """

    R: np.ndarray
    t: np.ndarray
    quat: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("pose needs a 3x3 rotation and a 3-vector translation")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or np.linalg.det(R) < 0:
            raise ValueError("pose rotation is not in SO(3)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quaternion(cls, q_wxyz, t) -> "PoseSE3":
        from scipy.spatial.transform import Rotation

        q = np.asarray(q_wxyz, dtype=float)
        R = Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
        return cls(R, np.asarray(t, dtype=float), quat=q.copy())

    def quaternion(self) -> np.ndarray:
        """(qw, qx, qy, qz) with qw >= 0."""
        if self.quat is not None:
            return self.quat
        from scipy.spatial.transform import Rotation

        x, y, z, w = Rotation.from_matrix(self.R).as_quat()
        q = np.array([w, x, y, z])
        return -q if w < 0 else q

    def inverse(self) -> "PoseSE3":
        return PoseSE3(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        return PoseSE3(self.R @ other.R, self.R @ other.t + self.t)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoseSE3):
            return NotImplemented
        return np.array_equal(self.R, other.R) and np.array_equal(self.t, other.t)

    __hash__ = None  # type: ignore[assignment]


def se3_exp(xi: np.ndarray) -> PoseSE3:
    xi = np.asarray(xi, dtype=float)
    w, v = xi[:3], xi[3:]
    return PoseSE3(so3_exp(w), so3_left_jacobian(w) @ v)


def se3_retract(pose: PoseSE3, xi: np.ndarray) -> PoseSE3:
    """``pose @ Exp(xi)`` with ``xi = (omega, nu)``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (6,) or not np.all(np.isfinite(xi)):
        raise ValueError("xi must be a finite 6-vector")
    if not np.any(xi):
        return pose
    return pose.compose(se3_exp(xi))
