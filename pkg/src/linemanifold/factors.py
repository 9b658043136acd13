"""Residuals and analytic Jacobians for point and line reprojection, the
explicit parallelism constraint, and the Cauchy robust loss.

All residuals are in pixels.  Poses are ``T_wc`` (camera to world) and are
perturbed on the right, tangent order (rotation | translation).  The batched
``*_terms`` kernels are what the solver calls; the per-observation functions
wrap them with a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lines import (
    OrthonormalLine,
    PluckerLine,
    RiemanLine,
    orthonormal_plucker_arrays,
    orthonormal_tangent_jacobian,
    rieman_tangent_jacobian,
)
from .manifold import PoseSE3, skew

MIN_DEPTH = 1e-9
MIN_LINE_NORM = 1e-12


class BehindCameraError(ValueError):
    pass


class DegenerateProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class PointObservation:
    pose_id: int
    point_id: int
    pixel: np.ndarray


@dataclass(frozen=True)
class LineObservation:
    pose_id: int
    line_id: int
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        if np.linalg.norm(np.subtract(self.start, self.end)) <= 0.5:
            raise ValueError("observed segment endpoints closer than 0.5 px")


@dataclass(frozen=True)
class RobustLoss:
    kind: str = "cauchy"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "cauchy"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "cauchy" and not self.scale > 0:
            raise ValueError("Cauchy scale must be positive")


def robust_weight(loss: RobustLoss, squared_norm):
    """``(rho(s), rho'(s))``; works elementwise on arrays."""
    s = np.asarray(squared_norm, dtype=float)
    if loss.kind == "none":
        return s * 1.0, np.ones_like(s)
    c2 = loss.scale**2
    return c2 * np.log1p(s / c2), 1.0 / (1.0 + s / c2)


# --- points ------------------------------------------------------------------


def point_terms(R_wc, t_wc, P, uv, K: CameraIntrinsics):
    """Batched point reprojection.

    Returns residuals (N,2), d r/d pose (N,2,6), d r/d point (N,2,3) and a
    mask of observations with positive depth.
    """
    R_cw = np.swapaxes(R_wc, -1, -2)
    Pc = np.einsum("nij,nj->ni", R_cw, P - t_wc)
    z = Pc[:, 2]
    valid = z > MIN_DEPTH
    zs = np.where(valid, z, 1.0)
    x, y = Pc[:, 0] / zs, Pc[:, 1] / zs
    r = np.stack((K.fx * x + K.cx, K.fy * y + K.cy), axis=1) - uv
    dproj = np.zeros((len(z), 2, 3))
    dproj[:, 0, 0] = K.fx / zs
    dproj[:, 0, 2] = -K.fx * x / zs
    dproj[:, 1, 1] = K.fy / zs
    dproj[:, 1, 2] = -K.fy * y / zs
    J_pose = np.concatenate((dproj @ skew(Pc), -dproj), axis=2)
    J_point = dproj @ R_cw
    return r, J_pose, J_point, valid


def _single_point(obs, pose, point, K):
    r, Jp, Jx, valid = point_terms(
        pose.R[None], pose.t[None], np.asarray(point, float)[None],
        np.asarray(obs.pixel, float)[None], K,
    )
    if not valid[0]:
        raise BehindCameraError("point has nonpositive depth in the camera")
    return r[0], Jp[0], Jx[0]


def point_residual(obs: PointObservation, pose: PoseSE3, point, K: CameraIntrinsics) -> np.ndarray:
    return _single_point(obs, pose, point, K)[0]


def point_jacobians(obs: PointObservation, pose: PoseSE3, point, K: CameraIntrinsics):
    """(d r/d pose 2x6, d r/d point 2x3)."""
    _, Jp, Jx = _single_point(obs, pose, point, K)
    return Jp, Jx


# --- lines -------------------------------------------------------------------


def line_projection_matrix(K: CameraIntrinsics) -> np.ndarray:
    """Maps a camera-frame moment to the homogeneous image line in pixels."""
    return np.array(
        [
            [K.fy, 0.0, 0.0],
            [0.0, K.fx, 0.0],
            [-K.fy * K.cx, -K.fx * K.cy, K.fx * K.fy],
        ]
    )


def transform_plucker(T: PoseSE3, L: PluckerLine) -> PluckerLine:
    """Apply the rigid motion ``x -> T.R x + T.t`` to a Plücker line."""
    d = T.R @ L.d
    return PluckerLine(T.R @ L.n + np.cross(T.t, d), d)


def line_terms(R_wc, t_wc, n_w, d_w, segments, K: CameraIntrinsics):
    """Batched line reprojection against observed segments (N,4) = (us, vs, ue, ve).

    Returns residuals (N,2), d r/d pose (N,2,6), d r/d (n_w, d_w) (N,2,6), and
    a mask of non-degenerate projections.
    """
    R_cw = np.swapaxes(R_wc, -1, -2)
    m = n_w - np.cross(t_wc, d_w)
    n_c = np.einsum("nij,nj->ni", R_cw, m)
    d_c = np.einsum("nij,nj->ni", R_cw, d_w)
    Kl = line_projection_matrix(K)
    l = n_c @ Kl.T
    s = np.hypot(l[:, 0], l[:, 1])
    valid = s > MIN_LINE_NORM
    s = np.where(valid, s, 1.0)
    N = len(s)
    ps = np.column_stack((segments[:, 0], segments[:, 1], np.ones(N)))
    pe = np.column_stack((segments[:, 2], segments[:, 3], np.ones(N)))
    es = np.sum(ps * l, axis=1)
    ee = np.sum(pe * l, axis=1)
    r = np.column_stack((es, ee)) / s[:, None]
    l12 = np.column_stack((l[:, 0], l[:, 1], np.zeros(N)))
    dr_dl = np.stack(
        (ps / s[:, None] - (es / s**3)[:, None] * l12, pe / s[:, None] - (ee / s**3)[:, None] * l12),
        axis=1,
    )
    dr_dnc = dr_dl @ Kl
    J_pose = np.concatenate((dr_dnc @ skew(n_c), dr_dnc @ skew(d_c)), axis=2)
    dr_dn = dr_dnc @ R_cw
    dr_dd = -dr_dn @ skew(t_wc)
    J_L = np.concatenate((dr_dn, dr_dd), axis=2)
    return r, J_pose, J_L, valid


def _single_line(obs, line_w, pose, K):
    seg = np.concatenate((np.asarray(obs.start, float), np.asarray(obs.end, float)))
    r, Jp, JL, valid = line_terms(pose.R[None], pose.t[None], line_w.n[None], line_w.d[None], seg[None], K)
    if not valid[0]:
        raise DegenerateProjectionError("line projects through the optical centre")
    return r[0], Jp[0], JL[0]


def line_residual(obs: LineObservation, line_w: PluckerLine, pose: PoseSE3, K: CameraIntrinsics) -> np.ndarray:
    """Signed pixel distances of the observed endpoints to the projected line."""
    return _single_line(obs, line_w, pose, K)[0]


def line_jacobian_pose(obs: LineObservation, line_w: PluckerLine, pose: PoseSE3, K: CameraIntrinsics) -> np.ndarray:
    return _single_line(obs, line_w, pose, K)[1]


def line_jacobian_plucker(obs: LineObservation, line_w: PluckerLine, pose: PoseSE3, K: CameraIntrinsics) -> np.ndarray:
    """d r/d (n_w, d_w), 2x6."""
    return _single_line(obs, line_w, pose, K)[2]


def line_jacobian_rieman(obs: LineObservation, r: RiemanLine, pose: PoseSE3, K: CameraIntrinsics):
    """(J_theta 2x2, J_gamma 2x1, J_scale 2x1) at the tangent origin."""
    L = PluckerLine(r.omega * r.u1, r.u2)
    JL = line_jacobian_plucker(obs, L, pose, K)
    J = JL @ rieman_tangent_jacobian(r.u2[None], r.u1[None], np.array([r.omega]), np.array([0]))[0]
    return J[:, :2], J[:, 2:3], J[:, 3:4]


def line_jacobian_orthonormal(obs: LineObservation, o: OrthonormalLine, pose: PoseSE3, K: CameraIntrinsics) -> np.ndarray:
    """d r/d (rho, phi), 2x4."""
    n, d = orthonormal_plucker_arrays(o.U[None], o.W[None])
    JL = line_jacobian_plucker(obs, PluckerLine(n[0], d[0]), pose, K)
    return JL @ orthonormal_tangent_jacobian(o.U[None], o.W[None])[0]


# --- parallelism -------------------------------------------------------------


def parallel_residual(directions, i: int) -> float:
    """Mean of ``1 - u_i . u_j`` over the other directions of a group."""
    U = np.asarray(directions, dtype=float)
    if U.ndim != 2 or U.shape[0] < 2:
        raise ValueError("parallelism needs at least two directions")
    N = U.shape[0]
    dots = U @ U[i]
    return float((np.sum(1.0 - dots) - (1.0 - dots[i])) / (N - 1))


def parallel_jacobian(directions, i: int) -> np.ndarray:
    """Gradient of :func:`parallel_residual` wrt every direction, (N, 3)."""
    U = np.asarray(directions, dtype=float)
    N = U.shape[0]
    G = np.tile(-U[i] / (N - 1), (N, 1))
    G[i] = -(np.sum(U, axis=0) - U[i]) / (N - 1)
    return G
