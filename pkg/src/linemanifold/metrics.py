"""Trajectory and line accuracy metrics.

Trajectories are aligned by a rigid (no scale) least-squares fit of camera
centres.  Angles are reported in degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factors import transform_plucker
from .lines import PluckerLine
from .manifold import PoseSE3, rotation_angle


class InsufficientDataError(ValueError):
    pass


def align_points(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation R and translation t minimizing ``sum |R src_i + t - dst_i|^2``."""
    src = np.asarray(src, float)
    dst = np.asarray(dst, float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("need matching (N, 3) arrays")
    if len(src) < 3:
        raise InsufficientDataError("alignment needs at least 3 poses")
    ms, md = src.mean(axis=0), dst.mean(axis=0)
    C = (dst - md).T @ (src - ms)
    U, _, Vt = np.linalg.svd(C)
    S = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    R = U @ S @ Vt
    return R, md - R @ ms


def _matched(est: dict[int, PoseSE3], gt: dict[int, PoseSE3]) -> list[int]:
    ids = sorted(set(est) & set(gt))
    if len(ids) < 3:
        raise InsufficientDataError("alignment needs at least 3 poses matched by id")
    return ids


def align_trajectories(est: dict[int, PoseSE3], gt: dict[int, PoseSE3]) -> PoseSE3:
    """Rigid transform taking estimated camera centres onto the ground truth."""
    ids = _matched(est, gt)
    R, t = align_points(np.array([est[i].t for i in ids]), np.array([gt[i].t for i in ids]))
    return PoseSE3(R, t)


@dataclass(frozen=True)
class TrajectoryMetrics:
    ate_rmse: float
    ate_median: float
    rot_rmse: float
    rot_median: float


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else 0.0


def trajectory_errors(est, gt, alignment: PoseSE3 | None = None):
    """Per-pose translation error (m) and rotation error (deg) after alignment."""
    ids = _matched(est, gt)
    A = alignment or align_trajectories(est, gt)
    Pe = np.array([est[i].t for i in ids]) @ A.R.T + A.t
    Pg = np.array([gt[i].t for i in ids])
    Re = A.R @ np.stack([est[i].R for i in ids])
    Rg = np.stack([gt[i].R for i in ids])
    trans = np.linalg.norm(Pe - Pg, axis=1)
    rot = np.degrees(rotation_angle(Re @ np.swapaxes(Rg, 1, 2)))
    return ids, trans, rot


def trajectory_metrics(est, gt, alignment: PoseSE3 | None = None) -> TrajectoryMetrics:
    _, trans, rot = trajectory_errors(est, gt, alignment)
    return TrajectoryMetrics(_rms(trans), float(np.median(trans)), _rms(rot), float(np.median(rot)))


def ate(est, gt) -> float:
    return trajectory_metrics(est, gt).ate_rmse


@dataclass(frozen=True)
class ErrorSummary:
    mean: float
    median: float
    std: float
    rmse: float

    @classmethod
    def of(cls, x) -> "ErrorSummary":
        x = np.asarray(x, float)
        if not len(x):
            return cls(0.0, 0.0, 0.0, 0.0)
        return cls(float(np.mean(x)), float(np.median(x)), float(np.std(x)), _rms(x))


@dataclass(frozen=True)
class LineMetrics:
    ids: list[int]
    direction_errors: np.ndarray
    normal_errors: np.ndarray
    excluded: int

    @property
    def direction(self) -> ErrorSummary:
        return ErrorSummary.of(self.direction_errors)

    @property
    def normal(self) -> ErrorSummary:
        return ErrorSummary.of(self.normal_errors)


def _angle_deg(a, b):
    c = np.abs(np.sum(a * b, axis=-1)) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.degrees(np.arccos(np.clip(c, 0.0, 1.0)))


def line_metrics(
    est: dict[int, PluckerLine], gt: dict[int, PluckerLine], alignment: PoseSE3 | None = None
) -> LineMetrics:
    """Unoriented direction and unit-moment angles per line matched by id.

    Lines through the origin (zero moment) on either side are skipped and
    counted in ``excluded``.
    """
    ids, dirs, nrms, excluded = [], [], [], 0
    for i in sorted(set(est) & set(gt)):
        e = est[i] if alignment is None else transform_plucker(alignment, est[i])
        g = gt[i]
        if any(np.linalg.norm(L.n) <= 1e-9 * np.linalg.norm(L.d) for L in (e, g)):
            excluded += 1
            continue
        ids.append(i)
        dirs.append(_angle_deg(e.d, g.d))
        nrms.append(_angle_deg(e.n, g.n))
    return LineMetrics(ids, np.array(dirs), np.array(nrms), excluded)


def cdf(errors) -> tuple[np.ndarray, np.ndarray]:
    """Sorted errors and their cumulative fractions, ending at 1."""
    x = np.sort(np.asarray(errors, float))
    return x, np.arange(1, len(x) + 1) / max(len(x), 1)
