"""Factor-graph container shared by the generator, the file format and the
solver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .factors import CameraIntrinsics
from .lines import EndpointLine, PluckerLine
from .manifold import PoseSE3


class GraphValidationError(ValueError):
    pass


def _empty_ids():
    return np.zeros((0, 2), dtype=np.int64)


@dataclass
class FactorGraph:
    """Poses ``T_wc``, point and line landmarks, parallel groups (lists of
    line ids) and pixel observations.

    Point observations are ``point_edge_ids[k] = (pose_id, point_id)`` with
    pixel ``point_edge_uv[k]``; line observations are
    ``line_edge_ids[k] = (pose_id, line_id)`` with segment
    ``line_edge_seg[k] = (us, vs, ue, ve)``.
    """

    camera: CameraIntrinsics
    image_size: tuple[int, int] = (640, 480)
    poses: dict[int, PoseSE3] = field(default_factory=dict)
    points: dict[int, np.ndarray] = field(default_factory=dict)
    lines: dict[int, PluckerLine] = field(default_factory=dict)
    groups: dict[int, list[int]] = field(default_factory=dict)
    point_edge_ids: np.ndarray = field(default_factory=_empty_ids)
    point_edge_uv: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    line_edge_ids: np.ndarray = field(default_factory=_empty_ids)
    line_edge_seg: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def with_state(self, poses=None, points=None, lines=None) -> "FactorGraph":
        """Copy with some vertex values replaced; observations are shared."""
        return replace(
            self,
            poses=dict(self.poses if poses is None else poses),
            points=dict(self.points if points is None else points),
            lines=dict(self.lines if lines is None else lines),
            groups={k: list(v) for k, v in self.groups.items()},
        )

    def group_of(self) -> dict[int, int]:
        return {lid: gid for gid, members in self.groups.items() for lid in members}

    def validate(self) -> None:
        ids = self.point_edge_ids
        if len(ids):
            bad = set(ids[:, 0].tolist()) - self.poses.keys()
            if bad:
                raise GraphValidationError(f"point observation references unknown pose {min(bad)}")
            bad = set(ids[:, 1].tolist()) - self.points.keys()
            if bad:
                raise GraphValidationError(f"point observation references unknown point {min(bad)}")
        ids = self.line_edge_ids
        if len(ids):
            bad = set(ids[:, 0].tolist()) - self.poses.keys()
            if bad:
                raise GraphValidationError(f"line observation references unknown pose {min(bad)}")
            bad = set(ids[:, 1].tolist()) - self.lines.keys()
            if bad:
                raise GraphValidationError(f"line observation references unknown line {min(bad)}")
        seen: set[int] = set()
        for gid, members in self.groups.items():
            if len(members) < 2:
                raise GraphValidationError(f"group {gid} has fewer than two members")
            for lid in members:
                if lid not in self.lines:
                    raise GraphValidationError(f"group {gid} references unknown line {lid}")
                if lid in seen:
                    raise GraphValidationError(f"line {lid} belongs to more than one group")
                seen.add(lid)


@dataclass
class GroundTruth:
    poses: dict[int, PoseSE3] = field(default_factory=dict)
    points: dict[int, np.ndarray] = field(default_factory=dict)
    lines: dict[int, PluckerLine] = field(default_factory=dict)
    groups: dict[int, list[int]] = field(default_factory=dict)
    # finite extents of the true lines; not part of the file format
    segments: dict[int, EndpointLine] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.poses or self.points or self.lines)
