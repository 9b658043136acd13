"""Plain-text graph files and ``key = value`` solver/scene configuration.

Graph grammar, one whitespace-separated record per line::

    FORMAT rieman-graph 1
    CAMERA fx fy cx cy width height
    VERTEX_POSE id qw qx qy qz tx ty tz      # camera-to-world, unit quaternion
    VERTEX_POINT id x y z
    VERTEX_LINE id nx ny nz dx dy dz         # Plücker, n.d = 0
    GROUP id line_id line_id ...
    EDGE_POINT pose_id point_id u v
    EDGE_LINE pose_id line_id us vs ue ve
    GT_POSE / GT_POINT / GT_LINE             # same fields as the VERTEX records

Blank lines and lines starting with ``#`` are ignored on input.  The
canonical form written by :func:`write_graph` lists the header, then
records in the kind order above, each sorted by id (edges by pose then
landmark), with reals printed by ``repr`` and LF line endings.
"""

from __future__ import annotations

import math
import re
from dataclasses import replace

import numpy as np

from .factors import CameraIntrinsics, RobustLoss
from .graph import FactorGraph, GroundTruth
from .lines import PLUCKER_TOL, PluckerLine
from .manifold import PoseSE3
from .solver import Method, SolveConfig
from .synth import PerturbScales, SceneSpec

FORMAT_NAME = "rieman-graph"
FORMAT_VERSION = 1
QUAT_TOL = 1e-6

_ARITY = {
    "FORMAT": 2,
    "CAMERA": 6,
    "VERTEX_POSE": 8,
    "VERTEX_POINT": 4,
    "VERTEX_LINE": 7,
    "EDGE_POINT": 4,
    "EDGE_LINE": 6,
    "GT_POSE": 8,
    "GT_POINT": 4,
    "GT_LINE": 7,
}


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class ConfigError(ValueError):
    pass


# --- reading -------------------------------------------------------------------


class _Record:
    """Fields of one input line; columns are recovered only for diagnostics."""

    __slots__ = ("line", "raw", "f")

    def __init__(self, line: int, raw: str, fields: list[str]):
        self.line, self.raw, self.f = line, raw, fields

    @property
    def kind(self) -> str:
        return self.f[0]

    def __len__(self):
        return len(self.f)

    def column(self, i: int) -> int:
        starts = [m.start() + 1 for m in re.finditer(r"\S+", self.raw)]
        return starts[i] if i < len(starts) else len(self.raw) + 1

    def fail(self, i: int, msg: str):
        raise GraphFormatError(msg, self.line, self.column(i))

    def int(self, i: int) -> int:
        try:
            v = int(self.f[i])
        except ValueError:
            self.fail(i, f"expected an integer, got {self.f[i]!r}")
        if v < 0:
            self.fail(i, f"ids must be non-negative, got {v}")
        return v

    def reals(self, i: int, j: int) -> list[float]:
        try:
            out = [float(x) for x in self.f[i:j]]
        except ValueError:
            out = None
        if out is None or not all(map(math.isfinite, out)):
            for k in range(i, j):
                try:
                    v = float(self.f[k])
                except ValueError:
                    self.fail(k, f"expected a real number, got {self.f[k]!r}")
                if not math.isfinite(v):
                    self.fail(k, f"non-finite number {self.f[k]!r}")
        return out


def _records(text: str):
    for ln, raw in enumerate(text.split("\n"), start=1):
        fields = raw.split()
        if fields and not fields[0].startswith("#"):
            yield _Record(ln, raw, fields)


def _pose(r: _Record) -> PoseSE3:
    v = r.reals(2, 9)
    q = np.array(v[:4])
    if abs(np.linalg.norm(q) - 1.0) > QUAT_TOL:
        r.fail(2, f"quaternion norm {np.linalg.norm(q):.9g} differs from 1 by more than {QUAT_TOL}")
    return PoseSE3.from_quaternion(q, np.array(v[4:]))


def _line(r: _Record) -> PluckerLine:
    v = r.reals(2, 8)
    n, d = np.array(v[:3]), np.array(v[3:])
    dn = np.linalg.norm(d)
    if dn == 0:
        r.fail(5, "line direction is zero")
    if abs(n @ d) > PLUCKER_TOL * np.linalg.norm(n) * dn:
        r.fail(2, f"Plücker constraint violated: n.d = {n @ d:.3g}")
    return PluckerLine(n, d)


_VERTEX_KINDS = ("VERTEX_POSE", "VERTEX_POINT", "VERTEX_LINE", "GT_POSE", "GT_POINT", "GT_LINE")


def read_graph(text: str) -> tuple[FactorGraph, GroundTruth | None]:
    """Parse a graph document; raises :class:`GraphFormatError` on the first
    problem, with its line and column."""
    records = list(_records(text))
    if not records or records[0].kind != "FORMAT":
        (records[0] if records else _Record(1, "", [""])).fail(0, "document must start with 'FORMAT rieman-graph 1'")

    camera = None
    image_size = (640, 480)
    vert: dict[str, dict[int, object]] = {k: {} for k in _VERTEX_KINDS}
    groups: dict[int, list[int]] = {}
    group_recs: list[tuple[int, _Record]] = []
    pe_rec, pe_ids, pe_uv = [], [], []
    le_rec, le_ids, le_seg = [], [], []

    for idx, r in enumerate(records):
        k = r.kind
        if k == "EDGE_POINT" and len(r) == 5:
            pe_rec.append(r)
            pe_ids.append((r.int(1), r.int(2)))
            pe_uv.append(r.reals(3, 5))
            continue
        if k == "EDGE_LINE" and len(r) == 7:
            seg = r.reals(3, 7)
            if math.hypot(seg[0] - seg[2], seg[1] - seg[3]) <= 0.5:
                r.fail(3, "observed segment endpoints closer than 0.5 px")
            le_rec.append(r)
            le_ids.append((r.int(1), r.int(2)))
            le_seg.append(seg)
            continue
        if k == "FORMAT" and idx != 0:
            r.fail(0, "FORMAT may only appear once, as the first record")
        if k == "GROUP":
            if len(r) < 4:
                r.fail(0, "GROUP needs an id and at least two member lines")
        elif k in _ARITY:
            if len(r) - 1 != _ARITY[k]:
                r.fail(_ARITY[k] + 1 if len(r) - 1 > _ARITY[k] else 0, f"{k} expects {_ARITY[k]} fields, got {len(r) - 1}")
        else:
            r.fail(0, f"unknown record type {k!r}")

        if k == "FORMAT":
            if r.f[1] != FORMAT_NAME:
                r.fail(1, f"unknown format {r.f[1]!r}")
            if r.f[2] != str(FORMAT_VERSION):
                r.fail(2, f"unsupported version {r.f[2]!r}; expected {FORMAT_VERSION}")
        elif k == "CAMERA":
            if camera is not None:
                r.fail(0, "duplicate CAMERA record")
            fx, fy, cx, cy = r.reals(1, 5)
            if not (fx > 0 and fy > 0):
                r.fail(1, "focal lengths must be positive")
            camera = CameraIntrinsics(fx, fy, cx, cy)
            image_size = (r.int(5), r.int(6))
        elif k in vert:
            i = r.int(1)
            if i in vert[k]:
                r.fail(1, f"duplicate {k} id {i}")
            if k.endswith("POSE"):
                vert[k][i] = _pose(r)
            elif k.endswith("POINT"):
                vert[k][i] = np.array(r.reals(2, 5))
            else:
                vert[k][i] = _line(r)
        elif k == "GROUP":
            gid = r.int(1)
            if gid in groups:
                r.fail(1, f"duplicate GROUP id {gid}")
            groups[gid] = [r.int(j) for j in range(2, len(r))]
            group_recs.append((gid, r))

    if camera is None:
        records[0].fail(0, "missing CAMERA record")

    poses, points, lines = vert["VERTEX_POSE"], vert["VERTEX_POINT"], vert["VERTEX_LINE"]
    seen: dict[int, int] = {}
    for gid, r in group_recs:
        for j, lid in enumerate(groups[gid], start=2):
            if lid not in lines:
                r.fail(j, f"group {gid} references undeclared line {lid}")
            if lid in seen:
                r.fail(j, f"line {lid} already belongs to group {seen[lid]}")
            seen[lid] = gid
    for r, (p, x) in zip(pe_rec, pe_ids):
        if p not in poses:
            r.fail(1, f"EDGE_POINT references undeclared pose {p}")
        if x not in points:
            r.fail(2, f"EDGE_POINT references undeclared point {x}")
    for r, (p, l) in zip(le_rec, le_ids):
        if p not in poses:
            r.fail(1, f"EDGE_LINE references undeclared pose {p}")
        if l not in lines:
            r.fail(2, f"EDGE_LINE references undeclared line {l}")

    graph = FactorGraph(
        camera=camera,
        image_size=image_size,
        poses=poses,
        points=points,
        lines=lines,
        groups=groups,
        point_edge_ids=np.array(pe_ids, dtype=np.int64).reshape(-1, 2),
        point_edge_uv=np.array(pe_uv, dtype=float).reshape(-1, 2),
        line_edge_ids=np.array(le_ids, dtype=np.int64).reshape(-1, 2),
        line_edge_seg=np.array(le_seg, dtype=float).reshape(-1, 4),
    )
    gt = GroundTruth(
        poses=vert["GT_POSE"], points=vert["GT_POINT"], lines=vert["GT_LINE"],
        groups={k: list(v) for k, v in groups.items()},
    )
    return graph, (None if gt.is_empty() else gt)


# --- writing -------------------------------------------------------------------


def _r(x) -> str:
    return repr(float(x))


def _pose_fields(p: PoseSE3) -> str:
    return " ".join(_r(v) for v in (*p.quaternion(), *p.t))


def _vertex_records(tag: str, poses, points, lines) -> list[str]:
    out = [f"{tag}_POSE {i} {_pose_fields(poses[i])}" for i in sorted(poses)]
    out += [f"{tag}_POINT {i} " + " ".join(_r(v) for v in points[i]) for i in sorted(points)]
    out += [
        f"{tag}_LINE {i} " + " ".join(_r(v) for v in (*lines[i].n, *lines[i].d)) for i in sorted(lines)
    ]
    return out


def write_graph(graph: FactorGraph, ground_truth: GroundTruth | None = None) -> str:
    """Canonical text of a graph and optional ground truth."""
    K = graph.camera
    w, h = graph.image_size
    out = [
        f"FORMAT {FORMAT_NAME} {FORMAT_VERSION}",
        f"CAMERA {_r(K.fx)} {_r(K.fy)} {_r(K.cx)} {_r(K.cy)} {int(w)} {int(h)}",
    ]
    out += _vertex_records("VERTEX", graph.poses, graph.points, graph.lines)
    out += [f"GROUP {g} " + " ".join(str(int(l)) for l in graph.groups[g]) for g in sorted(graph.groups)]
    ids = graph.point_edge_ids
    for k in np.lexsort((ids[:, 1], ids[:, 0])) if len(ids) else []:
        u, v = graph.point_edge_uv[k]
        out.append(f"EDGE_POINT {ids[k, 0]} {ids[k, 1]} {_r(u)} {_r(v)}")
    ids = graph.line_edge_ids
    for k in np.lexsort((ids[:, 1], ids[:, 0])) if len(ids) else []:
        out.append(f"EDGE_LINE {ids[k, 0]} {ids[k, 1]} " + " ".join(_r(v) for v in graph.line_edge_seg[k]))
    if ground_truth is not None:
        out += _vertex_records("GT", ground_truth.poses, ground_truth.points, ground_truth.lines)
    return "\n".join(out) + "\n"


def load_graph(path) -> tuple[FactorGraph, GroundTruth | None]:
    with open(path, encoding="utf-8", newline="") as f:
        return read_graph(f.read())


def save_graph(path, graph: FactorGraph, ground_truth: GroundTruth | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(write_graph(graph, ground_truth))


# --- configuration -------------------------------------------------------------

# key -> (section, field, parser)
_CONFIG_KEYS = {
    "method": ("solve", "method", Method.parse),
    "max_iterations": ("solve", "max_iterations", int),
    "damping": ("solve", "initial_damping", float),
    "damping.up": ("solve", "damping_up", float),
    "damping.down": ("solve", "damping_down", float),
    "damping.max": ("solve", "max_damping", float),
    "convergence.rel_decrease": ("solve", "rel_decrease", float),
    "convergence.step_norm": ("solve", "step_norm", float),
    "loss.kind": ("loss", "kind", str),
    "loss.scale": ("loss", "scale", float),
    "parallel.weight": ("solve", "parallel_weight", float),
    "gauge.poses": ("solve", "gauge_poses", int),
    "prune.min_observations": ("solve", "min_observations", int),
    "seed": ("scene", "seed", int),
    "scene.archetype": ("scene", "archetype", str),
    "scene.n_poses": ("scene", "n_poses", int),
    "scene.n_points": ("scene", "n_points", int),
    "scene.n_lines": ("scene", "n_lines", int),
    "scene.n_groups": ("scene", "n_groups", int),
    "scene.group_sizes": ("scene", "group_sizes", lambda s: tuple(int(x) for x in s.split(","))),
    "scene.max_retries": ("scene", "max_retries", int),
    "noise.pixel_sigma": ("scene", "pixel_noise_sigma", float),
    "perturb.rotation": ("perturb", "rotation", float),
    "perturb.translation": ("perturb", "translation", float),
    "perturb.landmark": ("perturb", "landmark", float),
    "perturb.line_angle": ("perturb", "line_angle", float),
    "perturb.anchor_poses": ("perturb", "anchor_poses", int),
    "camera.fx": ("camera", "fx", float),
    "camera.fy": ("camera", "fy", float),
    "camera.cx": ("camera", "cx", float),
    "camera.cy": ("camera", "cy", float),
    "camera.width": ("image", 0, int),
    "camera.height": ("image", 1, int),
}

CONFIG_KEYS = tuple(_CONFIG_KEYS)


def read_config(text: str) -> tuple[SolveConfig, SceneSpec]:
    """Solver configuration and scene defaults from ``key = value`` lines.

    Unknown keys, repeated keys, unparsable values and out-of-range values
    raise :class:`ConfigError` naming the line.
    """
    vals: dict[str, dict] = {s: {} for s in ("solve", "loss", "scene", "perturb", "camera", "image")}
    seen: dict[str, int] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {ln}: key {key!r} already set on line {seen[key]}")
        seen[key] = ln
        section, name, parse = _CONFIG_KEYS[key]
        try:
            vals[section][name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"line {ln}: bad value for {key!r}: {exc}") from None

    try:
        solve_cfg = SolveConfig(loss=RobustLoss(**vals["loss"]), **vals["solve"])
        base = SceneSpec.__dataclass_fields__
        cam = replace(base["camera"].default_factory(), **vals["camera"])
        size = list(base["image_size"].default)
        for i, v in vals["image"].items():
            size[i] = v
        scene = SceneSpec(
            perturb=PerturbScales(**vals["perturb"]), camera=cam, image_size=tuple(size), **vals["scene"]
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return solve_cfg, scene
