"""Deterministic synthetic scenes: sphere, box and corridor worlds with
rendered, noisy point and segment observations and a perturbed initial graph.

Randomness comes from numpy's Philox-4x64 counter-based generator.  Stream
``s`` of a scene is seeded with ``SeedSequence([seed, s])``; per-pose
observation noise uses ``SeedSequence([seed, 2, pose_index])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factors import CameraIntrinsics, point_terms
from .graph import FactorGraph, GroundTruth
from .lines import EndpointLine, PluckerLine, rieman_from_plucker, rieman_retract_arrays
from .manifold import PoseSE3, se3_retract_batch

ARCHETYPES = ("sphere", "box", "corridor")
MIN_SEGMENT_PX = 10.0
MIN_OBSERVATIONS = 3
# points every pose must see, so no camera is left underdetermined
MIN_POINTS_PER_POSE = 6

_STREAM_LANDMARKS = 0
_STREAM_TRAJECTORY = 1
_STREAM_NOISE = 2
_STREAM_PERTURB = 3


class GenerationError(RuntimeError):
    pass


def rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class PerturbScales:
    rotation: float = 0.02
    translation: float = 0.2
    landmark: float = 0.1
    line_angle: float = 0.02
    anchor_poses: int = 2

    def __post_init__(self):
        for name in ("rotation", "translation", "landmark", "line_angle"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"perturbation scale {name} must be >= 0")

    def is_zero(self) -> bool:
        return not (self.rotation or self.translation or self.landmark or self.line_angle)


@dataclass(frozen=True)
class SceneSpec:
    archetype: str = "sphere"
    seed: int = 0
    n_poses: int = 50
    n_points: int = 120
    n_lines: int = 20
    n_groups: int = 2
    group_sizes: tuple[int, ...] | None = None
    pixel_noise_sigma: float = 1.0
    perturb: PerturbScales = field(default_factory=PerturbScales)
    camera: CameraIntrinsics = field(default_factory=lambda: CameraIntrinsics(535.0, 535.0, 320.0, 240.0))
    image_size: tuple[int, int] = (640, 480)
    max_retries: int = 200

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.archetype!r}")
        if self.n_poses < 3 or self.n_points < 0 or self.n_lines < 0 or self.n_groups < 0:
            raise ValueError("need n_poses >= 3 and non-negative landmark counts")
        if self.n_points + self.n_lines == 0:
            raise ValueError("scene has no landmarks")
        if not self.pixel_noise_sigma >= 0:
            raise ValueError("pixel noise sigma must be >= 0")
        sizes = self.sizes()
        if any(s < 2 for s in sizes) or sum(sizes) > self.n_lines:
            raise ValueError("group sizes must be >= 2 and sum to at most n_lines")

    def sizes(self) -> tuple[int, ...]:
        """Group sizes; by default the lines are split evenly over the groups."""
        if self.group_sizes is not None:
            if len(self.group_sizes) != self.n_groups:
                raise ValueError("group_sizes length differs from n_groups")
            return tuple(int(s) for s in self.group_sizes)
        if self.n_groups == 0:
            return ()
        base, extra = divmod(self.n_lines, self.n_groups)
        return tuple(base + (1 if g < extra else 0) for g in range(self.n_groups))


# --- trajectories and landmark samplers ----------------------------------------


def look_at(center, target, up=(0.0, 0.0, 1.0)) -> PoseSE3:
    """Camera-to-world pose at ``center`` with the optical axis toward ``target``
    (x right, y down)."""
    z = np.asarray(target, float) - center
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return PoseSE3(np.column_stack((x, y, z)), np.asarray(center, float))


def _unit(v):
    return v / np.linalg.norm(v)


class _World:
    directions: list[np.ndarray]

    def poses(self, n: int, g: np.random.Generator) -> list[PoseSE3]:
        raise NotImplementedError

    def point(self, g) -> np.ndarray:
        raise NotImplementedError

    def point_near(self, g, k: int, n: int) -> np.ndarray:
        """A point likely to be seen from pose ``k`` of ``n``."""
        return self.point(g)

    def line(self, g, direction) -> tuple[np.ndarray, float]:
        """Centre point and half length of a segment with the given direction."""
        raise NotImplementedError

    def random_direction(self, g) -> np.ndarray:
        return _unit(g.normal(size=3))


class _Sphere(_World):
    radius = 2.0
    orbit = 6.0
    directions = [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), _unit(np.array([1.0, 1.0, 0.0]))]

    def poses(self, n, g):
        phi = 2 * np.pi * np.arange(n) / n
        out = []
        for k, a in enumerate(phi):
            c = np.array([self.orbit * np.cos(a), self.orbit * np.sin(a), 1.5 * np.sin(3 * a)])
            out.append(look_at(c, 0.2 * g.normal(size=3)))
        return out

    def point(self, g):
        return self.radius * _unit(g.normal(size=3)) * g.uniform(0.9, 1.1)

    def line(self, g, d):
        # tangent to the shell: a point on the great circle orthogonal to d
        p = g.normal(size=3)
        p -= (p @ d) * d
        return self.radius * g.uniform(0.9, 1.1) * _unit(p), 0.8


class _Box(_World):
    """Room ``[-4,4] x [-1,5] x [-1.5,1.5]``; the camera sweeps a wave in front
    of the far wall ``y = 5``."""

    directions = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])]

    def poses(self, n, g):
        s = np.linspace(0.0, 1.0, n)
        out = []
        for a in s:
            x = -2.5 + 5.0 * a
            c = np.array([x, -0.5 + 0.6 * np.sin(6 * np.pi * a), 0.4 * np.sin(4 * np.pi * a)])
            target = np.array([0.6 * x + 0.8 * np.sin(2 * np.pi * a), 5.0, 0.0])
            out.append(look_at(c, target + 0.05 * g.normal(size=3)))
        return out

    def _wall_point(self, g):
        k = g.integers(0, 4)
        if k <= 1:  # far wall
            return np.array([g.uniform(-3.8, 3.8), 5.0, g.uniform(-1.4, 1.4)])
        if k == 2:  # side walls
            return np.array([g.choice([-4.0, 4.0]), g.uniform(2.0, 5.0), g.uniform(-1.4, 1.4)])
        return np.array([g.uniform(-3.5, 3.5), g.uniform(2.5, 5.0), g.choice([-1.5, 1.5])])

    def point(self, g):
        return self._wall_point(g)

    def line(self, g, d):
        if abs(d[0]) > 0.9:  # horizontal edges on far wall, floor or ceiling
            if g.uniform() < 0.6:
                return np.array([g.uniform(-2.5, 2.5), 5.0, g.uniform(-1.3, 1.3)]), 0.9
            return np.array([g.uniform(-2.5, 2.5), g.uniform(3.0, 5.0), g.choice([-1.5, 1.5])]), 0.9
        if abs(d[2]) > 0.9:  # vertical edges on the far wall
            return np.array([g.uniform(-3.5, 3.5), 5.0, g.uniform(-0.4, 0.4)]), 0.9
        p = self._wall_point(g)
        return p, 0.7


class _Corridor(_World):
    """Rectangular corridor loop of half-extents 6 x 4 and width 2."""

    half = np.array([6.0, 4.0])
    width = 1.0
    height = 1.2
    directions = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])]

    def _loop(self, s):
        a, b = self.half
        per = 4 * (a + b)
        u = (s % 1.0) * per
        pts = [(-a, -b), (a, -b), (a, b), (-a, b), (-a, -b)]
        lens = [2 * a, 2 * b, 2 * a, 2 * b]
        for k, L in enumerate(lens):
            if u <= L:
                p0, p1 = np.array(pts[k]), np.array(pts[k + 1])
                return p0 + (p1 - p0) * (u / L), _unit(p1 - p0)
            u -= L
        return np.array(pts[0]), np.array([1.0, 0.0])

    def poses(self, n, g):
        out = []
        for k in range(n):
            p, t = self._loop(k / n)
            q, _ = self._loop(k / n + 0.03)
            c = np.array([p[0], p[1], 0.1 * np.sin(2 * np.pi * 5 * k / n)])
            target = np.array([q[0], q[1], 0.0]) + 0.2 * np.array([-t[1], t[0], 0.0]) * np.sin(k)
            out.append(look_at(c, target + 0.02 * g.normal(size=3)))
        return out

    def _wall(self, g, s=None):
        p, t = self._loop(g.uniform() if s is None else s)
        side = g.choice([-1.0, 1.0])
        nrm = np.array([-t[1], t[0]])
        xy = p + side * self.width * nrm
        return np.array([xy[0], xy[1], g.uniform(-self.height, self.height)]), t

    def point(self, g):
        return self._wall(g)[0]

    def point_near(self, g, k, n):
        return self._wall(g, k / n + g.uniform(0.02, 0.1))[0]

    def line(self, g, d):
        for _ in range(100):
            p, t = self._wall(g)
            if abs(d[2]) > 0.9 or abs(abs(d[:2] @ t) - 1.0) < 1e-9:
                return p, 0.6
        return p, 0.6


_WORLDS = {"sphere": _Sphere, "box": _Box, "corridor": _Corridor}


# --- rendering -------------------------------------------------------------------


def _project(poses_R, poses_t, X, K: CameraIntrinsics):
    """Pixels and depths of world points X (M,3) in every pose: (P,M,2), (P,M).

    Uses the point factor itself, so noiseless observations give residuals
    of exactly zero.
    """
    P, M = len(poses_R), len(X)
    R = np.repeat(poses_R, M, axis=0)
    t = np.repeat(poses_t, M, axis=0)
    Xs = np.tile(X, (P, 1))
    uv = point_terms(R, t, Xs, np.zeros((P * M, 2)), K)[0]
    z = np.einsum("nji,nj->ni", R, Xs - t)[:, 2]
    return uv.reshape(P, M, 2), z.reshape(P, M)


def _inside(uv, z, size):
    w, h = size
    return (z > 0.1) & (uv[..., 0] >= 0) & (uv[..., 0] <= w) & (uv[..., 1] >= 0) & (uv[..., 1] <= h)


def _visible_points(R, t, X, K, size):
    uv, z = _project(R, t, X, K)
    return _inside(uv, z, size), uv


def _visible_segments(R, t, A, B, K, size):
    uva, za = _project(R, t, A, K)
    uvb, zb = _project(R, t, B, K)
    vis = _inside(uva, za, size) & _inside(uvb, zb, size)
    vis &= np.linalg.norm(uva - uvb, axis=-1) >= MIN_SEGMENT_PX
    return vis, uva, uvb


def generate(spec: SceneSpec) -> tuple[GroundTruth, FactorGraph]:
    """Ground truth and the perturbed initial graph for ``spec``."""
    world = _WORLDS[spec.archetype]()
    K, size = spec.camera, spec.image_size
    poses = world.poses(spec.n_poses, rng(spec.seed, _STREAM_TRAJECTORY))
    R = np.stack([p.R for p in poses])
    t = np.stack([p.t for p in poses])
    g = rng(spec.seed, _STREAM_LANDMARKS)

    def sample_ok(draw, check, what):
        for _ in range(spec.max_retries):
            item = draw()
            if check(item):
                return item
        raise GenerationError(f"could not place a {what} within {spec.max_retries} draws")

    # while some pose sees too few points, only accept points that it sees
    need = min(MIN_POINTS_PER_POSE, spec.n_points)
    seen = np.zeros(spec.n_poses, dtype=int)
    points = []
    for _ in range(spec.n_points):
        weakest = int(np.argmin(seen))
        steer = seen[weakest] < need

        def ok(X):
            vis = _visible_points(R, t, X[None], K, size)[0][:, 0]
            return vis.sum() >= MIN_OBSERVATIONS and (not steer or vis[weakest])

        what = f"point seen by pose {weakest} and {MIN_OBSERVATIONS} poses in all" if steer else "point"
        X = sample_ok((lambda: world.point_near(g, weakest, spec.n_poses)) if steer else (lambda: world.point(g)),
                      ok, what)
        seen += _visible_points(R, t, X[None], K, size)[0][:, 0]
        points.append(X)
    if seen.min() < need:
        raise GenerationError(f"pose {int(np.argmin(seen))} sees fewer than {need} points")

    # group directions, canonical sign so the stored Plücker d is exact
    sizes = spec.sizes()
    line_dirs: list[np.ndarray] = []
    groups: dict[int, list[int]] = {}
    lid = 0
    for gi, sz in enumerate(sizes):
        base = world.directions[gi % len(world.directions)]
        if gi >= len(world.directions):
            base = _unit(base + 0.3 * g.normal(size=3))
        d = base * (1.0 if base[np.flatnonzero(base)[0]] > 0 else -1.0)
        groups[gi] = list(range(lid, lid + sz))
        line_dirs += [d] * sz
        lid += sz
    while len(line_dirs) < spec.n_lines:
        d = world.random_direction(g)
        line_dirs.append(d * (1.0 if d[np.flatnonzero(d)[0]] > 0 else -1.0))

    lines, segments = {}, {}
    for i, d in enumerate(line_dirs):

        def draw(d=d):
            c, h = world.line(g, d)
            return c, c - h * d, c + h * d

        def ok(item):
            c, a, b = item
            if np.linalg.norm(np.cross(c, d)) < 0.1:
                return False
            return _visible_segments(R, t, a[None], b[None], K, size)[0].sum() >= MIN_OBSERVATIONS

        c, a, b = sample_ok(draw, ok, f"line seen by {MIN_OBSERVATIONS} poses")
        lines[i] = PluckerLine(np.cross(c, d), d)
        segments[i] = EndpointLine(a, b)

    gt = GroundTruth(
        poses={k: p for k, p in enumerate(poses)},
        points={k: X for k, X in enumerate(points)},
        lines=lines,
        groups={k: list(v) for k, v in groups.items()},
        segments=segments,
    )
    graph = render(gt, K, size, spec.pixel_noise_sigma, spec.seed)
    return gt, perturb(gt, spec.perturb, spec.seed, template=graph)


def render(gt: GroundTruth, K: CameraIntrinsics, size=(640, 480), sigma: float = 0.0, seed: int = 0) -> FactorGraph:
    """Observation graph whose vertices hold the ground truth."""
    pids = sorted(gt.poses)
    R = np.stack([gt.poses[p].R for p in pids])
    t = np.stack([gt.poses[p].t for p in pids])
    xids = sorted(gt.points)
    lids = sorted(gt.segments)
    X = np.array([gt.points[i] for i in xids]).reshape(-1, 3)
    A = np.array([gt.segments[i].p_start for i in lids]).reshape(-1, 3)
    B = np.array([gt.segments[i].p_end for i in lids]).reshape(-1, 3)
    pvis, uv = _visible_points(R, t, X, K, size)
    lvis, uva, uvb = _visible_segments(R, t, A, B, K, size)

    pe_ids, pe_uv, le_ids, le_seg = [], [], [], []
    for k, pid in enumerate(pids):
        noise = rng(seed, _STREAM_NOISE, k)
        m = np.flatnonzero(pvis[k])
        obs = uv[k, m]
        if sigma > 0:
            obs = obs + sigma * noise.normal(size=obs.shape)
        pe_ids += [(pid, xids[j]) for j in m]
        pe_uv.append(obs)
        m = np.flatnonzero(lvis[k])
        seg = np.concatenate((uva[k, m], uvb[k, m]), axis=1)
        if sigma > 0:
            seg = seg + sigma * noise.normal(size=seg.shape)
        le_ids += [(pid, lids[j]) for j in m]
        le_seg.append(seg)

    return FactorGraph(
        camera=K,
        image_size=tuple(size),
        poses=dict(gt.poses),
        points=dict(gt.points),
        lines=dict(gt.lines),
        groups={k: list(v) for k, v in gt.groups.items()},
        point_edge_ids=np.array(pe_ids, dtype=np.int64).reshape(-1, 2),
        point_edge_uv=np.concatenate(pe_uv).reshape(-1, 2) if pe_uv else np.zeros((0, 2)),
        line_edge_ids=np.array(le_ids, dtype=np.int64).reshape(-1, 2),
        line_edge_seg=np.concatenate(le_seg).reshape(-1, 4) if le_seg else np.zeros((0, 4)),
    )


def perturb(gt: GroundTruth, scales: PerturbScales, seed: int, template: FactorGraph | None = None) -> FactorGraph:
    """Initial graph: ground truth plus random pose, point and line noise.

    The first ``scales.anchor_poses`` poses (sorted by id) stay exact since
    the solver holds them fixed.  Group members get independent direction
    noise, so they are no longer parallel.
    """
    if template is None:
        template = FactorGraph(camera=CameraIntrinsics(535.0, 535.0, 320.0, 240.0), groups=dict(gt.groups))
    if scales.is_zero():
        return template.with_state(poses=gt.poses, points=gt.points, lines=gt.lines)
    g = rng(seed, _STREAM_PERTURB)

    pids = sorted(gt.poses)
    poses = dict(gt.poses)
    xi = np.concatenate(
        (scales.rotation * g.normal(size=(len(pids), 3)), scales.translation * g.normal(size=(len(pids), 3))),
        axis=1,
    )
    movable = pids[scales.anchor_poses :]
    if movable:
        R = np.stack([gt.poses[p].R for p in movable])
        t = np.stack([gt.poses[p].t for p in movable])
        R2, t2 = se3_retract_batch(R, t, xi[scales.anchor_poses :])
        for k, p in enumerate(movable):
            poses[p] = PoseSE3(R2[k], t2[k])

    xids = sorted(gt.points)
    off = scales.landmark * g.normal(size=(len(xids), 3))
    points = {p: np.asarray(gt.points[p], float) + off[k] for k, p in enumerate(xids)}

    lids = sorted(gt.lines)
    lines = dict(gt.lines)
    if lids:
        rs = [rieman_from_plucker(gt.lines[l]) for l in lids]
        u2 = np.array([r.u2 for r in rs])
        u1 = np.array([r.u1 for r in rs])
        om = np.array([r.omega for r in rs])
        dth = scales.line_angle * g.normal(size=(len(lids), 2))
        dgs = g.normal(size=(len(lids), 2)) * (scales.landmark / om)[:, None]
        v2, v1, om2 = rieman_retract_arrays(u2, u1, om, np.arange(len(lids)), dth, dgs[:, 0], dgs[:, 1])
        for k, l in enumerate(lids):
            lines[l] = PluckerLine(om2[k] * v1[k], v2[k])
    return template.with_state(poses=poses, points=points, lines=lines)
