"""Problem assembly and a sparse Levenberg-Marquardt solver for point-line
bundle adjustment under the five line-handling methods.

=========================  =====================================================
Method                     Line treatment
=========================  =====================================================
Point                      lines ignored
Point_OrthLine             orthonormal (U, W) blocks, 4 DoF each
Point_OrthLine_Constr      as above plus one parallelism factor per group member
Point_RiemanLine           Riemannian single lines, groups dissolved
Point_StructRiemanLine     Riemannian single lines plus parallel-group blocks
=========================  =====================================================

The cost is ``sum rho(|r|^2)`` over all active factors.  Each LM step solves
``(H + mu diag(H)) delta = -g`` with ``H = J^T W J`` and ``g = J^T W r``
(``W`` holds the robust weights ``rho'``), so the cost gradient is ``2 g``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .factors import RobustLoss, line_terms, point_terms, robust_weight
from .graph import FactorGraph, GraphValidationError
from .lines import (
    PluckerLine,
    RetractionDegenerateError,
    ThroughOriginError,
    group_from_members,
    orthonormal_from_plucker,
    orthonormal_plucker_arrays,
    orthonormal_retract_arrays,
    orthonormal_tangent_jacobian,
    rieman_from_plucker,
    rieman_retract_arrays,
    rieman_tangent_jacobian,
)
from .manifold import PoseSE3, se3_retract_batch

try:  # CHOLMOD when scikit-sparse is installed
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, analyze as _cholmod
except ImportError:  # pragma: no cover - depends on the environment
    _cholmod = None


class Method(str, Enum):
    POINT = "Point"
    ORTH = "Point_OrthLine"
    ORTH_CONSTR = "Point_OrthLine_Constr"
    RIEMAN = "Point_RiemanLine"
    STRUCT = "Point_StructRiemanLine"

    @classmethod
    def parse(cls, name: str) -> "Method":
        for m in cls:
            if m.value == name:
                return m
        raise ValueError(f"unknown method {name!r}; expected one of {[m.value for m in cls]}")


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    method: Method = Method.STRUCT
    max_iterations: int = 20
    initial_damping: float = 1e-4
    damping_up: float = 10.0
    damping_down: float = 0.5
    max_damping: float = 1e12
    rel_decrease: float = 1e-6
    step_norm: float = 1e-10
    loss: RobustLoss = field(default_factory=RobustLoss)
    parallel_weight: float = 1.0
    gauge_poses: int = 2
    min_observations: int = 3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("initial_damping", "rel_decrease", "step_norm", "max_damping", "parallel_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (self.damping_up > 1 and 0 < self.damping_down < 1):
            raise ValueError("need damping_up > 1 and 0 < damping_down < 1")
        if self.gauge_poses < 0 or self.min_observations < 1:
            raise ValueError("gauge_poses must be >= 0 and min_observations >= 1")


@dataclass
class SolveReport:
    costs: list[float]
    trial_costs: list[float]
    accepted: list[bool]
    damping: list[float]
    graph: FactorGraph
    termination: str
    wall_time: float
    deactivated: int = 0

    @property
    def iterations(self) -> int:
        return len(self.accepted)

    @property
    def initial_cost(self) -> float:
        return self.costs[0]

    @property
    def final_cost(self) -> float:
        return self.costs[-1]


@dataclass
class State:
    R: np.ndarray
    t: np.ndarray
    X: np.ndarray
    U: np.ndarray | None = None
    W: np.ndarray | None = None
    u2: np.ndarray | None = None
    u1: np.ndarray | None = None
    omega: np.ndarray | None = None


class Problem:
    """Column layout, index maps and the initial state for one method."""

    def __init__(self, graph: FactorGraph, config: SolveConfig):
        self.graph = graph
        self.config = config
        self.method = config.method
        self.K = graph.camera
        self.excluded_lines: list[int] = []
        self._build()

    # -- assembly -----------------------------------------------------------

    def _build(self):
        g, cfg = self.graph, self.config
        if not g.poses:
            raise GraphValidationError("graph has no poses")
        g.validate()
        use_lines = self.method is not Method.POINT

        self.pose_ids = sorted(g.poses)
        pose_index = {pid: i for i, pid in enumerate(self.pose_ids)}

        pe_ids = g.point_edge_ids
        keep_pts = _observed_enough(pe_ids, cfg.min_observations)
        self.point_ids = sorted(pid for pid in g.points if pid in keep_pts)

        line_ids: list[int] = []
        if use_lines:
            keep_lines = _observed_enough(g.line_edge_ids, cfg.min_observations)
            for lid in sorted(g.lines):
                if lid not in keep_lines:
                    continue
                if np.linalg.norm(g.lines[lid].n) <= 1e-9 * np.linalg.norm(g.lines[lid].d):
                    self.excluded_lines.append(lid)
                    continue
                line_ids.append(lid)
        had_landmarks = bool(g.points) or (use_lines and bool(g.lines))
        if had_landmarks and not self.point_ids and not line_ids:
            raise GraphValidationError("no landmark is observed by enough poses after pruning")

        # groups restricted to surviving members
        alive = set(line_ids)
        groups = []
        for gid in sorted(g.groups):
            members = [lid for lid in g.groups[gid] if lid in alive]
            if len(members) >= 2:
                groups.append(members)
        self.groups = groups

        # order lines: singles first, then group members contiguously
        grouped = {lid for m in groups for lid in m}
        singles = [lid for lid in line_ids if lid not in grouped]
        self.line_ids = singles + [lid for m in groups for lid in m]
        line_index = {lid: i for i, lid in enumerate(self.line_ids)}
        point_index = {pid: i for i, pid in enumerate(self.point_ids)}

        # edges
        m = np.array([pid in point_index for pid in pe_ids[:, 1].tolist()], dtype=bool)
        self.pe_pose = np.array([pose_index[p] for p in pe_ids[m, 0].tolist()], dtype=np.int64)
        self.pe_point = np.array([point_index[p] for p in pe_ids[m, 1].tolist()], dtype=np.int64)
        self.pe_uv = g.point_edge_uv[m]
        le_ids = g.line_edge_ids
        if use_lines and len(le_ids):
            m = np.array([lid in line_index for lid in le_ids[:, 1].tolist()], dtype=bool)
        else:
            m = np.zeros(len(le_ids), dtype=bool)
        self.le_pose = np.array([pose_index[p] for p in le_ids[m, 0].tolist()], dtype=np.int64)
        self.le_line = np.array([line_index[l] for l in le_ids[m, 1].tolist()], dtype=np.int64)
        self.le_seg = g.line_edge_seg[m]

        # gauge: leading poses plus poses without any active observation
        observed = np.zeros(len(self.pose_ids), dtype=bool)
        observed[self.pe_pose] = True
        observed[self.le_pose] = True
        self.pose_free = observed.copy()
        self.pose_free[: cfg.gauge_poses] = False

        # columns
        col = 0
        self.pose_col = np.full(len(self.pose_ids), -1, dtype=np.int64)
        self.block_names: list[tuple[str, int, int, int]] = []  # (kind, id, first col, size)
        for i, pid in enumerate(self.pose_ids):
            if self.pose_free[i]:
                self.pose_col[i] = col
                self.block_names.append(("pose", pid, col, 6))
                col += 6
        self.point_col = np.arange(len(self.point_ids), dtype=np.int64) * 3 + col
        for i, pid in enumerate(self.point_ids):
            self.block_names.append(("point", pid, col + 3 * i, 3))
        col += 3 * len(self.point_ids)

        L = len(self.line_ids)
        self.line_cols = np.zeros((L, 4), dtype=np.int64)
        self.line_kind = None
        init = self._initial_line_state(singles, groups, line_index)
        if self.method in (Method.ORTH, Method.ORTH_CONSTR):
            self.line_kind = "orth"
            for i, lid in enumerate(self.line_ids):
                self.line_cols[i] = col + np.arange(4)
                self.block_names.append(("line", lid, col, 4))
                col += 4
        elif self.method in (Method.RIEMAN, Method.STRUCT):
            self.line_kind = "rieman"
            D = len(self.dir_members)
            self.dir_col = np.zeros(D, dtype=np.int64)
            self.gs_col = np.zeros(L, dtype=np.int64)
            for s, members in enumerate(self.dir_members):
                self.dir_col[s] = col
                first = col
                col += 2
                for li in members:
                    self.gs_col[li] = col
                    col += 2
                kind = "group" if len(members) > 1 else "line"
                ident = self.line_ids[members[0]] if kind == "line" else s
                self.block_names.append((kind, ident, first, col - first))
            self.line_cols[:, 0] = self.dir_col[self.dir_index]
            self.line_cols[:, 1] = self.dir_col[self.dir_index] + 1
            self.line_cols[:, 2] = self.gs_col
            self.line_cols[:, 3] = self.gs_col + 1
        self.ncols = col

        # parallelism factors, one per member of each group
        self.parallel_groups: list[np.ndarray] = []
        if self.method is Method.ORTH_CONSTR:
            self.parallel_groups = [np.array([line_index[l] for l in m]) for m in groups]

        self.initial_state = State(
            R=np.stack([g.poses[p].R for p in self.pose_ids]),
            t=np.stack([g.poses[p].t for p in self.pose_ids]),
            X=np.array([g.points[p] for p in self.point_ids], dtype=float).reshape(-1, 3),
            **init,
        )

    def _initial_line_state(self, singles, groups, line_index):
        g = self.graph
        L = len(self.line_ids)
        if self.method in (Method.ORTH, Method.ORTH_CONSTR):
            U = np.zeros((L, 3, 3))
            W = np.zeros((L, 2, 2))
            lines = {lid: g.lines[lid] for lid in self.line_ids}
            for members in groups:
                # orient members alike so the parallelism residual sees the same sign
                ref = lines[members[0]].d
                for lid in members[1:]:
                    if lines[lid].d @ ref < 0:
                        lines[lid] = PluckerLine(-lines[lid].n, -lines[lid].d)
            for i, lid in enumerate(self.line_ids):
                o = orthonormal_from_plucker(lines[lid])
                U[i], W[i] = o.U, o.W
            return {"U": U, "W": W}
        if self.method not in (Method.RIEMAN, Method.STRUCT):
            self.dir_members = []
            self.dir_index = np.zeros(0, dtype=np.int64)
            return {}
        share = self.method is Method.STRUCT
        dir_members: list[list[int]] = []
        u2s, u1 = [], np.zeros((L, 3))
        omega = np.zeros(L)
        dir_index = np.zeros(L, dtype=np.int64)
        for lid in singles + ([] if share else [l for m in groups for l in m]):
            r = rieman_from_plucker(g.lines[lid])
            i = line_index[lid]
            dir_index[i] = len(u2s)
            dir_members.append([i])
            u2s.append(r.u2)
            u1[i], omega[i] = r.u1, r.omega
        if share:
            for members in groups:
                grp = group_from_members([rieman_from_plucker(g.lines[l]) for l in members])
                slot = len(u2s)
                idx = [line_index[l] for l in members]
                dir_members.append(idx)
                u2s.append(grp.u2)
                for k, i in enumerate(idx):
                    dir_index[i] = slot
                    u1[i], omega[i] = grp.u1[k], grp.omega[k]
        self.dir_members = dir_members
        self.dir_index = dir_index
        return {"u2": np.array(u2s).reshape(-1, 3), "u1": u1, "omega": omega}

    # -- state helpers --------------------------------------------------------

    def plucker_arrays(self, s: State):
        if self.line_kind == "orth":
            return orthonormal_plucker_arrays(s.U, s.W)
        if self.line_kind == "rieman":
            return s.omega[:, None] * s.u1, s.u2[self.dir_index]
        return np.zeros((0, 3)), np.zeros((0, 3))

    def line_tangent_jacobian(self, s: State) -> np.ndarray:
        if self.line_kind == "orth":
            return orthonormal_tangent_jacobian(s.U, s.W)
        if self.line_kind == "rieman":
            return rieman_tangent_jacobian(s.u2, s.u1, s.omega, self.dir_index)
        return np.zeros((0, 6, 4))

    def retract(self, s: State, delta: np.ndarray) -> State:
        free = self.pose_free
        R, t = s.R.copy(), s.t.copy()
        if np.any(free):
            xi = delta[self.pose_col[free][:, None] + np.arange(6)]
            R[free], t[free] = se3_retract_batch(s.R[free], s.t[free], xi)
        X = s.X + delta[self.point_col[:, None] + np.arange(3)] if len(self.point_ids) else s.X
        new = replace(s, R=R, t=t, X=X)
        if self.line_kind == "orth" and len(self.line_ids):
            d = delta[self.line_cols]
            new.U, new.W = orthonormal_retract_arrays(s.U, s.W, d[:, :3], d[:, 3])
        elif self.line_kind == "rieman" and len(self.line_ids):
            dtheta = delta[self.dir_col[:, None] + np.arange(2)]
            gs = delta[self.gs_col[:, None] + np.arange(2)]
            new.u2, new.u1, new.omega = rieman_retract_arrays(
                s.u2, s.u1, s.omega, self.dir_index, dtheta, gs[:, 0], gs[:, 1]
            )
        return new

    def to_graph(self, s: State) -> FactorGraph:
        g = self.graph
        poses = dict(g.poses)
        for i, pid in enumerate(self.pose_ids):
            if self.pose_free[i]:
                poses[pid] = PoseSE3(s.R[i], s.t[i])
        points = dict(g.points)
        for i, pid in enumerate(self.point_ids):
            points[pid] = s.X[i].copy()
        lines = dict(g.lines)
        n, d = self.plucker_arrays(s)
        if self.line_kind == "orth":
            scale = 1.0 / np.linalg.norm(d, axis=1, keepdims=True)
            n, d = n * scale, d * scale
        for i, lid in enumerate(self.line_ids):
            lines[lid] = PluckerLine(n[i].copy(), d[i])
        return g.with_state(poses=poses, points=points, lines=lines)

    def census(self) -> dict[str, int]:
        """Parameter and residual bookkeeping; fixed poses still count as blocks."""
        P, M = len(self.pose_ids), len(self.point_ids)
        blocks = P + M
        params = 6 * P + 3 * M
        if self.line_kind == "orth":
            blocks += len(self.line_ids)
            params += 4 * len(self.line_ids)
        elif self.line_kind == "rieman":
            blocks += len(self.dir_members)
            params += sum(2 + 2 * len(m) for m in self.dir_members)
        n_par = sum(len(m) for m in self.parallel_groups)
        res_blocks = len(self.pe_pose) + len(self.le_pose) + n_par
        return {
            "parameter_blocks": blocks,
            "effective_parameters": params,
            "residual_blocks": res_blocks,
            "residuals": 2 * len(self.pe_pose) + 2 * len(self.le_pose) + n_par,
        }


def _block_cols(first: np.ndarray, size: int) -> np.ndarray:
    """Column indices of blocks starting at ``first``; fixed blocks (-1) map to -1."""
    return np.where(first[:, None] >= 0, first[:, None] + np.arange(size), -1)


def _observed_enough(edge_ids: np.ndarray, k: int) -> set[int]:
    if not len(edge_ids):
        return set()
    pairs = np.unique(edge_ids, axis=0)
    lm, counts = np.unique(pairs[:, 1], return_counts=True)
    return set(lm[counts >= k].tolist())


def assemble(graph: FactorGraph, config: SolveConfig | None = None) -> Problem:
    return Problem(graph, config or SolveConfig())


# --- evaluation ----------------------------------------------------------------


@dataclass
class _Terms:
    r: list
    rows_J: list
    cost: float
    deactivated: int


def _evaluate(problem: Problem, s: State, with_jacobian: bool):
    """Weighted residual vector and (optionally) weighted sparse Jacobian."""
    loss = problem.config.loss
    K = problem.K
    res_parts, w_parts = [], []
    coo_r, coo_c, coo_v = [], [], []
    offset = 0
    cost = 0.0
    deactivated = 0

    def add_block(J, cols, row0, nrows, sw):
        # J: (E, nrows, k), cols: (E, k) with -1 for fixed columns
        E, _, k = J.shape
        rows = row0 + np.arange(E)[:, None] * nrows + np.arange(nrows)[None, :]
        Rr = np.broadcast_to(rows[:, :, None], (E, nrows, k))
        Cc = np.broadcast_to(cols[:, None, :], (E, nrows, k))
        V = J * sw[:, None, None]
        m = Cc >= 0
        coo_r.append(Rr[m])
        coo_c.append(Cc[m])
        coo_v.append(V[m])

    def robustify(r):
        nonlocal cost, deactivated
        ok = np.all(np.isfinite(r), axis=1)
        r = np.where(ok[:, None], r, 0.0)
        s2 = np.sum(r * r, axis=1)
        rho, drho = robust_weight(loss, s2)
        return r, ok, rho, drho

    # points
    if len(problem.pe_pose):
        pi, xi = problem.pe_pose, problem.pe_point
        r, Jp, Jx, valid = point_terms(s.R[pi], s.t[pi], s.X[xi], problem.pe_uv, K)
        r, ok, rho, drho = robustify(r)
        ok &= valid
        deactivated += int(np.sum(~ok))
        cost += float(np.sum(rho[ok]))
        sw = np.where(ok, np.sqrt(drho), 0.0)
        res_parts.append((r * sw[:, None]).ravel())
        if with_jacobian:
            add_block(Jp, _block_cols(problem.pose_col[pi], 6), offset, 2, sw)
            add_block(Jx, _block_cols(problem.point_col[xi], 3), offset, 2, sw)
        offset += 2 * len(pi)

    # lines
    if len(problem.le_pose):
        pi, li = problem.le_pose, problem.le_line
        n, d = problem.plucker_arrays(s)
        r, Jp, JL, valid = line_terms(s.R[pi], s.t[pi], n[li], d[li], problem.le_seg, K)
        r, ok, rho, drho = robustify(r)
        ok &= valid
        deactivated += int(np.sum(~ok))
        cost += float(np.sum(rho[ok]))
        sw = np.where(ok, np.sqrt(drho), 0.0)
        res_parts.append((r * sw[:, None]).ravel())
        if with_jacobian:
            T = problem.line_tangent_jacobian(s)
            add_block(Jp, _block_cols(problem.pose_col[pi], 6), offset, 2, sw)
            add_block(JL @ T[li], problem.line_cols[li], offset, 2, sw)
        offset += 2 * len(pi)

    # parallelism
    wpar = problem.config.parallel_weight
    for idx in problem.parallel_groups:
        N = len(idx)
        U = s.U[idx]
        u1, u2, u3 = U[:, :, 0], U[:, :, 1], U[:, :, 2]
        dots = u2 @ u2.T
        r = wpar * ((N - 1) - (dots.sum(axis=1) - np.diag(dots))) / (N - 1)
        r, ok, rho, drho = robustify(r[:, None])
        deactivated += int(np.sum(~ok))
        cost += float(np.sum(rho[ok]))
        sw = np.where(ok, np.sqrt(drho), 0.0)
        res_parts.append(r[:, 0] * sw)
        if with_jacobian:
            # G[i, j] = d r_i / d u2_j
            G = np.broadcast_to(-u2[:, None, :] / (N - 1), (N, N, 3)).copy()
            G[np.arange(N), np.arange(N)] = -(u2.sum(axis=0) - u2) / (N - 1)
            G *= wpar
            # d u2 / d (rho, phi) for the orthonormal parameterization
            D = np.zeros((N, 3, 4))
            D[:, :, 0] = u3
            D[:, :, 2] = -u1
            Jall = np.einsum("ijk,jkl->ijl", G, D).reshape(N, 1, 4 * N)
            cols = np.tile(problem.line_cols[idx].reshape(1, -1), (N, 1))
            add_block(Jall, cols, offset, 1, sw)
        offset += N

    rvec = np.concatenate(res_parts) if res_parts else np.zeros(0)
    J = None
    if with_jacobian:
        if coo_r:
            J = sp.csr_matrix(
                (np.concatenate(coo_v), (np.concatenate(coo_r), np.concatenate(coo_c))),
                shape=(offset, problem.ncols),
            )
        else:
            J = sp.csr_matrix((offset, problem.ncols))
    return rvec, J, cost, deactivated


def evaluate_cost(problem: Problem, state: State | None = None) -> float:
    s = problem.initial_state if state is None else state
    return _evaluate(problem, s, with_jacobian=False)[2]


def linearize(problem: Problem, state: State | None = None):
    """``(H, g, cost)`` with ``H = J^T W J`` sparse and ``g = J^T W r``."""
    s = problem.initial_state if state is None else state
    r, J, cost, _ = _evaluate(problem, s, with_jacobian=True)
    H = (J.T @ J).tocsr()
    # H is symmetric, so its CSR arrays read as CSC give sorted indices
    # without an explicit sort
    H = sp.csc_matrix((H.data, H.indices, H.indptr), shape=H.shape)
    g = J.T @ r
    return H, np.asarray(g).ravel(), cost


class _Factorizer:
    """Damped solves that reuse the symbolic analysis while the sparsity
    pattern of ``H`` stays the same."""

    def __init__(self):
        self._pattern = None
        self._symbolic = None

    def __call__(self, H, g, mu):
        A = (H + sp.diags(mu * H.diagonal())).tocsc()
        if _cholmod is None:
            return self._dense(A, g)
        A.sort_indices()
        if self._pattern is None or not (
            np.array_equal(self._pattern[0], A.indptr) and np.array_equal(self._pattern[1], A.indices)
        ):
            self._pattern = (A.indptr.copy(), A.indices.copy())
            self._symbolic = _cholmod(A)
        try:
            factor = self._symbolic.cholesky(A)
        except CholmodNotPositiveDefiniteError:
            return None
        return factor(-g)

    @staticmethod
    def _dense(A, g):
        import scipy.linalg as sla

        try:
            c = sla.cho_factor(A.toarray())
        except np.linalg.LinAlgError:
            return None
        return sla.cho_solve(c, -g)


def _unconstrained(problem: Problem, H) -> list[str]:
    diag = H.diagonal()
    bad = []
    for kind, ident, c0, size in problem.block_names:
        if np.any(diag[c0 : c0 + size] <= 0):
            bad.append(f"{kind} {ident}")
    return bad


def lm_solve(problem: Problem) -> SolveReport:
    cfg = problem.config
    t0 = time.perf_counter()
    state = problem.initial_state
    mu = cfg.initial_damping
    H, g, cost = linearize(problem, state)
    costs, trials, accepted, damping = [cost], [], [], []
    deactivated = _evaluate(problem, state, False)[3]

    def report(reason):
        return SolveReport(
            costs=costs, trial_costs=trials, accepted=accepted, damping=damping,
            graph=problem.to_graph(state), termination=reason,
            wall_time=time.perf_counter() - t0, deactivated=deactivated,
        )

    if problem.ncols == 0:
        return report("no-free-parameters")
    if H.nnz == 0:
        return report("no-factors")
    bad = _unconstrained(problem, H)
    if bad:
        raise SingularSystemError("unconstrained parameter blocks: " + ", ".join(bad[:10]))

    solve_damped = _Factorizer()
    for _ in range(cfg.max_iterations):
        if np.max(np.abs(g)) < 1e-12 * max(1.0, cost):
            return report("gradient")
        delta = solve_damped(H, g, mu)
        if delta is None:
            mu *= cfg.damping_up
            trials.append(float("nan"))
            accepted.append(False)
            damping.append(mu)
            costs.append(cost)
            if mu > cfg.max_damping:
                raise SingularSystemError(
                    "Cholesky failed at maximum damping; unconstrained blocks: "
                    + ", ".join(_unconstrained(problem, H)[:10] or ["none detected"])
                )
            continue
        if np.linalg.norm(delta) < cfg.step_norm:
            return report("step-norm")
        try:
            new_state = problem.retract(state, delta)
            new_cost = evaluate_cost(problem, new_state)
        except RetractionDegenerateError:
            new_cost = float("inf")
        trials.append(new_cost)
        damping.append(mu)
        if new_cost < cost:
            rel = (cost - new_cost) / cost if cost > 0 else 0.0
            state = new_state
            cost = new_cost
            accepted.append(True)
            costs.append(cost)
            mu = max(mu * cfg.damping_down, 1e-15)
            if rel < cfg.rel_decrease:
                deactivated = _evaluate(problem, state, False)[3]
                return report("relative-decrease")
            H, g, _ = linearize(problem, state)
        else:
            accepted.append(False)
            costs.append(cost)
            mu *= cfg.damping_up
            if mu > cfg.max_damping:
                return report("max-damping")
    deactivated = _evaluate(problem, state, False)[3]
    return report("max-iterations")


def solve(graph: FactorGraph, config: SolveConfig | None = None) -> SolveReport:
    """Assemble and run LM in one call."""
    return lm_solve(assemble(graph, config))
