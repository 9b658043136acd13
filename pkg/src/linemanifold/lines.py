"""3D line representations and the conversions and retractions between them.

Plücker convention: the moment is ``n = P x d`` for any point ``P`` on the
line, so a rigid motion ``P_c = R P_w + t`` maps ``(n, d)`` by
``n_c = R n + [t]x R d``, ``d_c = R d``.

Optimizable forms:

* :class:`OrthonormalLine` -- ``(U, W)`` in SO(3) x SO(2), 4-DoF update.
* :class:`RiemanLine` -- unit direction ``u2`` on the sphere plus a scaled
  normal ``omega * u1`` on the circle orthogonal to ``u2``, 4-DoF update.
* :class:`ParallelGroup` -- ``k`` lines sharing one ``u2``, ``2 + 2k`` DoF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .manifold import so3_exp, sphere_exp_batch, tangent_basis_batch

ORTHO_TOL = 1e-9
PLUCKER_TOL = 1e-6


class DegenerateLineError(ValueError):
    pass


class ThroughOriginError(ValueError):
    """The line passes through the origin, so its moment vanishes."""


class RetractionDegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class EndpointLine:
    p_start: np.ndarray
    p_end: np.ndarray

    def __post_init__(self):
        ps = np.asarray(self.p_start, dtype=float)
        pe = np.asarray(self.p_end, dtype=float)
        if np.linalg.norm(ps - pe) <= 1e-9:
            raise DegenerateLineError("line endpoints coincide")
        object.__setattr__(self, "p_start", ps)
        object.__setattr__(self, "p_end", pe)


@dataclass(frozen=True, eq=False)
class PluckerLine:
    n: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        d = np.asarray(self.d, dtype=float)
        dn = np.linalg.norm(d)
        if not dn > 0:
            raise DegenerateLineError("Plücker direction is zero")
        if abs(n @ d) > PLUCKER_TOL * np.linalg.norm(n) * dn + 1e-15:
            raise ValueError(f"Plücker constraint violated: n.d = {n @ d:.3g}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)

    def normalized(self) -> "PluckerLine":
        """Scale so that ``|d| = 1``."""
        s = 1.0 / np.linalg.norm(self.d)
        return PluckerLine(self.n * s, self.d * s)

    def distance_to_origin(self) -> float:
        return float(np.linalg.norm(self.n) / np.linalg.norm(self.d))

    def closest_point(self) -> np.ndarray:
        """Point of the line nearest the origin."""
        return np.cross(self.d, self.n) / (self.d @ self.d)

    def distance_to_point(self, p: np.ndarray) -> np.ndarray:
        """Euclidean distance from point(s) ``p`` (..., 3) to the line."""
        p = np.asarray(p, dtype=float)
        dd = np.linalg.norm(self.d)
        return np.linalg.norm(np.cross(p, self.d) - self.n, axis=-1) / dd

    def __eq__(self, other):
        if not isinstance(other, PluckerLine):
            return NotImplemented
        return np.array_equal(self.n, other.n) and np.array_equal(self.d, other.d)

    __hash__ = None  # type: ignore[assignment]


def _canonical_sign(n: np.ndarray, d: np.ndarray):
    nz = np.flatnonzero(d)
    if nz.size and d[nz[0]] < 0:
        return -n, -d
    return n, d


def plucker_from_endpoints(line: EndpointLine) -> PluckerLine:
    """Plücker coordinates with ``|d| = 1`` and the first nonzero
    component of ``d`` positive."""
    d = line.p_start - line.p_end
    n = np.cross(line.p_start, d)
    s = 1.0 / np.linalg.norm(d)
    n, d = _canonical_sign(n * s, d * s)
    return PluckerLine(n, d)


@dataclass(frozen=True, eq=False)
class RiemanLine:
    u2: np.ndarray
    u1: np.ndarray
    omega: float

    def __post_init__(self):
        u2 = np.asarray(self.u2, dtype=float)
        u1 = np.asarray(self.u1, dtype=float)
        if abs(np.linalg.norm(u2) - 1) > 1e-9 or abs(np.linalg.norm(u1) - 1) > 1e-9:
            raise ValueError("u1 and u2 must be unit vectors")
        if abs(u1 @ u2) > ORTHO_TOL:
            raise ValueError(f"u1 is not orthogonal to u2 (u1.u2 = {u1 @ u2:.3g})")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def u3(self) -> np.ndarray:
        return np.cross(self.u2, self.u1)


@dataclass(frozen=True)
class RiemanTangent:
    delta_theta: tuple[float, float] = (0.0, 0.0)
    delta_gamma: float = 0.0
    delta_scale: float = 0.0


def rieman_from_plucker(L: PluckerLine) -> RiemanLine:
    dn = np.linalg.norm(L.d)
    u2 = L.d / dn
    n = L.n / dn
    omega = np.linalg.norm(n)
    if omega <= 1e-9:
        raise ThroughOriginError("line passes through the origin (omega = 0)")
    u1 = n / omega
    # nᵀd = 0 only holds to PLUCKER_TOL; restore exactness
    u1 = u1 - (u1 @ u2) * u2
    u1 /= np.linalg.norm(u1)
    return RiemanLine(u2, u1, omega)


def plucker_from_rieman(r: RiemanLine) -> PluckerLine:
    return PluckerLine(r.omega * r.u1, r.u2.copy())


# --- Orthonormal baseline ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrthonormalLine:
    U: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        W = np.asarray(self.W, dtype=float)
        if np.max(np.abs(U.T @ U - np.eye(3))) > 1e-9 or np.linalg.det(U) < 0:
            raise ValueError("U is not in SO(3)")
        if np.max(np.abs(W.T @ W - np.eye(2))) > 1e-9 or np.linalg.det(W) < 0:
            raise ValueError("W is not in SO(2)")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "W", W)


def rot2(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def orthonormal_from_plucker(L: PluckerLine) -> OrthonormalLine:
    nn = np.linalg.norm(L.n)
    dn = np.linalg.norm(L.d)
    if nn <= 1e-9 * dn:
        raise ThroughOriginError("orthonormal form needs a nonzero moment")
    u2 = L.d / dn
    u1 = L.n - (L.n @ u2) * u2
    u1 /= np.linalg.norm(u1)
    U = np.column_stack((u1, u2, np.cross(u1, u2)))
    lam = np.hypot(nn, dn)
    W = np.array([[nn / lam, -dn / lam], [dn / lam, nn / lam]])
    return OrthonormalLine(U, W)


def plucker_from_orthonormal(o: OrthonormalLine) -> PluckerLine:
    w1, w2 = o.W[0, 0], o.W[1, 0]
    return PluckerLine((w1 / w2) * o.U[:, 0], o.U[:, 1].copy())


def orthonormal_retract(o: OrthonormalLine, rho, phi: float) -> OrthonormalLine:
    U, W = orthonormal_retract_arrays(o.U[None], o.W[None], np.asarray(rho, float)[None], np.array([phi], float))
    return OrthonormalLine(U[0], W[0])


def orthonormal_retract_arrays(U, W, rho, phi):
    """Batched ``U <- U Exp(rho)``, ``W <- W Rot(phi)``."""
    if not np.any(rho) and not np.any(phi):
        return U.copy(), W.copy()
    c, s = np.cos(phi), np.sin(phi)
    R2 = np.empty((len(phi), 2, 2))
    R2[:, 0, 0] = c
    R2[:, 0, 1] = -s
    R2[:, 1, 0] = s
    R2[:, 1, 1] = c
    return U @ so3_exp(rho), W @ R2


def orthonormal_plucker_arrays(U, W):
    """Unnormalized Plücker vectors ``(w1 U[:,0], w2 U[:,1])`` for a batch."""
    return W[:, 0, 0, None] * U[:, :, 0], W[:, 1, 0, None] * U[:, :, 1]


def orthonormal_tangent_jacobian(U, W):
    """d(n, d)/d(rho, phi) for the unnormalized Plücker vectors, (N, 6, 4)."""
    u1, u2, u3 = U[:, :, 0], U[:, :, 1], U[:, :, 2]
    w1 = W[:, 0, 0, None]
    w2 = W[:, 1, 0, None]
    J = np.zeros((U.shape[0], 6, 4))
    J[:, 3:, 0] = w2 * u3
    J[:, :3, 1] = -w1 * u3
    J[:, :3, 2] = w1 * u2
    J[:, 3:, 2] = -w2 * u1
    J[:, :3, 3] = -w2 * u1
    J[:, 3:, 3] = w1 * u2
    return J


# --- Riemannian single lines and parallel groups -----------------------------


def rieman_retract_arrays(u2, u1, omega, dir_index, dtheta, dgamma, dscale):
    """Retract lines whose directions live in shared slots.

    ``u2``/``dtheta`` are per direction slot (D rows); ``u1``, ``omega``,
    ``dgamma``, ``dscale`` and ``dir_index`` are per line.  A single line is a
    slot with one member, a parallel group a slot with several.
    """
    B = tangent_basis_batch(u2)
    v2 = sphere_exp_batch(u2, np.einsum("dij,dj->di", B, dtheta))
    w = v2[dir_index]
    p = u1 - np.sum(u1 * w, axis=1, keepdims=True) * w
    pn = np.linalg.norm(p, axis=1)
    if np.any(pn < 1e-9):
        raise RetractionDegenerateError("normal became parallel to the updated direction")
    p /= pn[:, None]
    u3 = np.cross(w, p)
    g = np.asarray(dgamma, dtype=float)[:, None]
    new_u1 = np.cos(g) * p + np.sin(g) * u3
    return v2, new_u1, omega * np.exp(dscale)


def rieman_tangent_jacobian(u2, u1, omega, dir_index):
    """d(n, d)/d(dtheta0, dtheta1, dgamma, dscale) at the origin, (L, 6, 4)."""
    B = tangent_basis_batch(u2)[dir_index]
    w = u2[dir_index]
    u3 = np.cross(w, u1)
    om = omega[:, None]
    J = np.zeros((u1.shape[0], 6, 4))
    J[:, :3, :2] = -om[:, :, None] * w[:, :, None] * np.einsum("li,lij->lj", u1, B)[:, None, :]
    J[:, 3:, :2] = B
    J[:, :3, 2] = om * u3
    J[:, :3, 3] = om * u1
    return J


def rieman_retract(r: RiemanLine, t: RiemanTangent) -> RiemanLine:
    v2, u1, om = rieman_retract_arrays(
        r.u2[None], r.u1[None], np.array([r.omega]), np.array([0]),
        np.asarray(t.delta_theta, float)[None], np.array([t.delta_gamma], float),
        np.array([t.delta_scale], float),
    )
    return RiemanLine(v2[0], u1[0], om[0])


@dataclass(frozen=True, eq=False)
class ParallelGroup:
    """Lines sharing the direction ``u2``; member ``i`` is
    ``omega[i] * u1[i]`` on the circle orthogonal to ``u2``."""

    u2: np.ndarray
    u1: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        u2 = np.asarray(self.u2, dtype=float)
        u1 = np.atleast_2d(np.asarray(self.u1, dtype=float))
        om = np.asarray(self.omega, dtype=float).reshape(-1)
        if u1.shape[0] < 2 or om.shape[0] != u1.shape[0]:
            raise ValueError("a parallel group needs at least two members")
        if abs(np.linalg.norm(u2) - 1) > 1e-9:
            raise ValueError("u2 must be a unit vector")
        if np.max(np.abs(u1 @ u2)) > ORTHO_TOL:
            raise ValueError("member normal not orthogonal to the shared direction")
        if np.any(om <= 0):
            raise ValueError("omega must be positive")
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "omega", om)

    @property
    def size(self) -> int:
        return self.u1.shape[0]

    @property
    def dof(self) -> int:
        return 2 + 2 * self.size

    def member(self, i: int) -> RiemanLine:
        return RiemanLine(self.u2, self.u1[i], self.omega[i])

    def plucker(self) -> list[PluckerLine]:
        return [PluckerLine(self.omega[i] * self.u1[i], self.u2) for i in range(self.size)]


def group_from_members(members: Sequence[RiemanLine]) -> ParallelGroup:
    """Build a group from (nearly) parallel lines.

    The shared direction is the normalized sum of sign-aligned member
    directions; each member keeps its point closest to the origin and is
    re-expressed with the shared direction.
    """
    ref = members[0].u2
    acc = np.zeros(3)
    for m in members:
        acc += m.u2 if m.u2 @ ref >= 0 else -m.u2
    u2 = acc / np.linalg.norm(acc)
    u1s, oms = [], []
    for m in members:
        p0 = np.cross(m.u2, m.omega * m.u1)
        n = np.cross(p0, u2)
        n -= (n @ u2) * u2
        om = np.linalg.norm(n)
        if om <= 1e-9:
            raise ThroughOriginError("group member passes through the origin")
        u1s.append(n / om)
        oms.append(om)
    return ParallelGroup(u2, np.array(u1s), np.array(oms))


def group_retract(g: ParallelGroup, delta_theta, per_line: Iterable[tuple[float, float]]) -> ParallelGroup:
    per_line = np.asarray(list(per_line), dtype=float).reshape(-1, 2)
    if per_line.shape[0] != g.size:
        raise ValueError(f"expected {g.size} per-line updates, got {per_line.shape[0]}")
    v2, u1, om = rieman_retract_arrays(
        g.u2[None], g.u1, g.omega, np.zeros(g.size, dtype=int),
        np.asarray(delta_theta, float)[None], per_line[:, 0], per_line[:, 1],
    )
    return ParallelGroup(v2[0], u1, om)


def count_parameters(
    n_poses: int,
    n_points: int,
    n_single_lines: int = 0,
    group_sizes: Sequence[int] = (),
    mode: str = "rieman",
) -> tuple[int, int]:
    """(parameter blocks, effective parameters) of a point-line graph.

    ``mode="orthonormal"`` counts every line, grouped or not, as its own
    4-parameter block.
    """
    counts = [n_poses, n_points, n_single_lines, *group_sizes]
    if any(c < 0 for c in counts):
        raise ValueError("counts must be nonnegative")
    blocks = n_poses + n_points
    params = 6 * n_poses + 3 * n_points
    if mode == "orthonormal":
        n_lines = n_single_lines + sum(group_sizes)
        return blocks + n_lines, params + 4 * n_lines
    if mode != "rieman":
        raise ValueError(f"unknown mode {mode!r}")
    blocks += n_single_lines + len(group_sizes)
    params += 4 * n_single_lines + sum(2 + 2 * k for k in group_sizes)
    return blocks, params
