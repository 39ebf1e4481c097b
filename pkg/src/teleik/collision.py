"""Self-collision geometry: spheres and capsules attached to links, signed
clearance between body pairs, and clearance gradients with respect to q.

Both shapes are treated as a medial segment plus a radius (a sphere is a
zero-length segment), so every pair reduces to one clamped segment-segment
closest-point computation. Clearance is

    h = |m_b - m_a| - r_a - r_b - margin

with m_a, m_b the closest points on the medial segments. h > 0 means the
surfaces are separated by more than the margin, h < 0 means they are closer
than the margin (or interpenetrating).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .kinematics import FkResult, KinematicModel

DEGENERATE_TOL = 1e-12  # medial distance below which the contact direction is ambiguous
_FALLBACK_NORMAL = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CollisionBody:
    """Sphere or capsule rigidly attached to a link.

    The medial segment runs from p0 to p1 in link coordinates; a sphere has
    p0 == p1.
    """

    name: str
    link: int
    kind: str  # "sphere" | "capsule"
    radius: float
    p0: np.ndarray
    p1: np.ndarray


@dataclass(frozen=True)
class CollisionPair:
    body_a: CollisionBody
    body_b: CollisionBody
    margin: float


@dataclass
class DistanceResult:
    """Clearance between one body pair at one configuration."""

    h: float
    point_a: np.ndarray  # witness point on body_a's surface, world frame
    point_b: np.ndarray  # witness point on body_b's surface, world frame
    normal: np.ndarray  # unit direction from body_a toward body_b
    degenerate: bool  # True when the direction came from a fallback


@dataclass
class PairDistances:
    """Batched clearance results for every pair in a model, in model order."""

    h: np.ndarray  # (n_pairs,)
    point_a: np.ndarray  # (n_pairs, 3)
    point_b: np.ndarray  # (n_pairs, 3)
    normal: np.ndarray  # (n_pairs, 3)
    degenerate: np.ndarray  # (n_pairs,) bool

    def result(self, i: int) -> DistanceResult:
        return DistanceResult(
            h=float(self.h[i]),
            point_a=self.point_a[i].copy(),
            point_b=self.point_b[i].copy(),
            normal=self.normal[i].copy(),
            degenerate=bool(self.degenerate[i]),
        )

    @property
    def min_h(self) -> float:
        return float(self.h.min()) if self.h.size else float("inf")


# ---------------------------------------------------------------------------
# model hooks


def body_from_dict(bd: dict, link: int) -> CollisionBody:
    kind = bd.get("kind")
    radius = float(bd.get("radius", 0.0))
    if radius <= 0:
        raise ModelError(f"body {bd.get('name')!r}: radius must be positive")
    if kind == "sphere":
        c = np.asarray(bd["center"], dtype=float)
        p0, p1 = c, c.copy()
    elif kind == "capsule":
        p0 = np.asarray(bd["a"], dtype=float)
        p1 = np.asarray(bd["b"], dtype=float)
        if float(np.linalg.norm(p1 - p0)) < 1e-9:
            raise ModelError(
                f"body {bd.get('name')!r}: capsule endpoints coincide, use a sphere"
            )
    else:
        raise ModelError(f"body {bd.get('name')!r}: unknown kind {kind!r}")
    if p0.shape != (3,) or p1.shape != (3,):
        raise ModelError(f"body {bd.get('name')!r}: endpoints must be 3-vectors")
    return CollisionBody(name=bd["name"], link=link, kind=kind, radius=radius, p0=p0, p1=p1)


def validate_pairs(model: KinematicModel) -> None:
    for pair in model.collision_pairs:
        a, b = pair.body_a, pair.body_b
        if a.name == b.name:
            raise ModelError(f"collision pair {a.name!r} paired with itself")
        if a.link == b.link:
            raise ModelError(f"collision pair {a.name!r}/{b.name!r}: bodies share a link")
        if model.adjacent_links(a.link, b.link):
            raise ModelError(
                f"collision pair {a.name!r}/{b.name!r}: links are joined by a joint"
            )
        if pair.margin < 0:
            raise ModelError(f"collision pair {a.name!r}/{b.name!r}: negative margin")


# ---------------------------------------------------------------------------
# segment-segment closest points (batched)


def segment_closest_points(a0, a1, b0, b1):
    """Closest points between segments [a0,a1] and [b0,b1], batched.

    Inputs are (..., 3) arrays. Returns (pa, pb, dist). Zero-length segments
    are valid (points).
    """
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    A = np.einsum("...k,...k->...", d1, d1)
    E = np.einsum("...k,...k->...", d2, d2)
    B = np.einsum("...k,...k->...", d1, d2)
    C = np.einsum("...k,...k->...", d1, r)
    F = np.einsum("...k,...k->...", d2, r)
    eps = 1e-14

    denom = A * E - B * B
    # tentative s on segment a; parallel (denom ~ 0) picks s = 0
    s = np.where(denom > eps, (B * F - C * E) / np.where(denom > eps, denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    # best t for that s, clamped; then s recomputed for the clamped t
    t = np.where(E > eps, (B * s + F) / np.where(E > eps, E, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    s = np.where(A > eps, (B * t - C) / np.where(A > eps, A, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)

    pa = a0 + s[..., None] * d1
    pb = b0 + t[..., None] * d2
    dist = np.linalg.norm(pb - pa, axis=-1)
    return pa, pb, dist


# ---------------------------------------------------------------------------
# per-model pair table (local endpoints gathered once)


class _PairTable:
    def __init__(self, model: KinematicModel):
        pairs = model.collision_pairs
        n = len(pairs)
        self.n_pairs = n
        self.link_a = np.array([p.body_a.link for p in pairs], dtype=int)
        self.link_b = np.array([p.body_b.link for p in pairs], dtype=int)
        self.local_a0 = np.array([p.body_a.p0 for p in pairs]).reshape(n, 3)
        self.local_a1 = np.array([p.body_a.p1 for p in pairs]).reshape(n, 3)
        self.local_b0 = np.array([p.body_b.p0 for p in pairs]).reshape(n, 3)
        self.local_b1 = np.array([p.body_b.p1 for p in pairs]).reshape(n, 3)
        self.radius_a = np.array([p.body_a.radius for p in pairs])
        self.radius_b = np.array([p.body_b.radius for p in pairs])
        self.offset = self.radius_a + self.radius_b + np.array([p.margin for p in pairs])
        # ancestry masks per pair side, for gradient assembly
        self.anc_a = model.link_ancestor_joints[self.link_a]  # (n, n_joints)
        self.anc_b = model.link_ancestor_joints[self.link_b]


def _pair_table(model: KinematicModel) -> _PairTable:
    table = getattr(model, "_collision_pair_table", None)
    if table is None:
        table = _PairTable(model)
        model._collision_pair_table = table
    return table


# ---------------------------------------------------------------------------
# evaluation


def evaluate_pairs(
    model: KinematicModel, fk: FkResult, fallback_normals: np.ndarray | None = None
) -> PairDistances:
    """Clearance of every collision pair at the configuration behind fk.

    fallback_normals, when given, supplies a per-pair direction to use where
    the medial distance is (numerically) zero; otherwise a fixed axis is used.
    """
    tb = _pair_table(model)
    n = tb.n_pairs
    if n == 0:
        empty3 = np.zeros((0, 3))
        return PairDistances(np.zeros(0), empty3, empty3.copy(), empty3.copy(), np.zeros(0, bool))
    Ra = fk.link_rot[tb.link_a]  # (n, 3, 3)
    pa_base = fk.link_pos[tb.link_a]
    Rb = fk.link_rot[tb.link_b]
    pb_base = fk.link_pos[tb.link_b]
    a0 = np.einsum("nij,nj->ni", Ra, tb.local_a0) + pa_base
    a1 = np.einsum("nij,nj->ni", Ra, tb.local_a1) + pa_base
    b0 = np.einsum("nij,nj->ni", Rb, tb.local_b0) + pb_base
    b1 = np.einsum("nij,nj->ni", Rb, tb.local_b1) + pb_base
    ma, mb, dist = segment_closest_points(a0, a1, b0, b1)
    degenerate = dist < DEGENERATE_TOL
    safe = np.where(degenerate, 1.0, dist)
    normal = (mb - ma) / safe[:, None]
    if degenerate.any():
        fb = fallback_normals if fallback_normals is not None else None
        for i in np.flatnonzero(degenerate):
            normal[i] = fb[i] if fb is not None else _FALLBACK_NORMAL
    h = dist - tb.offset
    point_a = ma + normal * tb.radius_a[:, None]
    point_b = mb - normal * tb.radius_b[:, None]
    return PairDistances(h=h, point_a=point_a, point_b=point_b, normal=normal, degenerate=degenerate)


def pair_distance(
    model: KinematicModel,
    fk: FkResult,
    pair: CollisionPair,
    fallback_normal: np.ndarray | None = None,
) -> DistanceResult:
    """Clearance for a single pair (same math as the batched path)."""
    try:
        idx = model.collision_pairs.index(pair)
    except ValueError:
        idx = None
    if idx is not None:
        fb = None
        if fallback_normal is not None:
            fb = np.tile(fallback_normal, (len(model.collision_pairs), 1))
        return evaluate_pairs(model, fk, fb).result(idx)
    # pair not in the model's list: evaluate standalone
    Ra, pa = fk.link_rot[pair.body_a.link], fk.link_pos[pair.body_a.link]
    Rb, pb = fk.link_rot[pair.body_b.link], fk.link_pos[pair.body_b.link]
    ma, mb, dist = segment_closest_points(
        Ra @ pair.body_a.p0 + pa,
        Ra @ pair.body_a.p1 + pa,
        Rb @ pair.body_b.p0 + pb,
        Rb @ pair.body_b.p1 + pb,
    )
    degenerate = bool(dist < DEGENERATE_TOL)
    if degenerate:
        normal = _FALLBACK_NORMAL if fallback_normal is None else np.asarray(fallback_normal, float)
    else:
        normal = (mb - ma) / dist
    h = float(dist - pair.body_a.radius - pair.body_b.radius - pair.margin)
    return DistanceResult(
        h=h,
        point_a=ma + normal * pair.body_a.radius,
        point_b=mb - normal * pair.body_b.radius,
        normal=normal,
        degenerate=degenerate,
    )


def distance_gradients(model: KinematicModel, fk: FkResult, dists: PairDistances) -> np.ndarray:
    """d h / d q for every pair, (n_pairs, n_joints).

    Row j is n^T (J_b - J_a) evaluated at the witness points, where J_a, J_b
    are point Jacobians of the witness points on each body's link.
    """
    tb = _pair_table(model)
    n = tb.n_pairs
    n_j = model.n_joints
    if n == 0:
        return np.zeros((0, n_j))
    axes = fk.joint_axis_world  # (n_j, 3)
    origins = fk.joint_origin_world
    rev = model._revolute
    nrm = dists.normal

    # Revolute contribution per (pair, joint) is n . (a x (p - o)); the
    # triple-product identity (p - o) . (n x a) keeps every intermediate a
    # (n_pairs, n_joints) plane instead of a rank-3 cross product.
    c0 = nrm[:, 1, None] * axes[None, :, 2] - nrm[:, 2, None] * axes[None, :, 1]
    c1 = nrm[:, 2, None] * axes[None, :, 0] - nrm[:, 0, None] * axes[None, :, 2]
    c2 = nrm[:, 0, None] * axes[None, :, 1] - nrm[:, 1, None] * axes[None, :, 0]
    o_dot_c = c0 * origins[None, :, 0] + c1 * origins[None, :, 1] + c2 * origins[None, :, 2]
    n_dot_a = nrm @ axes.T  # prismatic contribution

    def side(points, anc):
        p_dot_c = c0 * points[:, 0, None] + c1 * points[:, 1, None] + c2 * points[:, 2, None]
        contrib = np.where(rev[None, :], p_dot_c - o_dot_c, n_dot_a)
        return contrib * anc

    return side(dists.point_b, tb.anc_b) - side(dists.point_a, tb.anc_a)


def distance_gradient(
    model: KinematicModel, fk: FkResult, pair: CollisionPair, dist: DistanceResult
) -> np.ndarray:
    """d h / d q for one pair, length n_joints."""
    axes = fk.joint_axis_world
    origins = fk.joint_origin_world
    rev = model._revolute

    def point_rows(point, link):
        lever = point[None, :] - origins
        lin = np.where(rev[:, None], np.cross(axes, lever), axes)
        return (lin @ dist.normal) * model.link_ancestor_joints[link]

    return point_rows(dist.point_b, pair.body_b.link) - point_rows(dist.point_a, pair.body_a.link)


def body_world_segments(model: KinematicModel, fk: FkResult):
    """World endpoints and radius of every collision body: (p0, p1, radius) arrays."""
    bodies = model.collision_bodies
    n = len(bodies)
    p0 = np.zeros((n, 3))
    p1 = np.zeros((n, 3))
    radius = np.zeros(n)
    for i, b in enumerate(bodies):
        R, p = fk.link_rot[b.link], fk.link_pos[b.link]
        p0[i] = R @ b.p0 + p
        p1[i] = R @ b.p1 + p
        radius[i] = b.radius
    return p0, p1, radius
