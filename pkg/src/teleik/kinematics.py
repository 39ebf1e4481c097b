"""Kinematic model, forward kinematics, geometric Jacobians, and task-Jacobian
column selection.

Conventions used throughout the package:

* rotations are 3x3 orthonormal matrices; quaternions appear only at the JSON
  boundary (scalar-last ``[x, y, z, w]``),
* Jacobians are 6 x n_joints, world-aligned at the task-frame origin, linear
  rows first,
* a joint moves its child link by ``T_child = T_parent * origin * motion(q)``,
  with the joint axis expressed in the frame established by ``origin``
  (equal to the parent frame direction whenever the origin carries no
  rotation, as in the bundled model).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ModelError

ROTATION_SNAP_TOL = 1e-9  # below this geodesic angle a rotation error is exactly zero


# ---------------------------------------------------------------------------
# rotations


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    t = 1.0 - c
    return np.array(
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    )


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, radians) of a rotation matrix.

    Angles below ``ROTATION_SNAP_TOL`` return an exact zero vector so that
    equal orientations produce exactly zero error. Angles near pi use the
    axis-extraction branch on the symmetric part, which stays stable where
    the skew part vanishes.
    """
    v0 = 0.5 * (R[2, 1] - R[1, 2])
    v1 = 0.5 * (R[0, 2] - R[2, 0])
    v2 = 0.5 * (R[1, 0] - R[0, 1])
    s_vec = np.array([v0, v1, v2])
    s = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    angle = math.atan2(s, c)
    if angle < ROTATION_SNAP_TOL:
        return np.zeros(3)
    if c > -0.9:
        # away from pi the skew part gives the axis directly; angle/s -> 1
        # for small angles, so this stays exact down to the snap threshold
        return s_vec * (angle / s)
    # near pi the skew part vanishes: recover the axis from the dominant
    # column of (R + R^T)/2 - c I = (1 - c) a a^T
    A = 0.5 * (R + R.T) - c * np.eye(3)
    k = int(np.argmax(np.diag(A)))
    axis = A[:, k] / np.linalg.norm(A[:, k])
    if float(s_vec @ axis) < 0.0:
        axis = -axis
    return axis * angle


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a scalar-last unit quaternion."""
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z + w * w)
    if n < 1e-12:
        raise InputError("zero-norm quaternion")
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Scalar-last quaternion from a rotation matrix (Shepperd's method)."""
    m00, m01, m02 = R[0]
    m10, m11, m12 = R[1]
    m20, m21, m22 = R[2]
    tr = m00 + m11 + m22
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        w, x, y, z = 0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s
    elif m00 > m11 and m00 > m22:
        s = math.sqrt(1.0 + m00 - m11 - m22) * 2
        w, x, y, z = (m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s
    elif m11 > m22:
        s = math.sqrt(1.0 + m11 - m00 - m22) * 2
        w, x, y, z = (m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s
    else:
        s = math.sqrt(1.0 + m22 - m00 - m11) * 2
        w, x, y, z = (m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


def yaw_of(R: np.ndarray) -> float:
    """Heading of a rotation about the world vertical: yaw of the body x axis."""
    return math.atan2(R[1, 0], R[0, 0])


# ---------------------------------------------------------------------------
# SE(3)


@dataclass(frozen=True)
class SE3Pose:
    """Rigid transform: 3x3 rotation matrix plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "SE3Pose":
        return SE3Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat(quat, translation) -> "SE3Pose":
        return SE3Pose(quat_to_matrix(np.asarray(quat, dtype=float)), translation)

    @staticmethod
    def from_rotvec(rotvec, translation) -> "SE3Pose":
        rv = np.asarray(rotvec, dtype=float)
        angle = float(np.linalg.norm(rv))
        if angle < 1e-300:
            return SE3Pose(np.eye(3), translation)
        return SE3Pose(rotation_about_axis(rv / angle, angle), translation)

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        return SE3Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "SE3Pose":
        Rt = self.rotation.T
        return SE3Pose(Rt, -(Rt @ self.translation))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def validate(self, tol: float = 1e-9) -> None:
        R = self.rotation
        if R.shape != (3, 3):
            raise InputError("rotation must be 3x3")
        if np.max(np.abs(R @ R.T - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
            raise InputError("rotation is not orthonormal with determinant +1")

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.translation],
            "orientation": [float(v) for v in matrix_to_quat(self.rotation)],
        }

    @staticmethod
    def from_dict(d: dict) -> "SE3Pose":
        return SE3Pose.from_quat(d.get("orientation", [0, 0, 0, 1]), d.get("position", [0, 0, 0]))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str  # "revolute" | "prismatic"
    axis: np.ndarray  # unit 3-vector
    origin: SE3Pose  # fixed transform from parent link frame
    parent_link: int
    child_link: int
    position_limits: tuple[float, float]
    velocity_limit: float


@dataclass(frozen=True)
class TaskFrame:
    name: str
    link: int
    local: SE3Pose


class KinematicModel:
    """Joint tree with named task frames, joint groups, and collision geometry.

    Collision bodies and pairs are stored here but their geometry types and
    distance math live in :mod:`teleik.collision`.
    """

    def __init__(
        self,
        name: str,
        link_names: list[str],
        joints: list[Joint],
        task_frames: dict[str, TaskFrame],
        joint_groups: dict[str, tuple[int, ...]],
        collision_bodies=(),
        collision_pairs=(),
        home_q: np.ndarray | None = None,
    ):
        self.name = name
        self.link_names = tuple(link_names)
        self.joints = tuple(joints)
        self.task_frames = dict(task_frames)
        self.joint_groups = {k: tuple(v) for k, v in joint_groups.items()}
        self.collision_bodies = tuple(collision_bodies)
        self.collision_pairs = tuple(collision_pairs)
        self.n_joints = len(self.joints)
        self.n_links = len(self.link_names)
        self.position_limits = np.array([j.position_limits for j in self.joints])
        self.velocity_limits = np.array([j.velocity_limit for j in self.joints])
        self.home_q = np.zeros(self.n_joints) if home_q is None else np.asarray(home_q, float)
        self._revolute = np.array([j.kind == "revolute" for j in self.joints])
        self._build_ancestry()
        self.validate()

    def _build_ancestry(self):
        n_j, n_l = self.n_joints, self.n_links
        masks = np.zeros((n_l, n_j), dtype=bool)
        for idx, joint in enumerate(self.joints):
            if joint.parent_link >= 0:
                masks[joint.child_link] = masks[joint.parent_link]
            masks[joint.child_link, idx] = True
        self.link_ancestor_joints = masks
        self.body_index = {b.name: i for i, b in enumerate(self.collision_bodies)}

    def frame_ancestors(self, frame: str) -> np.ndarray:
        return self.link_ancestor_joints[self.task_frames[frame].link]

    def group_indices(self, group: str) -> tuple[int, ...]:
        if group not in self.joint_groups:
            raise InputError(f"unknown joint group {group!r}")
        return self.joint_groups[group]

    def adjacent_links(self, link_a: int, link_b: int) -> bool:
        for j in self.joints:
            if {j.parent_link, j.child_link} == {link_a, link_b}:
                return True
        return False

    def validate(self):
        seen_children = set()
        for idx, j in enumerate(self.joints):
            if j.kind not in ("revolute", "prismatic"):
                raise ModelError(f"joint {j.name!r}: unknown kind {j.kind!r}")
            if abs(np.linalg.norm(j.axis) - 1.0) > 1e-9:
                raise ModelError(f"joint {j.name!r}: axis is not unit length")
            lo, hi = j.position_limits
            if not lo < hi:
                raise ModelError(f"joint {j.name!r}: position limits must satisfy min < max")
            if j.velocity_limit <= 0:
                raise ModelError(f"joint {j.name!r}: velocity limit must be positive")
            if not (0 <= j.parent_link < self.n_links and 0 < j.child_link < self.n_links):
                raise ModelError(f"joint {j.name!r}: link index out of range")
            if j.child_link in seen_children or j.child_link == 0:
                raise ModelError(f"joint {j.name!r}: child link already driven or is the base")
            if j.parent_link != 0 and j.parent_link not in seen_children:
                raise ModelError(
                    f"joint {j.name!r}: parent link {j.parent_link} not yet defined "
                    "(joints must be in topological order)"
                )
            seen_children.add(j.child_link)
        for f in self.task_frames.values():
            if not 0 <= f.link < self.n_links:
                raise ModelError(f"frame {f.name!r}: link index out of range")
        if self.home_q.shape != (self.n_joints,):
            raise ModelError("home configuration length does not match joint count")
        lo, hi = self.position_limits[:, 0], self.position_limits[:, 1]
        if np.any(self.home_q < lo) or np.any(self.home_q > hi):
            raise ModelError("home configuration violates position limits")
        names = list(self.joint_groups)
        for gname, idxs in self.joint_groups.items():
            if any(not 0 <= i < self.n_joints for i in idxs):
                raise ModelError(f"group {gname!r}: joint index out of range")
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if set(self.joint_groups[a]) & set(self.joint_groups[b]):
                    raise ModelError(f"joint groups {a!r} and {b!r} overlap")

    def in_limit_sample(self, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
        lo = self.position_limits[:, 0] + margin
        hi = self.position_limits[:, 1] - margin
        return rng.uniform(lo, hi)


# ---------------------------------------------------------------------------
# robot state and forward kinematics


@dataclass
class FkResult:
    """World placement of every link, joint, and task frame for one q."""

    link_rot: np.ndarray  # (n_links, 3, 3)
    link_pos: np.ndarray  # (n_links, 3)
    joint_axis_world: np.ndarray  # (n_joints, 3)
    joint_origin_world: np.ndarray  # (n_joints, 3)
    frames: dict[str, SE3Pose] = field(default_factory=dict)

    def link_pose(self, link: int) -> SE3Pose:
        return SE3Pose(self.link_rot[link], self.link_pos[link])


class _FkTable:
    """Per-model constants for the hot FK path: joint axes as skew matrices
    so a whole tick's motion rotations come from one vectorized Rodrigues
    evaluation instead of a per-joint Python call."""

    def __init__(self, model: KinematicModel):
        n = model.n_joints
        self.axes = np.array([j.axis for j in model.joints], dtype=float)
        self.origin_rot = np.array([j.origin.rotation for j in model.joints])
        self.origin_t = np.array([j.origin.translation for j in model.joints])
        self.parent = np.array([j.parent_link for j in model.joints])
        self.child = np.array([j.child_link for j in model.joints])
        self.revolute = model._revolute.copy()
        K = np.zeros((n, 3, 3))
        x, y, z = self.axes[:, 0], self.axes[:, 1], self.axes[:, 2]
        K[:, 0, 1], K[:, 0, 2] = -z, y
        K[:, 1, 0], K[:, 1, 2] = z, -x
        K[:, 2, 0], K[:, 2, 1] = -y, x
        # prismatic motion is handled as a translation; zero K keeps M = I
        K[~self.revolute] = 0.0
        self.K = K
        self.K2 = K @ K
        self.frames = [
            (name, f.link, f.local.rotation, f.local.translation)
            for name, f in model.task_frames.items()
        ]


def _fk_table(model: KinematicModel) -> _FkTable:
    tb = getattr(model, "_fk_unroll", None)
    if tb is None:
        tb = _FkTable(model)
        model._fk_unroll = tb
    return tb


def compute_fk(model: KinematicModel, q: np.ndarray) -> FkResult:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_joints,):
        raise InputError(f"expected q of length {model.n_joints}, got shape {q.shape}")
    tb = _fk_table(model)
    link_rot = np.empty((model.n_links, 3, 3))
    link_pos = np.empty((model.n_links, 3))
    link_rot[0] = np.eye(3)
    link_pos[0] = 0.0
    origin_world = np.empty((model.n_joints, 3))
    s = np.sin(q)
    c = np.cos(q)
    motion = np.eye(3) + s[:, None, None] * tb.K + (1.0 - c)[:, None, None] * tb.K2
    step = tb.origin_rot @ motion  # origin ∘ motion, one batched matmul
    for idx in range(model.n_joints):
        parent = tb.parent[idx]
        child = tb.child[idx]
        Rp = link_rot[parent]
        pj = Rp @ tb.origin_t[idx] + link_pos[parent]
        origin_world[idx] = pj
        link_rot[child] = Rp @ step[idx]
        if tb.revolute[idx]:
            link_pos[child] = pj
        else:
            link_pos[child] = pj + (link_rot[child] @ tb.axes[idx]) * q[idx]
    # motion is a rotation about the axis itself, so the child frame carries
    # the joint axis unchanged
    axis_world = np.einsum("ijk,ik->ij", link_rot[tb.child], tb.axes)
    frames = {}
    for name, link, local_rot, local_t in tb.frames:
        frames[name] = SE3Pose(
            link_rot[link] @ local_rot,
            link_rot[link] @ local_t + link_pos[link],
        )
    return FkResult(link_rot, link_pos, axis_world, origin_world, frames)


def forward_kinematics(model: KinematicModel, q: np.ndarray) -> dict[str, SE3Pose]:
    """World pose of every named task frame at configuration q."""
    return compute_fk(model, q).frames


class RobotState:
    """Joint positions plus a lazily computed FK cache for that configuration.

    The cache belongs to a single solver tick; states are otherwise treated
    as immutable values.
    """

    def __init__(self, q: np.ndarray):
        q = np.array(q, dtype=float)
        q.setflags(write=False)
        self.q = q
        self._fk: tuple[KinematicModel, FkResult] | None = None

    def fk(self, model: KinematicModel) -> FkResult:
        if self._fk is None or self._fk[0] is not model:
            self._fk = (model, compute_fk(model, self.q))
        return self._fk[1]

    def frame_pose(self, model: KinematicModel, frame: str) -> SE3Pose:
        fk = self.fk(model)
        if frame not in fk.frames:
            raise InputError(f"unknown task frame {frame!r}")
        return fk.frames[frame]


# ---------------------------------------------------------------------------
# Jacobians and task errors


def cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of (k, 3) arrays.

    np.cross spends most of its time on axis bookkeeping at these sizes, and
    this sits inside the per-tick hot path.
    """
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def frame_jacobian(
    model: KinematicModel, q: np.ndarray, frame: str, fk: FkResult | None = None
) -> np.ndarray:
    """Geometric Jacobian (6 x n_joints) of a task frame.

    World-aligned at the frame origin; rows are linear velocity then angular
    velocity. Columns of joints that are not ancestors of the frame are
    exactly zero.
    """
    if frame not in model.task_frames:
        raise InputError(f"unknown task frame {frame!r}")
    if fk is None:
        fk = compute_fk(model, q)
    p_f = fk.frames[frame].translation
    J = np.zeros((6, model.n_joints))
    mask = model.frame_ancestors(frame)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return J
    axes = fk.joint_axis_world[idx]
    rev = model._revolute[idx]
    lever = p_f[None, :] - fk.joint_origin_world[idx]
    lin = np.where(rev[:, None], cross_rows(axes, lever), axes)
    ang = np.where(rev[:, None], axes, 0.0)
    J[:3, idx] = lin.T
    J[3:, idx] = ang.T
    return J


def frame_jacobians(
    model: KinematicModel, q: np.ndarray, frames: list[str], fk: FkResult | None = None
) -> np.ndarray:
    """Geometric Jacobians of several task frames at once, (len(frames), 6, n).

    Matches frame_jacobian column for column; batching the lever arithmetic
    over frames keeps the per-tick cost flat in the number of tasks.
    """
    for f in frames:
        if f not in model.task_frames:
            raise InputError(f"unknown task frame {f!r}")
    if fk is None:
        fk = compute_fk(model, q)
    n = model.n_joints
    n_f = len(frames)
    J = np.zeros((n_f, 6, n))
    if n_f == 0 or n == 0:
        return J
    p_f = np.array([fk.frames[f].translation for f in frames])
    anc = np.array([model.frame_ancestors(f) for f in frames])
    axes = fk.joint_axis_world
    rev = model._revolute
    lever = p_f[:, None, :] - fk.joint_origin_world[None, :, :]
    lin = np.empty_like(lever)
    a0, a1, a2 = axes[:, 0], axes[:, 1], axes[:, 2]
    lin[..., 0] = a1 * lever[..., 2] - a2 * lever[..., 1]
    lin[..., 1] = a2 * lever[..., 0] - a0 * lever[..., 2]
    lin[..., 2] = a0 * lever[..., 1] - a1 * lever[..., 0]
    lin = np.where(rev[None, :, None], lin, axes[None, :, :])
    ang = np.where(rev[:, None], axes, 0.0)
    mask = anc[:, :, None]
    J[:, :3, :] = np.where(mask, lin, 0.0).transpose(0, 2, 1)
    J[:, 3:, :] = np.where(mask, ang[None], 0.0).transpose(0, 2, 1)
    return J


def modify_jacobian(J: np.ndarray, selection) -> np.ndarray:
    """Zero every Jacobian column outside the selected joint index set.

    Equivalent to post-multiplying by a diagonal 0/1 selection matrix; an
    empty selection yields the zero matrix.
    """
    Jm = np.zeros_like(J)
    sel = np.fromiter(selection, dtype=int) if not isinstance(selection, np.ndarray) else selection
    if sel.size:
        Jm[:, sel] = J[:, sel]
    return Jm


def pose_error(current: SE3Pose, target: SE3Pose) -> np.ndarray:
    """6-vector task error: translation difference, then the world-frame
    rotation log of target relative to current (radians)."""
    e = np.empty(6)
    e[:3] = target.translation - current.translation
    e[3:] = rotation_log(target.rotation @ current.rotation.T)
    return e


# ---------------------------------------------------------------------------
# model file I/O


def bundled_model_path(name: str = "astro17") -> str:
    """Filesystem path of a model JSON shipped with the package."""
    from importlib.resources import files

    return str(files("teleik").joinpath("models", f"{name}.json"))


def load_model(path: str) -> KinematicModel:
    """Load and validate a kinematic model JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return model_from_dict(doc)


def model_from_dict(doc: dict) -> KinematicModel:
    from . import collision  # deferred: collision owns the geometry types

    for key in ("links", "joints", "frames", "groups"):
        if key not in doc:
            raise ModelError(f"model is missing required key {key!r}")
    link_names = list(doc["links"])
    link_index = {n: i for i, n in enumerate(link_names)}
    if len(link_index) != len(link_names):
        raise ModelError("duplicate link names")

    def resolve_link(name, where):
        if name not in link_index:
            raise ModelError(f"{where}: unknown link {name!r}")
        return link_index[name]

    joints = []
    for jd in doc["joints"]:
        joints.append(
            Joint(
                name=jd["name"],
                kind=jd.get("kind", "revolute"),
                axis=np.asarray(jd["axis"], dtype=float),
                origin=SE3Pose.from_dict(jd.get("origin", {})),
                parent_link=resolve_link(jd["parent"], f"joint {jd['name']!r}"),
                child_link=resolve_link(jd["child"], f"joint {jd['name']!r}"),
                position_limits=tuple(jd["position_limits"]),
                velocity_limit=float(jd["velocity_limit"]),
            )
        )
    frames = {}
    for name, fd in doc["frames"].items():
        frames[name] = TaskFrame(
            name=name,
            link=resolve_link(fd["link"], f"frame {name!r}"),
            local=SE3Pose.from_dict(fd.get("origin", {})),
        )
    groups = {name: tuple(int(i) for i in idxs) for name, idxs in doc["groups"].items()}

    home_q = np.zeros(len(joints))
    joint_index = {j.name: i for i, j in enumerate(joints)}
    for jname, value in doc.get("home", {}).items():
        if jname not in joint_index:
            raise ModelError(f"home configuration names unknown joint {jname!r}")
        home_q[joint_index[jname]] = float(value)

    bodies = []
    for bd in doc.get("collision_bodies", []):
        bodies.append(
            collision.body_from_dict(bd, resolve_link(bd["link"], f"body {bd.get('name')!r}"))
        )
    body_by_name = {b.name: b for b in bodies}
    if len(body_by_name) != len(bodies):
        raise ModelError("duplicate collision body names")
    pairs = []
    for pd in doc.get("collision_pairs", []):
        for key in ("a", "b"):
            if pd[key] not in body_by_name:
                raise ModelError(f"collision pair references unknown body {pd[key]!r}")
        pairs.append(
            collision.CollisionPair(
                body_a=body_by_name[pd["a"]],
                body_b=body_by_name[pd["b"]],
                margin=float(pd.get("margin", 0.0)),
            )
        )

    model = KinematicModel(
        name=doc.get("name", "model"),
        link_names=link_names,
        joints=joints,
        task_frames=frames,
        joint_groups=groups,
        collision_bodies=bodies,
        collision_pairs=pairs,
        home_q=home_q,
    )
    collision.validate_pairs(model)
    return model
