"""Tracker-to-robot retargeting.

Each input device drives one or two channels, and each channel owns a task
frame plus the joint group allowed to serve it:

    headset           -> head  (orientation, neck joints)
                      -> torso_pitch (lean, torso pitch joint)
    left_controller   -> l_hand (full pose, left arm joints)
    right_controller  -> r_hand (full pose, right arm joints)
    waist             -> torso_yaw (heading, torso yaw joint)

Channels are clutched independently. Releasing a clutch captures the device
pose and the robot frame pose as an anchor pair; targets are then built from
the device's motion since capture applied to the robot pose at capture, so a
stationary device means a bitwise-zero task error and no motion at all.

A hand lock freezes the right hand relative to the left: while locked the
right channel's target is the left target composed with the captured
relative pose, and right controller motion is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .kinematics import KinematicModel, RobotState, SE3Pose, yaw_of
from .solver import (
    SolveReport,
    SolverConfig,
    SolverScratch,
    Task,
    integrate,
    solve_tick,
)

DEVICES = ("headset", "left_controller", "right_controller", "waist")
CHANNELS = ("head", "l_hand", "r_hand", "torso_yaw", "torso_pitch")
DEVICE_CHANNELS = {
    "headset": ("head", "torso_pitch"),
    "left_controller": ("l_hand",),
    "right_controller": ("r_hand",),
    "waist": ("torso_yaw",),
}
CHANNEL_DEVICE = {ch: dev for dev, chs in DEVICE_CHANNELS.items() for ch in chs}
CHANNEL_FRAME = {
    "head": "head",
    "l_hand": "l_hand",
    "r_hand": "r_hand",
    "torso_yaw": "torso",
    "torso_pitch": "torso",
}
CHANNEL_GROUP = {
    "head": "neck",
    "l_hand": "l_arm",
    "r_hand": "r_arm",
    "torso_yaw": "torso_yaw",
    "torso_pitch": "torso_pitch",
}
GRASP_STATES = ("open", "pinch", "power")

# channel lifecycle
CLUTCHED = "clutched"  # ignoring device motion
AWAITING = "awaiting"  # will capture anchors at the next tick that sees the device
ACTIVE = "active"  # tracking


@dataclass
class TrackerSample:
    stamp: float
    device: str
    pose: SE3Pose
    buttons: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"stamp": self.stamp, "device": self.device}
        d.update(self.pose.to_dict())
        if self.buttons:
            d["buttons"] = {k: bool(v) for k, v in self.buttons.items()}
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrackerSample":
        device = d.get("device")
        if device not in DEVICES:
            raise InputError(f"unknown device {device!r}")
        stamp = d.get("stamp")
        if not isinstance(stamp, (int, float)) or not math.isfinite(stamp):
            raise InputError("sample stamp must be a finite number")
        pos = d.get("position")
        quat = d.get("orientation")
        if pos is None or len(pos) != 3:
            raise InputError("sample position must be a 3-vector")
        if quat is None or len(quat) != 4:
            raise InputError("sample orientation must be a quaternion [x, y, z, w]")
        qn = float(np.linalg.norm(np.asarray(quat, dtype=float)))
        if abs(qn - 1.0) > 1e-3:
            raise InputError(f"sample orientation norm {qn:.4f} is not a unit quaternion")
        buttons = d.get("buttons", {})
        if not isinstance(buttons, dict) or any(not isinstance(v, bool) for v in buttons.values()):
            raise InputError("sample buttons must map names to booleans")
        return TrackerSample(
            stamp=float(stamp),
            device=device,
            pose=SE3Pose.from_quat(quat, pos),
            buttons=dict(buttons),
        )


@dataclass
class RetargetConfig:
    """Workspace mapping and per-channel servo parameters."""

    workspace_scale: float = 1.0
    workspace_rotation: SE3Pose = field(default_factory=SE3Pose.identity)  # rotation part used
    workspace_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lean_gain: float = 0.5  # rad of torso pitch per meter of headset advance; 0 disables
    lean_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    weights: dict[str, float] = field(
        default_factory=lambda: {
            "l_hand": 1.0,
            "r_hand": 1.0,
            "head": 0.5,
            "torso_yaw": 0.5,
            "torso_pitch": 0.5,
        }
    )
    gains: float = 5.0

    def map_pose(self, pose: SE3Pose) -> SE3Pose:
        """Similarity map from device space to robot workspace."""
        R_m = self.workspace_rotation.rotation
        return SE3Pose(
            R_m @ pose.rotation,
            R_m @ (self.workspace_scale * pose.translation) + self.workspace_offset,
        )

    def to_dict(self) -> dict:
        return {
            "workspace_scale": self.workspace_scale,
            "workspace_rotation": [float(v) for v in _quat_of(self.workspace_rotation)],
            "workspace_offset": [float(v) for v in self.workspace_offset],
            "lean_gain": self.lean_gain,
            "lean_axis": [float(v) for v in self.lean_axis],
            "weights": dict(self.weights),
            "gains": self.gains,
        }

    @staticmethod
    def from_dict(d: dict) -> "RetargetConfig":
        cfg = RetargetConfig()
        cfg.workspace_scale = float(d.get("workspace_scale", cfg.workspace_scale))
        if "workspace_rotation" in d:
            cfg.workspace_rotation = SE3Pose.from_quat(d["workspace_rotation"], [0, 0, 0])
        if "workspace_offset" in d:
            cfg.workspace_offset = np.asarray(d["workspace_offset"], dtype=float)
        cfg.lean_gain = float(d.get("lean_gain", cfg.lean_gain))
        if "lean_axis" in d:
            cfg.lean_axis = np.asarray(d["lean_axis"], dtype=float)
        cfg.weights = {**cfg.weights, **d.get("weights", {})}
        cfg.gains = float(d.get("gains", cfg.gains))
        return cfg


def _quat_of(pose: SE3Pose):
    from .kinematics import matrix_to_quat

    return matrix_to_quat(pose.rotation)


@dataclass
class CaptureAnchor:
    """Device pose and robot frame pose taken together at clutch release."""

    tracker: SE3Pose
    frame: SE3Pose


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _torso_angles(R: np.ndarray) -> tuple[float, float]:
    # chest rotation is exactly Ry(pitch) @ Rz(yaw) for this joint layout
    pitch = math.atan2(R[0, 2], R[2, 2])
    yaw = math.atan2(R[1, 0], R[1, 1])
    return pitch, yaw


def _ry_rz(pitch: float, yaw: float) -> np.ndarray:
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cp * cy, -cp * sy, sp],
            [sy, cy, 0.0],
            [-sp * cy, sp * sy, cp],
        ]
    )


class SessionState:
    """Mutable per-connection retargeting state."""

    def __init__(self):
        self.slots: dict[str, TrackerSample] = {}  # latest mapped sample per device
        self.prev_buttons: dict[str, dict[str, bool]] = {}
        self.channel_state: dict[str, str] = {ch: AWAITING for ch in CHANNELS}
        self.anchors: dict[str, CaptureAnchor] = {}
        self.lock: SE3Pose | None = None  # right hand pose in left hand frame
        self.lock_pending = False
        self.grasp: dict[str, str] = {"left": "open", "right": "open"}

    def clutch(self, channel: str, engage: bool):
        if engage:
            self.channel_state[channel] = CLUTCHED
            self.anchors.pop(channel, None)
        elif self.channel_state[channel] == CLUTCHED:
            self.channel_state[channel] = AWAITING

    def toggle_clutch(self, channel: str):
        self.clutch(channel, engage=self.channel_state[channel] != CLUTCHED)


class SessionDriver:
    """Deterministic retargeting session: feed samples and commands, then
    advance in fixed dt ticks. The replay harness and the streaming service
    both run on this class, so equal inputs give equal joint trajectories.
    """

    def __init__(
        self,
        model: KinematicModel,
        solver_config: SolverConfig | None = None,
        retarget_config: RetargetConfig | None = None,
        q0: np.ndarray | None = None,
    ):
        self.model = model
        self.solver_config = solver_config or SolverConfig()
        self.retarget_config = retarget_config or RetargetConfig()
        self.state = RobotState(model.home_q if q0 is None else q0)
        self.session = SessionState()
        self.scratch = SolverScratch()
        self.tick_index = 0
        for ch in CHANNELS:
            group = CHANNEL_GROUP[ch]
            if group not in model.joint_groups:
                raise InputError(f"model lacks joint group {group!r} needed by channel {ch!r}")
            frame = CHANNEL_FRAME[ch]
            if frame not in model.task_frames:
                raise InputError(f"model lacks task frame {frame!r} needed by channel {ch!r}")

    # -- inputs ------------------------------------------------------------

    def ingest(self, sample: TrackerSample):
        """Record the latest sample for its device and act on button edges."""
        mapped = TrackerSample(
            stamp=sample.stamp,
            device=sample.device,
            pose=self.retarget_config.map_pose(sample.pose),
            buttons=sample.buttons,
        )
        prev = self.prev_buttons_for(sample.device)
        self.session.slots[sample.device] = mapped
        self.session.prev_buttons[sample.device] = dict(sample.buttons)
        if sample.buttons.get("clutch") and not prev.get("clutch"):
            for ch in DEVICE_CHANNELS[sample.device]:
                if ch == "r_hand" and self.session.lock is not None:
                    continue  # locked hand ignores its clutch
                self.session.toggle_clutch(ch)
        if sample.device in ("left_controller", "right_controller"):
            if sample.buttons.get("lock") and not prev.get("lock"):
                self._toggle_lock()
            if sample.buttons.get("grasp") and not prev.get("grasp"):
                side = "left" if sample.device == "left_controller" else "right"
                self.cycle_grasp(side)

    def prev_buttons_for(self, device: str) -> dict[str, bool]:
        return self.session.prev_buttons.get(device, {})

    def command(self, name: str, target: str | None = None):
        """Apply a session command. `target` is a device or channel name for
        the clutch commands and a hand side for grasp_cycle."""
        if name in ("clutch_engage", "clutch_release"):
            channels = self._resolve_channels(target)
            for ch in channels:
                self.session.clutch(ch, engage=name == "clutch_engage")
        elif name == "lock_engage":
            if self.session.lock is None:
                self.session.lock_pending = True
        elif name == "lock_release":
            self._release_lock()
        elif name == "grasp_cycle":
            if target not in ("left", "right"):
                raise InputError("grasp_cycle needs target 'left' or 'right'")
            self.cycle_grasp(target)
        elif name == "reset":
            self.session = SessionState()
            self.scratch = SolverScratch()
        else:
            raise InputError(f"unknown command {name!r}")

    def _resolve_channels(self, target: str | None) -> tuple[str, ...]:
        if target is None:
            return CHANNELS
        if target in DEVICE_CHANNELS:
            return DEVICE_CHANNELS[target]
        if target in CHANNELS:
            return (target,)
        raise InputError(f"unknown clutch target {target!r}")

    def _toggle_lock(self):
        if self.session.lock is None:
            self.session.lock_pending = True
        else:
            self._release_lock()

    def _release_lock(self):
        if self.session.lock is not None:
            self.session.lock = None
            if self.session.channel_state["r_hand"] == ACTIVE:
                self.session.channel_state["r_hand"] = AWAITING
            self.session.anchors.pop("r_hand", None)
        self.session.lock_pending = False

    def cycle_grasp(self, side: str):
        cur = GRASP_STATES.index(self.session.grasp[side])
        self.session.grasp[side] = GRASP_STATES[(cur + 1) % len(GRASP_STATES)]

    # -- per-tick work -----------------------------------------------------

    def _capture_pending(self):
        fk = self.state.fk(self.model)
        if self.session.lock_pending:
            F_l = fk.frames["l_hand"]
            F_r = fk.frames["r_hand"]
            self.session.lock = F_l.inverse().compose(F_r)
            self.session.lock_pending = False
        for ch in CHANNELS:
            if self.session.channel_state[ch] != AWAITING:
                continue
            slot = self.session.slots.get(CHANNEL_DEVICE[ch])
            if slot is None:
                continue
            if ch == "torso_pitch" and self.retarget_config.lean_gain == 0.0:
                continue  # lean channel disabled
            self.session.anchors[ch] = CaptureAnchor(
                tracker=slot.pose, frame=fk.frames[CHANNEL_FRAME[ch]]
            )
            self.session.channel_state[ch] = ACTIVE

    def build_tasks(self) -> list[Task]:
        """Tasks for the current tick; captures any pending anchors first."""
        self._capture_pending()
        fk = self.state.fk(self.model)
        cfg = self.retarget_config
        tasks = []
        targets: dict[str, SE3Pose] = {}
        for ch in CHANNELS:
            if ch == "r_hand" and self.session.lock is not None:
                continue  # built after l_hand below
            if self.session.channel_state[ch] != ACTIVE:
                continue
            slot = self.session.slots.get(CHANNEL_DEVICE[ch])
            anchor = self.session.anchors[ch]
            T = slot.pose
            T0 = anchor.tracker
            F0 = anchor.frame
            if ch in ("head", "l_hand", "r_hand"):
                target = SE3Pose(
                    (T.rotation @ T0.rotation.T) @ F0.rotation,
                    F0.translation + (T.translation - T0.translation),
                )
                rows = (3, 4, 5) if ch == "head" else None
            elif ch == "torso_yaw":
                pitch_cur, _ = _torso_angles(fk.frames["torso"].rotation)
                _, yaw0 = _torso_angles(F0.rotation)
                yaw_des = yaw0 + _wrap_angle(yaw_of(T.rotation) - yaw_of(T0.rotation))
                lim = self.model.position_limits[self.model.joint_groups["torso_yaw"][0]]
                yaw_des = float(np.clip(yaw_des, lim[0], lim[1]))
                target = SE3Pose(_ry_rz(pitch_cur, yaw_des), F0.translation)
                rows = (5,)
            else:  # torso_pitch
                _, yaw_cur = _torso_angles(fk.frames["torso"].rotation)
                pitch0, _ = _torso_angles(F0.rotation)
                advance = float((T.translation - T0.translation) @ cfg.lean_axis)
                pitch_des = pitch0 + cfg.lean_gain * advance
                lim = self.model.position_limits[self.model.joint_groups["torso_pitch"][0]]
                pitch_des = float(np.clip(pitch_des, lim[0], lim[1]))
                target = SE3Pose(_ry_rz(pitch_des, yaw_cur), F0.translation)
                rows = (4,)
            targets[ch] = target
            tasks.append(
                Task(
                    name=ch,
                    frame=CHANNEL_FRAME[ch],
                    target=target,
                    selection=self.model.joint_groups[CHANNEL_GROUP[ch]],
                    weight=cfg.weights.get(ch, 1.0),
                    gains=cfg.gains,
                    rows=rows,
                )
            )
        if self.session.lock is not None:
            base = targets.get("l_hand", fk.frames["l_hand"])
            tasks.append(
                Task(
                    name="r_hand",
                    frame="r_hand",
                    target=base.compose(self.session.lock),
                    selection=self.model.joint_groups["r_arm"],
                    weight=cfg.weights.get("r_hand", 1.0),
                    gains=cfg.gains,
                )
            )
        return tasks

    def tick(self) -> "TickRecord":
        tasks = self.build_tasks()
        report = solve_tick(self.model, self.state, tasks, self.solver_config, self.scratch)
        self.state, scale = integrate(self.model, self.state, report.qdot, self.solver_config.dt)
        report.velocity_scale = scale
        record = TickRecord(
            tick=self.tick_index,
            t=self.tick_index * self.solver_config.dt,
            q=self.state.q.copy(),
            report=report,
            channels=dict(self.session.channel_state),
            locked=self.session.lock is not None,
            grasp=dict(self.session.grasp),
        )
        self.tick_index += 1
        return record


@dataclass
class TickRecord:
    """Everything logged about one tick."""

    tick: int
    t: float
    q: np.ndarray
    report: SolveReport
    channels: dict[str, str]
    locked: bool
    grasp: dict[str, str]

    def to_dict(self) -> dict:
        r = self.report
        return {
            "tick": self.tick,
            "t": self.t,
            "q": [float(v) for v in self.q],
            "qdot": [float(v) for v in r.qdot],
            "objective": r.objective,
            "task_costs": {k: float(v) for k, v in r.task_costs.items()},
            "regularization": r.regularization,
            "regularization_cost": r.regularization_cost,
            "barrier_cost": float(np.sum(r.barrier_costs)) if r.barrier_costs.size else 0.0,
            "min_h": r.min_h,
            "rhs_norm": r.rhs_norm,
            "velocity_scale": r.velocity_scale,
            "solve_time": r.solve_time,
            "channels": self.channels,
            "locked": self.locked,
            "grasp": self.grasp,
        }
