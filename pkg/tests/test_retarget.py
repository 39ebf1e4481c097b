"""Tracker-to-robot session logic: anchors, clutching, locking, grasp state,
and the workspace similarity map.

Most checks ride on one exactness property: a device that has not moved
since its anchor was captured produces a bitwise-zero task error, so any
motion observed below is attributable to the thing the test changed.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from teleik.errors import InputError
from teleik.kinematics import SE3Pose, compute_fk
from teleik.retarget import (
    CHANNELS,
    DEVICES,
    RetargetConfig,
    SessionDriver,
    TrackerSample,
)
from teleik.solver import SolverConfig


def snap(device, stamp=0.0, pos=(0.0, 0.0, 0.0), quat=(0.0, 0.0, 0.0, 1.0), buttons=None):
    d = {"stamp": stamp, "device": device, "position": list(pos), "orientation": list(quat)}
    if buttons:
        d["buttons"] = buttons
    return TrackerSample.from_dict(d)


def calibrated(model, mu=0.0, retarget=None):
    drv = SessionDriver(model, SolverConfig(mu=mu), retarget or RetargetConfig())
    for device in DEVICES:
        drv.ingest(snap(device))
    rec = drv.tick()
    return drv, rec


def torso_angles(R):
    # chest convention under test: R == Ry(pitch) @ Rz(yaw)
    pitch = float(np.arctan2(R[0, 2], R[2, 2]))
    yaw = float(np.arctan2(R[1, 0], R[1, 1]))
    return pitch, yaw


def ry_rz(pitch, yaw):
    return (Rotation.from_euler("y", pitch) * Rotation.from_euler("z", yaw)).as_matrix()


# ---------------------------------------------------------------------------
# calibration and isolation


def test_calibration_tick_is_exactly_still(model):
    drv, rec = calibrated(model)
    assert all(state == "active" for state in rec.channels.values())
    for e in rec.report.task_errors.values():
        assert np.all(e == 0.0)
    assert np.all(rec.report.qdot == 0.0)
    assert np.array_equal(rec.q, model.home_q)


def test_stationary_devices_stay_still_for_many_ticks(model):
    drv, _ = calibrated(model)
    for _ in range(50):
        rec = drv.tick()
    assert np.array_equal(rec.q, model.home_q)
    assert np.all(rec.report.qdot == 0.0)


def test_left_motion_moves_only_left_arm(model):
    drv, _ = calibrated(model)
    drv.ingest(snap("left_controller", stamp=0.1, pos=(0.1, 0.0, 0.0)))
    rec = drv.tick()
    e = rec.report.task_errors["l_hand"]
    np.testing.assert_allclose(e[:3], [0.1, 0.0, 0.0], atol=1e-15)
    assert np.all(e[3:] == 0.0)
    l_arm = set(int(i) for i in model.joint_groups["l_arm"])
    for k in range(model.n_joints):
        if k in l_arm:
            continue
        assert rec.report.qdot[k] == 0.0
    assert np.any(rec.report.qdot[sorted(l_arm)] != 0.0)


def test_torso_decomposition_convention(model):
    # the yaw/pitch extraction used below must invert Ry@Rz exactly
    R = compute_fk(model, model.home_q).frames["torso"].rotation
    pitch, yaw = torso_angles(R)
    np.testing.assert_allclose(ry_rz(pitch, yaw), R, atol=1e-12)


def test_headset_advance_commands_lean(model):
    cfg = RetargetConfig(lean_gain=2.0)
    drv, _ = calibrated(model, retarget=cfg)
    drv.ingest(snap("headset", stamp=0.1, pos=(0.05, 0.0, 0.0)))
    tasks = {t.name: t for t in drv.build_tasks()}
    pitch0, _ = torso_angles(compute_fk(model, model.home_q).frames["torso"].rotation)
    pitch_target, _ = torso_angles(tasks["torso_pitch"].target.rotation)
    assert abs(pitch_target - (pitch0 + 2.0 * 0.05)) < 1e-12
    assert tasks["torso_pitch"].rows == (4,)


def test_lean_respects_pitch_limit(model):
    cfg = RetargetConfig(lean_gain=2.0)
    drv, _ = calibrated(model, retarget=cfg)
    drv.ingest(snap("headset", stamp=0.1, pos=(5.0, 0.0, 0.0)))
    tasks = {t.name: t for t in drv.build_tasks()}
    pitch_target, _ = torso_angles(tasks["torso_pitch"].target.rotation)
    hi = model.position_limits[model.joint_groups["torso_pitch"][0]][1]
    assert abs(pitch_target - hi) < 1e-12


def test_zero_lean_gain_disables_pitch_channel(model):
    drv, rec = calibrated(model, retarget=RetargetConfig(lean_gain=0.0))
    assert rec.channels["torso_pitch"] == "awaiting"
    assert "torso_pitch" not in rec.report.task_errors
    drv.ingest(snap("headset", stamp=0.1, pos=(1.0, 0.0, 0.0)))
    rec = drv.tick()
    assert rec.report.qdot[model.joint_groups["torso_pitch"][0]] == 0.0


def test_waist_turn_commands_yaw(model):
    drv, _ = calibrated(model)
    theta = 0.3
    quat = Rotation.from_euler("z", theta).as_quat()
    drv.ingest(snap("waist", stamp=0.1, quat=quat))
    tasks = {t.name: t for t in drv.build_tasks()}
    _, yaw0 = torso_angles(compute_fk(model, model.home_q).frames["torso"].rotation)
    _, yaw_target = torso_angles(tasks["torso_yaw"].target.rotation)
    assert abs(yaw_target - (yaw0 + theta)) < 1e-12
    assert tasks["torso_yaw"].rows == (5,)


def test_waist_turn_respects_yaw_limit(model):
    drv, _ = calibrated(model)
    quat = Rotation.from_euler("z", 2.0).as_quat()
    drv.ingest(snap("waist", stamp=0.1, quat=quat))
    tasks = {t.name: t for t in drv.build_tasks()}
    _, yaw_target = torso_angles(tasks["torso_yaw"].target.rotation)
    hi = model.position_limits[model.joint_groups["torso_yaw"][0]][1]
    assert abs(yaw_target - hi) < 1e-12


def test_missing_waist_leaves_channel_awaiting(model):
    drv = SessionDriver(model, SolverConfig(mu=0.0))
    for device in ("headset", "left_controller", "right_controller"):
        drv.ingest(snap(device))
    rec = drv.tick()
    assert rec.channels["torso_yaw"] == "awaiting"
    assert "torso_yaw" not in rec.report.task_errors
    assert rec.report.qdot[model.joint_groups["torso_yaw"][0]] == 0.0


# ---------------------------------------------------------------------------
# clutching


def test_clutch_freezes_then_recaptures_without_jump(model):
    drv, _ = calibrated(model)
    drv.command("clutch_engage", "left_controller")
    drv.ingest(snap("left_controller", stamp=0.1, pos=(0.5, 0.2, -0.1)))
    rec = drv.tick()
    assert rec.channels["l_hand"] == "clutched"
    assert "l_hand" not in rec.report.task_errors
    assert np.all(rec.report.qdot == 0.0)
    drv.command("clutch_release", "left_controller")
    rec = drv.tick()
    # recapture anchors at the moved controller pose: still a perfect hold
    assert rec.channels["l_hand"] == "active"
    assert np.all(rec.report.task_errors["l_hand"] == 0.0)
    assert np.all(rec.report.qdot == 0.0)
    # motion after recapture tracks the new origin
    drv.ingest(snap("left_controller", stamp=0.2, pos=(0.5, 0.2, 0.0)))
    rec = drv.tick()
    np.testing.assert_allclose(rec.report.task_errors["l_hand"][:3], [0.0, 0.0, 0.1], atol=1e-15)


def test_clutch_via_button_edges(model):
    drv, _ = calibrated(model)
    drv.ingest(snap("left_controller", stamp=0.1, buttons={"clutch": True}))
    assert drv.session.channel_state["l_hand"] == "clutched"
    # held button must not toggle again
    drv.ingest(snap("left_controller", stamp=0.2, buttons={"clutch": True}))
    assert drv.session.channel_state["l_hand"] == "clutched"
    drv.ingest(snap("left_controller", stamp=0.3, buttons={"clutch": False}))
    assert drv.session.channel_state["l_hand"] == "clutched"
    drv.ingest(snap("left_controller", stamp=0.4, buttons={"clutch": True}))
    assert drv.session.channel_state["l_hand"] == "awaiting"


def test_headset_clutch_toggles_both_its_channels(model):
    drv, _ = calibrated(model)
    drv.ingest(snap("headset", stamp=0.1, buttons={"clutch": True}))
    assert drv.session.channel_state["head"] == "clutched"
    assert drv.session.channel_state["torso_pitch"] == "clutched"


def test_clutch_all_channels_with_no_target(model):
    drv, _ = calibrated(model)
    drv.command("clutch_engage", None)
    rec = drv.tick()
    assert all(state == "clutched" for state in rec.channels.values())
    assert rec.report.task_costs == {}


def test_clutch_unknown_target_rejected(model):
    drv, _ = calibrated(model)
    with pytest.raises(InputError):
        drv.command("clutch_engage", "elbow")


def test_unknown_command_rejected(model):
    drv, _ = calibrated(model)
    with pytest.raises(InputError):
        drv.command("warp")


# ---------------------------------------------------------------------------
# hand lock


def test_lock_ties_right_target_to_left(model):
    drv, _ = calibrated(model)
    drv.command("lock_engage")
    drv.tick()  # captures the relative pose
    fk0 = compute_fk(model, drv.state.q)
    r0 = fk0.frames["r_hand"]
    d = np.array([0.2, 0.0, 0.05])
    drv.ingest(snap("left_controller", stamp=0.1, pos=d))
    tasks = {t.name: t for t in drv.build_tasks()}
    np.testing.assert_allclose(tasks["r_hand"].target.translation - r0.translation, d, atol=1e-12)
    np.testing.assert_allclose(tasks["r_hand"].target.rotation, r0.rotation, atol=1e-12)
    # commanded targets preserve the captured relative pose exactly
    rel = tasks["l_hand"].target.inverse().compose(tasks["r_hand"].target)
    lock = drv.session.lock
    np.testing.assert_allclose(rel.rotation, lock.rotation, atol=1e-12)
    np.testing.assert_allclose(rel.translation, lock.translation, atol=1e-12)


def test_locked_right_controller_is_ignored(model):
    drv, _ = calibrated(model)
    drv.command("lock_engage")
    drv.tick()
    before = {t.name: t for t in drv.build_tasks()}["r_hand"].target
    drv.ingest(snap("right_controller", stamp=0.1, pos=(0.5, -0.5, 0.5)))
    after = {t.name: t for t in drv.build_tasks()}["r_hand"].target
    np.testing.assert_allclose(after.translation, before.translation, atol=0)
    # its clutch button is swallowed too
    drv.ingest(snap("right_controller", stamp=0.2, buttons={"clutch": True}))
    assert drv.session.channel_state["r_hand"] == "active"
    assert drv.session.lock is not None


def test_lock_release_recaptures_without_jump(model):
    drv, _ = calibrated(model)
    drv.command("lock_engage")
    drv.tick()
    drv.command("lock_release")
    assert drv.session.lock is None
    rec = drv.tick()
    assert rec.channels["r_hand"] == "active"
    assert np.all(rec.report.task_errors["r_hand"] == 0.0)
    assert np.all(rec.report.qdot == 0.0)


def test_lock_button_toggles(model):
    drv, _ = calibrated(model)
    drv.ingest(snap("left_controller", stamp=0.1, buttons={"lock": True}))
    drv.tick()
    assert drv.session.lock is not None
    drv.ingest(snap("left_controller", stamp=0.2, buttons={"lock": False}))
    drv.ingest(snap("left_controller", stamp=0.3, buttons={"lock": True}))
    assert drv.session.lock is None


# ---------------------------------------------------------------------------
# grasp


def test_grasp_cycles_per_side(model):
    drv, _ = calibrated(model)
    assert drv.session.grasp == {"left": "open", "right": "open"}
    drv.command("grasp_cycle", "left")
    assert drv.session.grasp == {"left": "pinch", "right": "open"}
    drv.command("grasp_cycle", "left")
    drv.command("grasp_cycle", "right")
    assert drv.session.grasp == {"left": "power", "right": "pinch"}
    drv.command("grasp_cycle", "left")
    assert drv.session.grasp["left"] == "open"


def test_grasp_button_rising_edge_only(model):
    drv, _ = calibrated(model)
    drv.ingest(snap("right_controller", stamp=0.1, buttons={"grasp": True}))
    drv.ingest(snap("right_controller", stamp=0.2, buttons={"grasp": True}))
    assert drv.session.grasp["right"] == "pinch"
    drv.ingest(snap("right_controller", stamp=0.3, buttons={"grasp": False}))
    drv.ingest(snap("right_controller", stamp=0.4, buttons={"grasp": True}))
    assert drv.session.grasp["right"] == "power"


def test_grasp_cycle_requires_side(model):
    drv, _ = calibrated(model)
    with pytest.raises(InputError):
        drv.command("grasp_cycle", "l_hand")


# ---------------------------------------------------------------------------
# session lifecycle


def test_reset_clears_session(model):
    drv, _ = calibrated(model)
    drv.command("lock_engage")
    drv.command("grasp_cycle", "left")
    drv.tick()
    drv.command("reset")
    assert drv.session.lock is None
    assert drv.session.anchors == {}
    assert drv.session.grasp == {"left": "open", "right": "open"}
    assert all(state == "awaiting" for state in drv.session.channel_state.values())
    assert drv.session.slots == {}


def test_driver_requires_model_groups(planar_model):
    with pytest.raises(InputError):
        SessionDriver(planar_model)


def test_tick_record_serializes(model):
    drv, rec = calibrated(model)
    d = rec.to_dict()
    assert d["tick"] == 0
    assert len(d["q"]) == model.n_joints
    assert len(d["qdot"]) == model.n_joints
    assert d["channels"]["l_hand"] == "active"
    assert d["locked"] is False
    assert d["grasp"] == {"left": "open", "right": "open"}
    assert set(d) >= {"objective", "task_costs", "regularization", "barrier_cost", "min_h", "rhs_norm", "velocity_scale", "solve_time"}


# ---------------------------------------------------------------------------
# tracker samples and workspace map


def test_sample_round_trip():
    quat = Rotation.from_euler("xyz", [0.3, -0.2, 0.9]).as_quat()
    s = snap("headset", stamp=1.5, pos=(0.1, 0.2, 0.3), quat=quat, buttons={"clutch": True})
    back = TrackerSample.from_dict(s.to_dict())
    assert back.device == "headset"
    assert back.stamp == 1.5
    np.testing.assert_allclose(back.pose.translation, [0.1, 0.2, 0.3], atol=1e-12)
    np.testing.assert_allclose(back.pose.rotation, s.pose.rotation, atol=1e-12)
    assert back.buttons == {"clutch": True}


@pytest.mark.parametrize(
    "patch, message",
    [
        ({"device": "elbow_tracker"}, "unknown device"),
        ({"stamp": float("nan")}, "finite"),
        ({"stamp": "late"}, "finite"),
        ({"position": [1, 2]}, "3-vector"),
        ({"orientation": [0, 0, 1]}, "quaternion"),
        ({"orientation": [0, 0, 0, 0.5]}, "unit quaternion"),
        ({"buttons": {"clutch": 1}}, "booleans"),
    ],
)
def test_sample_validation(patch, message):
    d = {"stamp": 0.0, "device": "headset", "position": [0, 0, 0], "orientation": [0, 0, 0, 1]}
    d.update(patch)
    with pytest.raises(InputError, match=message):
        TrackerSample.from_dict(d)


def test_workspace_map_is_a_similarity():
    rng = np.random.default_rng(271)
    R_m = Rotation.random(random_state=9).as_matrix()
    cfg = RetargetConfig(
        workspace_scale=1.7,
        workspace_rotation=SE3Pose(R_m, np.zeros(3)),
        workspace_offset=np.array([0.4, -0.1, 1.0]),
    )
    for _ in range(10):
        A = SE3Pose(Rotation.random(random_state=None).as_matrix(), rng.standard_normal(3))
        B = SE3Pose(Rotation.random(random_state=None).as_matrix(), rng.standard_normal(3))
        mA, mB = cfg.map_pose(A), cfg.map_pose(B)
        # relative rotation conjugates, relative translation scales and rotates
        np.testing.assert_allclose(
            mB.rotation @ mA.rotation.T, R_m @ (B.rotation @ A.rotation.T) @ R_m.T, atol=1e-12
        )
        np.testing.assert_allclose(
            mB.translation - mA.translation, 1.7 * R_m @ (B.translation - A.translation), atol=1e-12
        )


def test_workspace_scale_amplifies_commanded_motion(model):
    cfg = RetargetConfig(workspace_scale=2.0)
    drv, _ = calibrated(model, retarget=cfg)
    drv.ingest(snap("left_controller", stamp=0.1, pos=(0.05, 0.0, 0.0)))
    rec = drv.tick()
    np.testing.assert_allclose(rec.report.task_errors["l_hand"][:3], [0.1, 0.0, 0.0], atol=1e-15)


def test_retarget_config_round_trip():
    cfg = RetargetConfig(workspace_scale=1.3, lean_gain=0.7)
    cfg.weights["head"] = 0.9
    back = RetargetConfig.from_dict(cfg.to_dict())
    assert back.workspace_scale == 1.3
    assert back.lean_gain == 0.7
    assert back.weights["head"] == 0.9
    np.testing.assert_allclose(back.workspace_rotation.rotation, np.eye(3), atol=1e-12)
