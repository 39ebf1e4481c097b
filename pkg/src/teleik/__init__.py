"""Upper-body teleoperation retargeting.

Tracker poses in, joint velocities out: per-device joint-set assignment via
Jacobian column selection, differential IK with adaptive damping, and a
relaxed log barrier on self-collision clearance. Includes an offline replay
harness and a WebSocket streaming service.
"""

from .barrier import BarrierQuadratic, barrier_quadratic, barrier_terms, barrier_value
from .collision import (
    CollisionBody,
    CollisionPair,
    DistanceResult,
    distance_gradient,
    distance_gradients,
    evaluate_pairs,
    pair_distance,
)
from .errors import InputError, ModelError, TrajectoryError
from .harness import ReplayResult, load_trajectory, replay, run_scenario, save_trajectory
from .kinematics import (
    FkResult,
    Joint,
    KinematicModel,
    RobotState,
    SE3Pose,
    bundled_model_path,
    compute_fk,
    forward_kinematics,
    frame_jacobian,
    load_model,
    modify_jacobian,
    pose_error,
)
from .retarget import RetargetConfig, SessionDriver, TrackerSample
from .solver import (
    SolveReport,
    SolverConfig,
    SolverScratch,
    Task,
    integrate,
    solve_tick,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierQuadratic",
    "CollisionBody",
    "CollisionPair",
    "DistanceResult",
    "FkResult",
    "InputError",
    "Joint",
    "KinematicModel",
    "ModelError",
    "ReplayResult",
    "RetargetConfig",
    "RobotState",
    "SE3Pose",
    "SessionDriver",
    "SolveReport",
    "SolverConfig",
    "SolverScratch",
    "Task",
    "TrackerSample",
    "TrajectoryError",
    "barrier_quadratic",
    "barrier_terms",
    "barrier_value",
    "bundled_model_path",
    "compute_fk",
    "distance_gradient",
    "distance_gradients",
    "evaluate_pairs",
    "forward_kinematics",
    "frame_jacobian",
    "integrate",
    "load_model",
    "load_trajectory",
    "modify_jacobian",
    "pair_distance",
    "pose_error",
    "replay",
    "run_scenario",
    "save_trajectory",
    "solve_tick",
]
