"""One-tick differential IK: weighted task least squares with adaptive
regularization and a soft self-collision barrier, solved as a single
positive definite linear system.

Each task contributes w * ||Kp*e - J_m qdot||^2 / 2 where J_m is the frame
Jacobian with non-selected columns zeroed. The barrier contributes the
second-order model of B(h_j) along each pair's clearance gradient. Stacking
gradients gives

    H = sum_i w_i J_i^T J_i  +  lambda I  +  sum_j B''_j g_j g_j^T
    b = sum_i w_i J_i^T (Kp_i * e_i)  -  sum_j B'_j g_j

and qdot = H^{-1} b via Cholesky. lambda scales with the current total task
error so the step stays damped away from the targets and stiff near them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import collision
from .barrier import barrier_terms
from .errors import InputError
from .kinematics import (
    KinematicModel,
    RobotState,
    SE3Pose,
    frame_jacobians,
    pose_error,
)


@dataclass
class Task:
    """One tracked frame: drive `frame` toward `target` using only the
    joints in `selection`.

    rows, when given, restricts the task to a subset of the 6 error rows
    (0..2 linear, 3..5 angular); gains may be a scalar or one value per row.
    """

    name: str
    frame: str
    target: SE3Pose
    selection: tuple[int, ...]
    weight: float = 1.0
    gains: float | np.ndarray = 5.0
    rows: tuple[int, ...] | None = None


@dataclass
class SolverConfig:
    # mu/delta trade tracking accuracy against wall stiffness: the barrier
    # pushes tracked frames off their targets by roughly (mu/h)/(w*gain) at
    # clearance h, so mu must stay small enough for millimetre tracking while
    # delta keeps the quadratic extension narrow enough to stop a commanded
    # interpenetration within ~1 mm.
    dt: float = 0.01
    kappa: float = 1.0  # error-proportional damping gain
    lambda_min: float = 1e-6
    mu: float = 3e-5  # barrier strength
    delta: float = 1e-4  # barrier relaxation threshold
    # per-pair {"bodyA--bodyB": {"mu": ..., "delta": ...}} overrides
    pair_barriers: dict = field(default_factory=dict)


def _pair_params(model: KinematicModel, config: SolverConfig):
    """Per-pair (mu, delta), honoring name-keyed overrides when present."""
    if not config.pair_barriers:
        return config.mu, config.delta
    n = len(model.collision_pairs)
    mu = np.full(n, float(config.mu))
    delta = np.full(n, float(config.delta))
    seen = set()
    for i, pair in enumerate(model.collision_pairs):
        for key in (
            f"{pair.body_a.name}--{pair.body_b.name}",
            f"{pair.body_b.name}--{pair.body_a.name}",
        ):
            got = config.pair_barriers.get(key)
            if got is not None:
                mu[i] = float(got.get("mu", config.mu))
                delta[i] = float(got.get("delta", config.delta))
                seen.add(key)
                break
    unknown = set(config.pair_barriers) - seen
    if unknown:
        raise InputError(f"pair_barriers for unknown pairs: {sorted(unknown)}")
    return mu, delta


@dataclass
class SolverScratch:
    """State carried between ticks: last usable contact direction per pair."""

    normals: np.ndarray | None = None


@dataclass
class SolveReport:
    qdot: np.ndarray
    objective: float
    task_costs: dict[str, float]
    task_errors: dict[str, np.ndarray]
    regularization: float  # lambda actually applied
    regularization_cost: float
    barrier_values: np.ndarray  # B(h) per pair
    barrier_costs: np.ndarray  # second-order barrier model at qdot, per pair
    pair_h: np.ndarray
    min_h: float
    rhs_norm: float
    solve_time: float
    velocity_scale: float = 1.0
    iterations: int = 1


def adaptive_regularization(tasks_error_sq: float, config: SolverConfig) -> float:
    """Damping factor lambda = kappa * (weighted squared task error) + lambda_min."""
    return config.kappa * tasks_error_sq + config.lambda_min


_index_cache: dict[tuple, np.ndarray] = {}


def _indices(key: tuple) -> np.ndarray:
    got = _index_cache.get(key)
    if got is None:
        got = _index_cache[key] = np.asarray(key, dtype=np.intp)
    return got


def solve_tick(
    model: KinematicModel,
    state: RobotState,
    tasks: list[Task],
    config: SolverConfig,
    scratch: SolverScratch | None = None,
) -> SolveReport:
    t_start = time.perf_counter()
    n = model.n_joints
    fk = state.fk(model)

    H = np.zeros((n, n))
    b = np.zeros(n)
    err_sq = 0.0
    task_rows = []
    frame_names = list(dict.fromkeys(task.frame for task in tasks))
    J_stack = frame_jacobians(model, state.q, frame_names, fk)
    frame_slot = {name: i for i, name in enumerate(frame_names)}
    for task in tasks:
        if task.weight < 0:
            raise InputError(f"task {task.name!r}: negative weight")
        J = J_stack[frame_slot[task.frame]]
        e = pose_error(fk.frames[task.frame], task.target)
        k = np.asarray(task.gains, dtype=float)
        if task.rows is not None:
            rows = _indices(tuple(task.rows))
            J = J[rows]
            e = e[rows]
        if k.ndim and k.size != e.size:
            raise InputError(
                f"task {task.name!r}: {k.size} gains for {e.size} error rows"
            )
        # Only the selected columns enter the normal equations; the zeroed
        # columns of the modified Jacobian contribute nothing.
        sel = _indices(tuple(task.selection))
        Js = J[:, sel]
        H[sel[:, None], sel] += task.weight * (Js.T @ Js)
        b[sel] += task.weight * (Js.T @ (k * e))
        err_sq += task.weight * float(e @ e)
        task_rows.append((task, Js, sel, e, k))

    lam = adaptive_regularization(err_sq, config)
    H.flat[:: n + 1] += lam

    prev_normals = scratch.normals if scratch is not None else None
    dists = collision.evaluate_pairs(model, fk, prev_normals)
    grads = collision.distance_gradients(model, fk, dists)
    mu, delta = _pair_params(model, config)
    b_val, b_slope, b_curv = barrier_terms(dists.h, mu, delta)
    if dists.h.size:
        H += (grads * b_curv[:, None]).T @ grads
        b -= grads.T @ b_slope
    if scratch is not None:
        scratch.normals = dists.normal

    if tasks:
        qdot = cho_solve(cho_factor(H, check_finite=False), b, check_finite=False)
    else:
        # no active tracking: hold still rather than drift down the barrier
        qdot = np.zeros(n)

    task_costs = {}
    task_errors = {}
    for task, Js, sel, e, k in task_rows:
        r = k * e - Js @ qdot[sel]
        task_costs[task.name] = 0.5 * task.weight * float(r @ r)
        task_errors[task.name] = e
    reg_cost = 0.5 * lam * float(qdot @ qdot)
    step = grads @ qdot if dists.h.size else np.zeros(0)
    barrier_costs = b_val + b_slope * step + 0.5 * b_curv * step**2
    objective = sum(task_costs.values()) + reg_cost + float(np.sum(barrier_costs))

    return SolveReport(
        qdot=qdot,
        objective=objective,
        task_costs=task_costs,
        task_errors=task_errors,
        regularization=lam,
        regularization_cost=reg_cost,
        barrier_values=np.asarray(b_val, dtype=float).reshape(-1),
        barrier_costs=np.asarray(barrier_costs, dtype=float).reshape(-1),
        pair_h=dists.h,
        min_h=dists.min_h,
        rhs_norm=float(np.linalg.norm(b)),
        solve_time=time.perf_counter() - t_start,
    )


def integrate(
    model: KinematicModel, state: RobotState, qdot: np.ndarray, dt: float
) -> tuple[RobotState, float]:
    """Advance one tick: scale qdot uniformly into velocity limits, then
    clamp positions to joint limits. Returns (new state, scale applied)."""
    qdot = np.asarray(qdot, dtype=float)
    vmax = model.velocity_limits
    over = np.abs(qdot) / vmax
    peak = float(over.max()) if over.size else 0.0
    scale = 1.0 if peak <= 1.0 else 1.0 / peak
    q = state.q + scale * dt * qdot
    q = np.clip(q, model.position_limits[:, 0], model.position_limits[:, 1])
    return RobotState(q), scale
