"""Shared fixtures: the bundled model and small synthetic models that the
oracle-based tests build from plain dicts (exercising the JSON schema path)."""

import numpy as np
import pytest

from teleik.kinematics import KinematicModel, bundled_model_path, load_model, model_from_dict


@pytest.fixture(scope="session")
def model() -> KinematicModel:
    return load_model(bundled_model_path())


def one_joint_z_doc() -> dict:
    """Single revolute joint about world z with a frame 1 m out along x."""
    return {
        "name": "one_joint",
        "links": ["base", "arm"],
        "joints": [
            {
                "name": "j0",
                "axis": [0, 0, 1],
                "parent": "base",
                "child": "arm",
                "position_limits": [-3.2, 3.2],
                "velocity_limit": 10.0,
            }
        ],
        "frames": {"tip": {"link": "arm", "origin": {"position": [1, 0, 0]}}},
        "groups": {"all": [0]},
    }


def planar_two_link_doc(l1: float = 0.6, l2: float = 0.4) -> dict:
    return {
        "name": "planar2",
        "links": ["base", "upper", "lower"],
        "joints": [
            {
                "name": "j0",
                "axis": [0, 0, 1],
                "parent": "base",
                "child": "upper",
                "position_limits": [-3.2, 3.2],
                "velocity_limit": 10.0,
            },
            {
                "name": "j1",
                "axis": [0, 0, 1],
                "parent": "upper",
                "child": "lower",
                "origin": {"position": [l1, 0, 0]},
                "position_limits": [-3.2, 3.2],
                "velocity_limit": 10.0,
            },
        ],
        "frames": {"tip": {"link": "lower", "origin": {"position": [l2, 0, 0]}}},
        "groups": {"all": [0, 1]},
    }


def two_joint_toy_doc() -> dict:
    """Two revolute joints (z then y, so clearance moves in two directions)
    with one legal collision pair between the base and the far link."""
    return {
        "name": "toy2",
        "links": ["base", "upper", "lower"],
        "joints": [
            {
                "name": "j0",
                "axis": [0, 0, 1],
                "parent": "base",
                "child": "upper",
                "position_limits": [-3.2, 3.2],
                "velocity_limit": 10.0,
            },
            {
                "name": "j1",
                "axis": [0, 1, 0],
                "parent": "upper",
                "child": "lower",
                "origin": {"position": [0.5, 0, 0]},
                "position_limits": [-3.2, 3.2],
                "velocity_limit": 10.0,
            },
        ],
        "frames": {"tip": {"link": "lower", "origin": {"position": [0.4, 0, 0]}}},
        "groups": {"all": [0, 1]},
        "collision_bodies": [
            {"name": "anchor", "link": "base", "kind": "sphere", "center": [0.2, 0.4, 0.0], "radius": 0.05},
            {"name": "tip_ball", "link": "lower", "kind": "sphere", "center": [0.4, 0, 0], "radius": 0.05},
        ],
        "collision_pairs": [{"a": "anchor", "b": "tip_ball", "margin": 0.01}],
    }


@pytest.fixture()
def one_joint_model() -> KinematicModel:
    return model_from_dict(one_joint_z_doc())


@pytest.fixture()
def planar_model() -> KinematicModel:
    return model_from_dict(planar_two_link_doc())


@pytest.fixture()
def toy_model() -> KinematicModel:
    return model_from_dict(two_joint_toy_doc())


def random_in_limit(model: KinematicModel, rng: np.random.Generator) -> np.ndarray:
    return model.in_limit_sample(rng)
