import json
import os

import numpy as np
import pytest

from deskasm.camera import CameraIntrinsics
from deskasm.grasp import Grasp, GraspSet
from deskasm.mesh import box, l_prism, tetrahedron
from deskasm.placement import TableModel
from deskasm.robot import RobotModel

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO_SCENE = os.path.join(ROOT, "scenes", "demo.json")
CUBE_SCENE = os.path.join(ROOT, "scenes", "cube.json")
ASSETS = os.path.join(ROOT, "assets")

R_DOWN = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


def write_json(path, data) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)


def reach_all(target, seeds=None):
    """IK stand-in that accepts every target."""
    return np.zeros(6)


def top_grasp(theta: float, gid: int, height: float = 0.005, width: float = 0.04) -> Grasp:
    """Grasp from above (object frame) closing along the direction *theta* in the xy-plane."""
    x = np.array([np.cos(theta), np.sin(theta), 0.0])
    z = np.array([0.0, 0.0, -1.0])
    c = np.array([0.0, 0.0, height])
    return Grasp(c - 0.5 * width * x, c + 0.5 * width * x, np.column_stack([x, np.cross(z, x), z]), gid)


@pytest.fixture
def unit_cube():
    return box((1.0, 1.0, 1.0))


@pytest.fixture
def cube():
    return box((0.04, 0.04, 0.04))


@pytest.fixture
def block():
    return box((0.06, 0.04, 0.03))


@pytest.fixture
def tetra():
    return tetrahedron(1.0)


@pytest.fixture
def lprism():
    return l_prism()


@pytest.fixture
def robot():
    return RobotModel()


@pytest.fixture
def table():
    return TableModel(height=0.0, bounds=(-1.0, 1.0, -1.0, 1.0))


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)


@pytest.fixture
def top_grasps():
    return GraspSet([top_grasp(k * np.pi / 2, k) for k in range(4)], "f")
