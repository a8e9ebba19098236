"""
Configurable 6R arm with a parallel-jaw gripper: forward kinematics,
geometric Jacobian, link capsules and damped-least-squares IK.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.spatial.transform import Rotation as ScipyRotation

from deskasm.config import validation_error
from deskasm.errors import SchemaError
from deskasm.schemas import PoseModel
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

POS_TOL = 1e-4
ROT_TOL = 1e-3


# ---------------------------------------------------------------- model
class GripperModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_opening:     float = Field(0.08, gt=0.0)
    finger_length:   float = Field(0.04, gt=0.0)
    finger_radius:   float = Field(0.005, gt=0.0)
    palm_radius:     float = Field(0.01, gt=0.0)
    contact_gap:     float = Field(0.001, ge=0.0)   # finger pad stand-off used in clearance tests


class JointModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    axis:   tuple[float, float, float]
    offset: tuple[float, float, float]   # from the previous joint frame, parent coordinates
    lower:  float
    upper:  float
    radius: float = Field(0.03, gt=0.0)  # capsule radius of the link ending at this joint

    @model_validator(mode="after")
    def _limits(self):
        if not self.lower < self.upper:
            raise ValueError(f"joint limits {self.lower} >= {self.upper}")
        return self


def _default_joints() -> list[JointModel]:
    lim = math.radians(170.0)
    return [
        JointModel(axis=(0, 0, 1), offset=(0, 0, 0.10), lower=-lim, upper=lim, radius=0.05),
        JointModel(axis=(0, 1, 0), offset=(0, 0, 0.10), lower=-math.radians(110), upper=math.radians(110), radius=0.045),
        JointModel(axis=(0, 1, 0), offset=(0, 0, 0.30), lower=-math.radians(150), upper=math.radians(150), radius=0.04),
        JointModel(axis=(0, 0, 1), offset=(0, 0, 0.15), lower=-lim, upper=lim, radius=0.035),
        JointModel(axis=(0, 1, 0), offset=(0, 0, 0.15), lower=-math.radians(125), upper=math.radians(125), radius=0.035),
        JointModel(axis=(0, 0, 1), offset=(0, 0, 0.06), lower=-lim, upper=lim, radius=0.03),
    ]


class RobotModel(BaseModel):
    """
    Serial 6R arm.  The end-effector frame is the gripper's tool centre point
    (between the finger pads): z is the approach axis, x the closing axis.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    joints: list[JointModel] = Field(default_factory=_default_joints, min_length=6, max_length=6)
    tool_offset: tuple[float, float, float] = (0.0, 0.0, 0.10)
    wrist_radius: float = Field(0.02, gt=0.0)
    base: PoseModel = Field(default_factory=lambda: PoseModel(t=[0.0, 0.0, 0.0]))
    gripper: GripperModel = Field(default_factory=GripperModel)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def base_pose(self) -> Pose:
        return self.base.to_pose()

    @property
    def reach(self) -> float:
        """Upper bound on the distance from the shoulder to the tool centre point."""
        return float(sum(np.linalg.norm(j.offset) for j in self.joints[2:]) + np.linalg.norm(self.tool_offset))

    @property
    def shoulder(self) -> np.ndarray:
        return self.base_pose.transform_point(np.add(self.joints[0].offset, self.joints[1].offset))

    def within_limits(self, q: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))


def load_robot(path: str | None) -> RobotModel:
    if path is None:
        return RobotModel()
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"robot model {path}: invalid JSON ({exc})") from exc
    try:
        return RobotModel.model_validate(raw)
    except ValidationError as exc:
        raise validation_error(exc, f"robot model {path}") from exc


# ---------------------------------------------------------------- kinematics
def _axis_rotation(axis, angle: float) -> np.ndarray:
    """Rodrigues formula; joint axes are unit vectors."""
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


@dataclass
class Kinematics:
    """FK result: joint frames (origins and world axes) plus the tool pose."""
    origins: np.ndarray          # (7, 3): base, joints 1..6
    axes:    np.ndarray          # (6, 3) world joint axes
    tool:    Pose
    palm:    np.ndarray = field(default_factory=lambda: np.zeros(3))   # back of the palm capsule


def forward_kinematics(robot: RobotModel, q) -> Kinematics:
    T = robot.base_pose
    origins, axes = [T.position.copy()], []
    for joint, angle in zip(robot.joints, q):
        T = T @ Pose(joint.offset, np.eye(3))
        origins.append(T.position.copy())
        axes.append(T.rotation @ np.asarray(joint.axis, dtype=float))
        T = T @ Pose(np.zeros(3), _axis_rotation(joint.axis, angle))
    tool = T @ Pose(robot.tool_offset, np.eye(3))
    g = robot.gripper
    palm = tool.transform_point([0.0, 0.0, -(g.finger_length + 2.0 * g.palm_radius)])
    return Kinematics(np.array(origins), np.array(axes), tool, palm)


def tool_pose(robot: RobotModel, q) -> Pose:
    return forward_kinematics(robot, q).tool


def jacobian(robot: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x 6): linear rows first, angular rows second."""
    return _jacobian(forward_kinematics(robot, q))


def _jacobian(k: Kinematics) -> np.ndarray:
    p = k.tool.position
    J = np.zeros((6, 6))
    for i in range(6):
        J[:3, i] = np.cross(k.axes[i], p - k.origins[i + 1])
        J[3:, i] = k.axes[i]
    return J


def link_capsules(robot: RobotModel, q, k: Kinematics | None = None) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """(start, end, radius) per arm link, wrist up to the palm included."""
    k = k or forward_kinematics(robot, q)
    caps = []
    for i, joint in enumerate(robot.joints[:-1]):
        a, b = k.origins[i], k.origins[i + 1]
        if np.linalg.norm(b - a) > 1e-9:
            caps.append((a, b, joint.radius))
    caps.append((k.origins[5], k.origins[6], robot.joints[-1].radius))
    caps.append((k.origins[6], k.palm, robot.wrist_radius))
    return caps


# ---------------------------------------------------------------- inverse kinematics
def pose_residual(current: Pose, target: Pose) -> np.ndarray:
    """(position error, rotation-vector error) of *current* against *target*."""
    rot = ScipyRotation.from_matrix(target.rotation @ current.rotation.T).as_rotvec()
    return np.hstack([target.position - current.position, rot])


def default_seeds(robot: RobotModel, target: Pose) -> list[np.ndarray]:
    """Eight spread seeds facing the target's azimuth (elbow and wrist variants)."""
    rel = target.position - robot.shoulder
    yaw = math.atan2(rel[1], rel[0])
    shapes = [(0.4, 1.2, 1.2), (0.8, 0.8, 1.4), (0.2, 1.8, 0.8), (-0.3, 2.0, 1.2),
              (0.6, 1.5, -0.6), (1.0, 0.4, 1.6), (0.0, 1.0, 2.0), (0.5, 1.0, 0.2)]
    seeds = []
    for i, (s, e, w) in enumerate(shapes):
        roll = 0.0 if i % 2 == 0 else math.pi / 2
        q = np.array([yaw, s, e, roll, w, 0.0])
        seeds.append(np.clip(q, robot.lower, robot.upper))
    return seeds


def _dls_step(J: np.ndarray, err: np.ndarray, damping: float, q: np.ndarray,
              lo: np.ndarray, hi: np.ndarray, null_gain: float) -> np.ndarray:
    A = J @ J.T + damping * np.eye(6)
    dq = J.T @ np.linalg.solve(A, err)
    # joint-limit penalty acting in the null space
    margin = 0.05 * (hi - lo)
    push = np.where(q < lo + margin, lo + margin - q, 0.0) - np.where(q > hi - margin, q - hi + margin, 0.0)
    N = np.eye(6) - J.T @ np.linalg.solve(A, J)
    return dq + N @ (null_gain * push)


def solve_ik(robot: RobotModel, target: Pose, seeds=None, max_iter: int = 200,
             damping: float = 1e-4, max_step: float = 0.3,
             pos_tol: float = POS_TOL, rot_tol: float = ROT_TOL) -> np.ndarray | None:
    """
    Damped least squares from the given seeds, then the eight default seeds;
    returns the first in-limit solution meeting both tolerances, or ``None``.
    A seed is abandoned once its error stops shrinking.
    """
    if np.linalg.norm(target.position - robot.shoulder) > robot.reach + 1e-3:
        return None
    lo, hi = robot.lower, robot.upper
    seed_list = [np.asarray(s, dtype=float) for s in seeds] if seeds is not None else []
    seed_list += default_seeds(robot, target)
    for q0 in seed_list:
        q = np.clip(q0, lo, hi)
        best, stall = math.inf, 0
        for _ in range(max_iter):
            k = forward_kinematics(robot, q)
            err = pose_residual(k.tool, target)
            pe, re = np.linalg.norm(err[:3]), np.linalg.norm(err[3:])
            if pe < pos_tol and re < rot_tol:
                return q
            score = pe + 0.1 * re
            if score < best * (1.0 - 1e-3):
                best, stall = score, 0
            else:
                stall += 1
                if stall >= 15:
                    break
            dq = _dls_step(_jacobian(k), err, damping, q, lo, hi, null_gain=0.5)
            q = np.clip(q + np.clip(dq, -max_step, max_step), lo, hi)
    return None
