"""
Rigid-body algebra shared by every other module.

Rotations are plain 3x3 ``numpy`` arrays; a :class:`Pose` pairs one with a
position.  Roll/pitch/yaw follow ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

ORTHO_TOL = 1e-9
_GIMBAL_EPS = 1e-10


class RpyAngles(NamedTuple):
    roll:  float
    pitch: float
    yaw:   float


def wrap_angle(angle: float) -> float:
    """Wrap into (-pi, pi]."""
    a = math.remainder(angle, 2.0 * math.pi)
    return math.pi if a <= -math.pi else a


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp,     cp * sr,                cp * cr],
    ])


def rpy_from_rot(R: np.ndarray) -> RpyAngles:
    """
    Inverse of :func:`rot_from_rpy`.  At gimbal lock (|pitch| = pi/2) roll is
    set to zero and the remaining rotation is carried by yaw.
    """
    cp = math.hypot(R[2, 1], R[2, 2])
    if cp < _GIMBAL_EPS:
        pitch = math.copysign(math.pi / 2.0, -R[2, 0])
        return RpyAngles(0.0, pitch, wrap_angle(math.atan2(-R[0, 1], R[1, 1])))
    roll = math.atan2(R[2, 1], R[2, 2])
    pitch = math.atan2(-R[2, 0], cp)
    yaw = math.atan2(R[1, 0], R[0, 0])
    return RpyAngles(wrap_angle(roll), pitch, wrap_angle(yaw))


def rotation_distance(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic angle between two rotations, in [0, pi]."""
    M = Ra @ Rb.T
    s = 0.5 * math.sqrt((M[2, 1] - M[1, 2]) ** 2 + (M[0, 2] - M[2, 0]) ** 2 + (M[1, 0] - M[0, 1]) ** 2)
    c = 0.5 * (M[0, 0] + M[1, 1] + M[2, 2] - 1.0)
    return math.atan2(s, max(-1.0, min(1.0, c)))


def is_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    return (R.shape == (3, 3)
            and np.allclose(R @ R.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) <= tol)


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Closest rotation to *M* in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking direction *a* onto direction *b*."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    axis = np.cross(a, b)
    s, c = np.linalg.norm(axis), float(np.dot(a, b))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # half turn about any axis perpendicular to a
        perp = np.cross(a, np.eye(3)[np.argmin(np.abs(a))])
        return ScipyRotation.from_rotvec(math.pi * perp / np.linalg.norm(perp)).as_matrix()
    return ScipyRotation.from_rotvec(axis / s * math.atan2(s, c)).as_matrix()


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return ScipyRotation.random(random_state=rng).as_matrix()


def mean_rotation(Rs) -> np.ndarray:
    """Chordal mean of a stack of rotations, re-orthonormalized."""
    return orthonormalize(np.mean(np.asarray(Rs, dtype=float), axis=0))


# ---------------------------------------------------------------- poses
@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.eye(3))

    @classmethod
    def from_translation(cls, t) -> "Pose":
        return cls(np.asarray(t, dtype=float), np.eye(3))

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        return cls(T[:3, 3], T[:3, :3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    def compose(self, other: "Pose") -> "Pose":
        return compose_pose(self, other)

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose_pose(self, other)

    def inverse(self) -> "Pose":
        return invert_pose(self)

    def transform_point(self, p) -> np.ndarray:
        return transform_point(self, p)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.position

    def rotate_vectors(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs, dtype=float) @ self.rotation.T

    def rpy(self) -> RpyAngles:
        return rpy_from_rot(self.rotation)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (np.allclose(self.position, other.position, atol=atol)
                and np.allclose(self.rotation, other.rotation, atol=atol))

    # ---------- json -------------------------------------------------------
    def to_dict(self) -> dict:
        return {"t": self.position.tolist(), "R": self.rotation.reshape(-1).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(np.array(d["t"], dtype=float), np.array(d["R"], dtype=float).reshape(3, 3))

    def __repr__(self) -> str:
        r = self.rpy()
        return (f"Pose(t=[{self.position[0]:.4f}, {self.position[1]:.4f}, {self.position[2]:.4f}], "
                f"rpy=[{r.roll:.4f}, {r.pitch:.4f}, {r.yaw:.4f}])")


def compose_pose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.position + a.position, a.rotation @ b.rotation)


def invert_pose(a: Pose) -> Pose:
    Rt = a.rotation.T
    return Pose(-Rt @ a.position, Rt)


def transform_point(a: Pose, p) -> np.ndarray:
    return a.rotation @ np.asarray(p, dtype=float) + a.position


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation distance, rotation distance) between two poses."""
    return float(np.linalg.norm(a.position - b.position)), rotation_distance(a.rotation, b.rotation)
