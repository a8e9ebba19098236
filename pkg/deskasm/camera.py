"""
Pinhole camera model shared by the depth renderer and the marker solver.
Camera frames follow the optical convention: +z forward, +x right, +y down.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from deskasm.errors import PreconditionError
from deskasm.mesh import icosphere
from deskasm.se3 import Pose


class CameraIntrinsics(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    fx: float = Field(gt=0.0)
    fy: float = Field(gt=0.0)
    cx: float
    cy: float
    width:  int = Field(ge=1)
    height: int = Field(ge=1)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, s: float) -> "CameraIntrinsics":
        """Same field of view at ``s`` times the resolution."""
        return CameraIntrinsics(fx=self.fx * s, fy=self.fy * s, cx=self.cx * s, cy=self.cy * s,
                                width=max(1, round(self.width * s)), height=max(1, round(self.height * s)))

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        """(N, 3) camera-frame points -> (N, 2) pixel coordinates."""
        pts = np.asarray(pts_cam, dtype=float).reshape(-1, 3)
        return np.column_stack([self.fx * pts[:, 0] / pts[:, 2] + self.cx,
                                self.fy * pts[:, 1] / pts[:, 2] + self.cy])

    def pixel_rays(self) -> np.ndarray:
        """One camera-frame ray per pixel centre, z component 1, row-major."""
        u, v = np.meshgrid(np.arange(self.width) + 0.5, np.arange(self.height) + 0.5)
        return np.column_stack([((u - self.cx) / self.fx).ravel(), ((v - self.cy) / self.fy).ravel(),
                                np.ones(u.size)])


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera pose at *eye* whose optical axis points at *target*."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    norm = np.linalg.norm(z)
    if norm < 1e-12:
        raise PreconditionError("camera eye and target coincide")
    z = z / norm
    up = np.asarray(up, dtype=float)
    if np.linalg.norm(np.cross(z, up)) < 1e-6:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(z, up)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose(eye, np.column_stack([x, y, z]))


def sphere_viewpoints(radius: float = 1.0, target=(0.0, 0.0, 0.0)) -> list[Pose]:
    """42 cameras on the once-subdivided icosahedron, all looking at *target*."""
    target = np.asarray(target, dtype=float)
    return [look_at(target + radius * v, target) for v in icosphere(1).vertices]
