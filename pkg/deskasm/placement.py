"""
Stable resting poses of a rigid object on a horizontal table, and the
correction of noisy pose detections against them.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import linprog

from deskasm.errors import PlacementError, PreconditionError
from deskasm.mesh import TriMesh, center_of_mass, cluster_faces, convex_hull
from deskasm.se3 import Pose, rot_from_rpy, rot_z, rotation_distance, rpy_from_rot

logger = logging.getLogger(__name__)

CorrectionMode = Literal["yaw-invariant", "literal"]


class TableModel(BaseModel):
    """Horizontal table top at ``height`` with bounds (xmin, xmax, ymin, ymax)."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    height: float
    bounds: tuple[float, float, float, float]

    @model_validator(mode="after")
    def _check_bounds(self):
        xmin, xmax, ymin, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"degenerate table bounds {self.bounds}")
        return self

    def contains_xy(self, x: float, y: float) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(frozen=True, eq=False)
class StablePlacement:
    rest_rotation:   np.ndarray        # support normal -> -z, zero yaw
    support_height:  float             # object origin above the support plane
    support_polygon: np.ndarray        # (k, 2), counter-clockwise
    margin:          float             # COM projection to polygon boundary
    normal:          np.ndarray        # outward support normal, object frame

    def pose_on(self, table: TableModel, x: float, y: float, yaw: float = 0.0) -> Pose:
        """Object pose resting on *table* at (x, y) turned by *yaw*."""
        return Pose([x, y, table.height + self.support_height], rot_z(yaw) @ self.rest_rotation)

    def to_dict(self) -> dict:
        return {"rotation": self.rest_rotation.reshape(-1).tolist(),
                "supportHeight": float(self.support_height),
                "margin": float(self.margin)}


# ---------------------------------------------------------------- geometry helpers
def rest_rotation(normal: np.ndarray) -> np.ndarray:
    """Zero-yaw rotation taking the outward *normal* onto -z."""
    nx, ny, nz = (float(c) for c in normal)
    rho = math.hypot(ny, nz)
    roll = 0.0 if rho < 1e-12 else math.atan2(-ny, -nz)
    pitch = math.atan2(nx, rho)
    return rot_from_rpy(roll, pitch, 0.0)


def _ccw(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    return poly if signed > 0 else poly[::-1].copy()


def _edge_halfplanes(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals and offsets so that inside means ``A @ p <= b``."""
    e = np.roll(poly, -1, axis=0) - poly
    length = np.linalg.norm(e, axis=1)
    keep = length > 1e-15
    e, a, length = e[keep], poly[keep], length[keep]
    A = np.column_stack([e[:, 1], -e[:, 0]]) / length[:, None]
    return A, np.einsum("ij,ij->i", A, a)


def polygon_margin(poly: np.ndarray, p: np.ndarray) -> float:
    """Signed distance from *p* to the boundary of a convex CCW polygon (positive inside)."""
    A, b = _edge_halfplanes(poly)
    return float(np.min(b - A @ p))


def polygon_inradius(poly: np.ndarray) -> float:
    """Radius of the largest inscribed circle (Chebyshev centre LP)."""
    A, b = _edge_halfplanes(poly)
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=np.column_stack([A, np.ones(len(A))]), b_ub=b,
                  bounds=[(None, None), (None, None), (0.0, None)], method="highs")
    return float(res.x[2]) if res.success else 0.0


# ---------------------------------------------------------------- enumeration
def stable_placements(mesh: TriMesh, margin_fraction: float = 0.1,
                      angle_tol: float = 0.05) -> list[StablePlacement]:
    """
    One placement per convex-hull face cluster whose polygon contains the
    projected centre of mass with margin >= ``margin_fraction * inradius``.
    Sorted by descending margin; equal margins keep cluster order.
    """
    if not 0.0 <= margin_fraction < 1.0:
        raise PreconditionError(f"margin fraction must lie in [0, 1), got {margin_fraction}")
    com = center_of_mass(mesh)
    hull = convex_hull(mesh.vertices)
    out = []
    for ci, cluster in enumerate(cluster_faces(hull, angle_tol)):
        if len(cluster.boundary) < 3:
            continue
        R = rest_rotation(cluster.normal)
        z = mesh.vertices @ R[2]
        polygon = _ccw((cluster.boundary @ R.T)[:, :2])
        margin = polygon_margin(polygon, (R @ com)[:2])
        inradius = polygon_inradius(polygon)
        if margin <= 0.0 or margin < margin_fraction * inradius:
            logger.debug("[placement] cluster %d rejected: margin %.3g, inradius %.3g", ci, margin, inradius)
            continue
        out.append(StablePlacement(R, float(-z.min()), polygon, margin, cluster.normal.copy()))
    out.sort(key=lambda p: -p.margin)
    logger.debug("[placement] %d stable placement(s)", len(out))
    return out


# ---------------------------------------------------------------- correction
def placement_distance(placement_rotation: np.ndarray, raw_rotation: np.ndarray,
                       mode: CorrectionMode = "yaw-invariant") -> float:
    """
    Distance used to pick the nearest placement.  ``literal`` compares full
    rotations; ``yaw-invariant`` minimises over a free yaw about world z.
    """
    if mode == "literal":
        return rotation_distance(placement_rotation, raw_rotation)
    M = placement_rotation @ raw_rotation.T
    best_trace = math.hypot(M[0, 0] + M[1, 1], M[0, 1] - M[1, 0]) + M[2, 2]
    return math.acos(max(-1.0, min(1.0, 0.5 * (best_trace - 1.0))))


def nearest_placement(raw_rotation: np.ndarray, placements: list[StablePlacement],
                      mode: CorrectionMode = "yaw-invariant") -> int:
    if not placements:
        raise PlacementError("no stable placements to correct against")
    best, best_d = 0, math.inf
    for i, p in enumerate(placements):
        d = placement_distance(p.rest_rotation, raw_rotation, mode)
        if d < best_d:
            best, best_d = i, d
    return best


def heading_about_z(raw_rotation: np.ndarray, rest_rotation: np.ndarray) -> float:
    """Yaw about world z for which ``rot_z(yaw) @ rest_rotation`` is closest to *raw_rotation*."""
    M = raw_rotation @ rest_rotation.T
    return math.atan2(M[1, 0] - M[0, 1], M[0, 0] + M[1, 1])


def correct_pose(raw: Pose, placements: list[StablePlacement], table: TableModel,
                 mode: CorrectionMode = "yaw-invariant") -> Pose:
    """
    Snap a raw detection onto the nearest stable placement: keep x, y and the
    heading, take the tilt from the placement, put the object on the table.

    ``literal`` keeps the raw roll-pitch-yaw yaw.  ``yaw-invariant`` takes the
    yaw about world z that best aligns the placement with the raw rotation,
    which stays well defined when the rest rotation is pitched by 90 degrees.
    """
    i = nearest_placement(raw.rotation, placements, mode)
    near = placements[i]
    if mode == "literal":
        yaw = rpy_from_rot(raw.rotation).yaw
    else:
        yaw = heading_about_z(raw.rotation, near.rest_rotation)
    R_c = rot_z(yaw) @ near.rest_rotation
    z = table.height if mode == "literal" else table.height + near.support_height
    position = raw.position.copy()
    position[2] = z
    return Pose(position, R_c)


def placements_to_json(placements: list[StablePlacement]) -> list[dict]:
    return [p.to_dict() for p in placements]
