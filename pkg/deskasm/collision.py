"""
Distance tests between convex bodies, capsules, point sets and the table
half-space.  Capsule and point clearances are lower bounds.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from deskasm.mesh import TriMesh
from deskasm.placement import TableModel
from deskasm.se3 import Pose


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """
    Convex hull of a posed mesh as world-frame half-spaces ``A @ x <= b``,
    with the hull vertices and the unit directions of its edges.
    """
    A:        np.ndarray
    b:        np.ndarray
    vertices: np.ndarray
    name:     str = ""
    edges:    np.ndarray | None = None

    @classmethod
    def from_mesh(cls, mesh: TriMesh, pose: Pose | None = None, name: str = "") -> "ConvexBody":
        pts = mesh.vertices if pose is None else pose.transform_points(mesh.vertices)
        hull = ConvexHull(pts)
        A, b = hull.equations[:, :3], -hull.equations[:, 3]
        S = hull.simplices
        pairs = np.unique(np.sort(np.concatenate([S[:, [0, 1]], S[:, [1, 2]], S[:, [2, 0]]]), axis=1), axis=0)
        return cls(A, b, pts[hull.vertices], name, _unique_directions(pts[pairs[:, 1]] - pts[pairs[:, 0]]))

    def distance_bound(self, points: np.ndarray) -> np.ndarray:
        """Largest plane violation per point: a lower bound on the distance, negative inside."""
        return np.max(np.asarray(points, dtype=float).reshape(-1, 3) @ self.A.T - self.b, axis=1)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.distance_bound(points) <= tol


def _unique_directions(d: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    """Unit directions with antipodal and repeated entries removed."""
    n = np.linalg.norm(d, axis=1)
    d = d[n > eps] / n[n > eps, None]
    d[d @ np.array([1.0, 1e-3, 1e-6]) < 0.0] *= -1.0
    _, first = np.unique(np.round(d, 9), axis=0, return_index=True)
    return d[np.sort(first)]


def segment_samples(p: np.ndarray, q: np.ndarray, spacing: float) -> np.ndarray:
    n = max(2, int(np.ceil(np.linalg.norm(q - p) / max(spacing, 1e-9))) + 1)
    s = np.linspace(0.0, 1.0, n)[:, None]
    return p + s * (q - p)


def segment_bound(body: ConvexBody, p: np.ndarray, q: np.ndarray) -> float:
    """
    Minimum over the segment ``p -> q`` of :meth:`ConvexBody.distance_bound`.
    The bound is a max of lines in the segment parameter, so its minimum sits
    at an end or where two lines cross.
    """
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    c = body.A @ p - body.b
    m = body.A @ (q - p)
    dm = m[:, None] - m[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (c[None, :] - c[:, None]) / dm
    s = s[np.isfinite(s) & (s > 0.0) & (s < 1.0)]
    s = np.concatenate([[0.0, 1.0], s])
    return float(np.min(np.max(c[:, None] + m[:, None] * s[None, :], axis=0)))


def capsule_clearance(body: ConvexBody, p: np.ndarray, q: np.ndarray, radius: float) -> float:
    """Lower bound on the gap between a capsule and *body*."""
    return segment_bound(body, p, q) - radius


def points_clearance(body: ConvexBody, points: np.ndarray) -> float:
    return float(body.distance_bound(points).min())


def table_clearance(table: TableModel, points: np.ndarray, radius: float = 0.0) -> float:
    """Height of the lowest point (capsule end) above the table top."""
    return float(np.asarray(points, dtype=float).reshape(-1, 3)[:, 2].min() - table.height - radius)


def separating_axes(a: ConvexBody, b: ConvexBody) -> np.ndarray:
    """Face normals of both bodies plus the cross products of their edge directions."""
    axes = [a.A, b.A]
    if a.edges is not None and b.edges is not None and len(a.edges) and len(b.edges):
        axes.append(np.cross(a.edges[:, None, :], b.edges[None, :, :]).reshape(-1, 3))
    return _unique_directions(np.vstack(axes))


def bodies_clearance(a: ConvexBody, b: ConvexBody, a_samples: np.ndarray | None = None) -> float:
    """
    Separating-axis gap between two convex bodies: the largest gap between
    their projections over face normals and edge-edge cross products.
    Positive values are lower bounds on the distance; a negative value is
    the penetration depth (minimum translation to separate).  Optional
    surface samples of *a* are checked against *b* as well.
    """
    axes = separating_axes(a, b)
    pa, pb = a.vertices @ axes.T, b.vertices @ axes.T
    gap = np.maximum(pb.min(axis=0) - pa.max(axis=0), pa.min(axis=0) - pb.max(axis=0))
    d = float(gap.max())
    if a_samples is not None and len(a_samples):
        d = min(d, points_clearance(b, a_samples))
    return d
