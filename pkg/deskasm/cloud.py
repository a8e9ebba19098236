"""
Point clouds plus the two scene-level segmentation steps: RANSAC table-plane
extraction and Euclidean clustering of what is left.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from deskasm.errors import NoPlaneFoundError, PreconditionError
from deskasm.mesh import export_ply, read_ply
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    Points with optional unit normals.  ``visible`` is False for a render in
    which no ray hit anything.
    """
    points:  np.ndarray
    normals: np.ndarray | None = None
    visible: bool = True

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "points", P)
        if self.normals is not None:
            N = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(N) != len(P):
                raise PreconditionError(f"{len(N)} normals for {len(P)} points")
            if len(N) and np.max(np.abs(np.linalg.norm(N, axis=1) - 1.0)) > 1e-6:
                raise PreconditionError("normals must be unit length")
            object.__setattr__(self, "normals", N)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.points[idx], None if self.normals is None else self.normals[idx], self.visible)

    def transformed(self, pose: Pose) -> "PointCloud":
        normals = None if self.normals is None else pose.rotate_vectors(self.normals)
        return PointCloud(pose.transform_points(self.points), normals, self.visible)

    def merged(self, other: "PointCloud") -> "PointCloud":
        normals = None
        if self.normals is not None and other.normals is not None:
            normals = np.vstack([self.normals, other.normals])
        return PointCloud(np.vstack([self.points, other.points]), normals, self.visible or other.visible)

    def median_spacing(self) -> float:
        if len(self) < 2:
            return 0.0
        d, _ = cKDTree(self.points).query(self.points, k=2)
        return float(np.median(d[:, 1]))

    def save_ply(self, path: str) -> None:
        export_ply(path, self.points, self.normals)

    @classmethod
    def load_ply(cls, path: str) -> "PointCloud":
        points, normals = read_ply(path)
        return cls(points, normals)


# ---------------------------------------------------------------- plane
def extract_plane(cloud: PointCloud, dist_tol: float = 0.003, iterations: int = 500, seed: int = 0,
                  min_inlier_ratio: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """
    RANSAC plane ``(a, b, c, d)`` with ``a*x + b*y + c*z + d = 0`` and a unit
    normal whose largest component is positive, plus the inlier indices.
    """
    P = cloud.points
    if len(P) < 3:
        raise PreconditionError(f"plane extraction needs at least 3 points, got {len(P)}")
    rng = np.random.default_rng(seed)
    best_count, best_plane = 0, None
    for _ in range(iterations):
        a, b, c = P[rng.choice(len(P), size=3, replace=False)]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            continue
        n /= norm
        count = int(np.count_nonzero(np.abs(P @ n - n @ a) <= dist_tol))
        if count > best_count:
            best_count, best_plane = count, np.append(n, -n @ a)
    if best_plane is None:
        raise NoPlaneFoundError("no non-degenerate point triple found")

    inliers = np.flatnonzero(np.abs(P @ best_plane[:3] + best_plane[3]) <= dist_tol)
    # least-squares refit, kept only if it does not lose inliers
    centre = P[inliers].mean(axis=0)
    n = np.linalg.svd(P[inliers] - centre)[2][2]
    refit = np.append(n, -n @ centre)
    refit_inliers = np.flatnonzero(np.abs(P @ refit[:3] + refit[3]) <= dist_tol)
    if len(refit_inliers) >= len(inliers):
        best_plane, inliers = refit, refit_inliers

    if best_plane[np.argmax(np.abs(best_plane[:3]))] < 0:
        best_plane = -best_plane
    ratio = len(inliers) / len(P)
    if ratio < min_inlier_ratio:
        raise NoPlaneFoundError(f"best plane holds {ratio:.1%} of the points (< {min_inlier_ratio:.0%})")
    logger.debug("[cloud] plane %s with %d/%d inliers", np.round(best_plane, 5), len(inliers), len(P))
    return best_plane, inliers


# ---------------------------------------------------------------- clustering
def segment_indices(cloud: PointCloud, link_distance: float, min_size: int = 1) -> list[np.ndarray]:
    """Connected components under the ``<= link_distance`` neighbour relation."""
    if link_distance <= 0:
        raise PreconditionError("link distance must be positive")
    n = len(cloud)
    if n == 0:
        return []
    pairs = cKDTree(cloud.points).query_pairs(link_distance, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    groups = [np.flatnonzero(labels == k) for k in np.unique(labels)]
    groups = [g for g in groups if len(g) >= min_size]
    groups.sort(key=lambda g: (-len(g), int(g[0])))
    return groups


def segment_clusters(cloud: PointCloud, link_distance: float, min_size: int = 1) -> list[PointCloud]:
    return [cloud.subset(g) for g in segment_indices(cloud, link_distance, min_size)]
