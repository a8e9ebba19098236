"""
Point-to-point ICP of a model cloud (object frame) onto a scene cloud.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from deskasm.cloud import PointCloud
from deskasm.errors import PreconditionError
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

DIVERGENCE_RUN = 5
EXACT_RMSE     = 1e-12


@dataclass
class IcpResult:
    pose:       Pose
    rmse:       float
    outliers:   int
    iterations: int
    converged:  bool = False
    diverged:   bool = False
    history:    list[float] = field(default_factory=list)


def best_fit_transform(A: np.ndarray, B: np.ndarray) -> Pose:
    """Least-squares rigid transform mapping points *A* onto *B* (Kabsch)."""
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    H = (A - ca).T @ (B - cb)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return Pose(cb - R @ ca, R)


def icp_refine(model: PointCloud, scene: PointCloud, init: Pose, max_iter: int = 60,
               tol: float = 1e-7, cap: float | None = None, cap_factor: float = 5.0) -> IcpResult:
    """
    Refine *init* (object -> scene frame).  Scene points farther than *cap*
    from their nearest model point are rejected; *cap* defaults to
    ``cap_factor`` times the scene's median nearest-neighbour spacing.
    Stops when the rmse improves by less than *tol*; returns the best pose
    seen.  Five consecutive rmse increases, or losing all correspondences,
    mark the result diverged.
    """
    if len(model) == 0 or len(scene) == 0:
        raise PreconditionError("icp needs non-empty model and scene clouds")
    if cap is None:
        cap = cap_factor * scene.median_spacing()
    tree = cKDTree(model.points)
    S = scene.points

    T = init
    best = IcpResult(init, math.inf, len(S), 0)
    prev, rising = math.inf, 0
    for it in range(1, max_iter + 1):
        d, idx = tree.query(T.inverse().transform_points(S))
        mask = d <= cap
        if np.count_nonzero(mask) < 3:
            logger.debug("[icp] no correspondences within cap %.4g at iteration %d", cap, it)
            best.diverged = True
            break
        rmse = float(np.sqrt(np.mean(d[mask] ** 2)))
        best.history.append(rmse)
        if rmse < best.rmse:
            best.pose, best.rmse, best.outliers = T, rmse, int(np.count_nonzero(~mask))
        best.iterations = it
        if rmse <= EXACT_RMSE:
            best.converged = True
            break
        if rmse > prev:
            rising += 1
            if rising >= DIVERGENCE_RUN:
                best.diverged = True
                break
        else:
            rising = 0
            if prev - rmse < tol:
                best.converged = True
                break
        prev = rmse
        T = best_fit_transform(model.points[idx[mask]], S[mask])

    logger.debug("[icp] rmse %.3g after %d iteration(s), %d outlier(s)%s",
                 best.rmse, best.iterations, best.outliers, " (diverged)" if best.diverged else "")
    return best
