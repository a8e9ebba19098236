"""
Synthetic depth sensor: z-buffer raycasting of a triangle mesh.
"""
import logging

import numpy as np

from deskasm.camera import CameraIntrinsics
from deskasm.cloud import PointCloud
from deskasm.mesh import TriMesh, intersect_rays
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)


def render_cloud(mesh: TriMesh, camera: Pose, intrinsics: CameraIntrinsics,
                 noise_sigma: float = 0.0, rng: np.random.Generator | None = None) -> PointCloud:
    """
    One point per pixel whose ray hits *mesh*, nearest hit only, returned in
    the camera frame.  Normals come from the hit triangle and face the camera.
    When no ray hits, the cloud is empty and flagged ``visible=False``.
    With ``noise_sigma`` the points are jittered along their ray.
    """
    rays = intrinsics.pixel_rays()
    dirs_world = camera.rotate_vectors(rays)
    t, tri = intersect_rays(mesh, camera.position[None, :], dirs_world)
    hit = tri >= 0
    if not hit.any():
        logger.warning("render: mesh not visible from camera at %s", np.round(camera.position, 4))
        return PointCloud(np.zeros((0, 3)), np.zeros((0, 3)), visible=False)

    rays, t, tri = rays[hit], t[hit], tri[hit]
    points = rays * t[:, None]
    if noise_sigma > 0.0:
        rng = rng if rng is not None else np.random.default_rng(0)
        unit = rays / np.linalg.norm(rays, axis=1, keepdims=True)
        points = points + unit * rng.normal(0.0, noise_sigma, size=len(points))[:, None]

    normals = mesh.face_normals[tri] @ camera.rotation
    facing = np.einsum("ij,ij->i", normals, rays) > 0
    normals[facing] *= -1.0
    return PointCloud(points, normals)


def render_world(mesh: TriMesh, camera: Pose, intrinsics: CameraIntrinsics,
                 noise_sigma: float = 0.0, rng: np.random.Generator | None = None) -> PointCloud:
    """Same as :func:`render_cloud` with the result expressed in the world frame."""
    return render_cloud(mesh, camera, intrinsics, noise_sigma, rng).transformed(camera)
