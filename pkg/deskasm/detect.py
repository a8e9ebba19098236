"""
Rough object detection on a table: view-template library, plane removal,
segmentation, descriptor matching and ICP refinement.
"""
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from deskasm.camera import CameraIntrinsics, sphere_viewpoints
from deskasm.cloud import PointCloud, extract_plane, segment_clusters
from deskasm.config import PerceptionConfig
from deskasm.descriptor import Candidate, Descriptor, compute_descriptor, match_templates
from deskasm.errors import AllCandidatesDivergedError, NoSegmentError, PreconditionError, SchemaError
from deskasm.icp import IcpResult, icp_refine
from deskasm.mesh import TriMesh, sample_surface
from deskasm.placement import TableModel
from deskasm.render import render_cloud
from deskasm.se3 import Pose, rot_z, rotation_between

logger = logging.getLogger(__name__)

LIBRARY_VERSION = 1


@dataclass(frozen=True, eq=False)
class ViewTemplate:
    viewpoint:  Pose          # camera in the object frame
    cloud:      PointCloud    # object frame
    descriptor: Descriptor


@dataclass(frozen=True, eq=False)
class DetectionResult:
    raw_pose:        Pose
    icp_rmse:        float
    outlier_count:   int
    template_index:  int
    segment_index:   int

    def to_dict(self) -> dict:
        return {"rawPose": self.raw_pose.to_dict(), "icpRmse": self.icp_rmse,
                "outlierCount": self.outlier_count, "templateIndex": self.template_index,
                "segmentIndex": self.segment_index}


# ---------------------------------------------------------------- templates
def template_intrinsics(cfg: PerceptionConfig) -> CameraIntrinsics:
    s = cfg.template_size
    return CameraIntrinsics(fx=cfg.template_focal, fy=cfg.template_focal, cx=s / 2, cy=s / 2, width=s, height=s)


def _render_template(mesh: TriMesh, camera: Pose, intrinsics: CameraIntrinsics) -> ViewTemplate:
    sensor = render_cloud(mesh, camera, intrinsics)
    if len(sensor) == 0:
        raise PreconditionError(f"template view from {np.round(camera.position, 4)} saw nothing")
    return ViewTemplate(camera, sensor.transformed(camera), compute_descriptor(sensor))


def build_template_library(mesh: TriMesh, cfg: PerceptionConfig | None = None) -> list[ViewTemplate]:
    """One template per sphere viewpoint at ``template_distance_factor`` bounding radii."""
    cfg = cfg or PerceptionConfig()
    radius = cfg.template_distance_factor * mesh.bounding_radius
    cameras = sphere_viewpoints(radius, mesh.centroid)
    intrinsics = template_intrinsics(cfg)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        library = list(pool.map(lambda cam: _render_template(mesh, cam, intrinsics), cameras))
    logger.debug("[detect] template library: %d views", len(library))
    return library


def save_library(library: list[ViewTemplate], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    index = {"version": LIBRARY_VERSION, "templates": []}
    for i, t in enumerate(library):
        blob = f"view_{i:03d}.ply"
        t.cloud.save_ply(os.path.join(directory, blob))
        index["templates"].append({"viewpoint": t.viewpoint.to_dict(), "cloud": blob,
                                   "descriptor": t.descriptor.to_dict()})
    with open(os.path.join(directory, "index.json"), "w", encoding="utf-8") as f:
        json.dump(index, f, indent=1)


def load_library(directory: str) -> list[ViewTemplate]:
    with open(os.path.join(directory, "index.json"), "r", encoding="utf-8") as f:
        index = json.load(f)
    if index.get("version") != LIBRARY_VERSION:
        raise SchemaError(f"template library version {index.get('version')} != {LIBRARY_VERSION}", "version")
    return [ViewTemplate(Pose.from_dict(e["viewpoint"]),
                         PointCloud.load_ply(os.path.join(directory, e["cloud"])),
                         Descriptor.from_dict(e["descriptor"]))
            for e in index["templates"]]


# ---------------------------------------------------------------- detection
def virtual_rotation(segment_sensor: PointCloud) -> np.ndarray:
    """Sensor-frame rotation putting the segment centroid on the optical axis."""
    return rotation_between(segment_sensor.centroid, [0.0, 0.0, 1.0])


def initial_pose(template: ViewTemplate, roll: float, segment_sensor: PointCloud, camera: Pose) -> Pose:
    """
    Object pose implied by a template match.  The segment is viewed from a
    virtual camera whose optical axis passes through its centroid; in that
    frame the object is the template view turned by *roll*.
    """
    R_virt = virtual_rotation(segment_sensor)
    centroid_virt = R_virt @ segment_sensor.centroid
    R_obj = rot_z(roll) @ template.viewpoint.rotation.T
    t = centroid_virt - R_obj @ template.cloud.centroid
    return camera @ Pose(np.zeros(3), R_virt.T) @ Pose(t, R_obj)


def _refine(model: PointCloud, segment: PointCloud, init: Pose, cfg: PerceptionConfig) -> IcpResult:
    # coarse pass with every correspondence, then the capped pass that is scored
    extent = float(np.linalg.norm(segment.points - segment.centroid, axis=1).max())
    coarse = icp_refine(model, segment, init, cfg.icp_max_iter, cfg.icp_tol, cap=2.0 * extent)
    return icp_refine(model, segment, coarse.pose, cfg.icp_max_iter, cfg.icp_tol, cap_factor=cfg.icp_cap_factor)


def detect_object(scene: PointCloud, mesh: TriMesh, library: list[ViewTemplate], table: TableModel,
                  camera: Pose, cfg: PerceptionConfig | None = None, seed: int = 0) -> DetectionResult:
    """
    *scene* is a world-frame cloud from the sensor at *camera*.  Candidates are
    ranked by (outlier count, rmse, segment order, template rank).
    """
    cfg = cfg or PerceptionConfig()
    if not library:
        raise PreconditionError("empty template library")
    if len(scene) < 3:
        raise NoSegmentError("scene cloud is empty")
    _, inliers = extract_plane(scene, cfg.plane_dist_tol, cfg.ransac_iterations, seed, cfg.min_plane_inlier_ratio)
    keep = np.ones(len(scene), dtype=bool)
    keep[inliers] = False
    # nothing below the table top belongs to an object resting on it
    keep &= scene.points[:, 2] > table.height + cfg.plane_dist_tol
    rest = scene.subset(np.flatnonzero(keep))
    segments = segment_clusters(rest, cfg.link_distance, cfg.min_cluster_size)
    if not segments:
        raise NoSegmentError("no object segment above the table plane")
    logger.debug("[detect] %d segment(s): %s", len(segments), [len(s) for s in segments])

    model_pts, model_normals, _ = sample_surface(mesh, cfg.model_samples, np.random.default_rng(seed))
    model = PointCloud(model_pts, model_normals)

    jobs: list[tuple[int, Candidate, Pose, PointCloud]] = []
    for si, seg in enumerate(segments):
        sensor = seg.transformed(camera.inverse())
        R_virt = virtual_rotation(sensor)
        query = compute_descriptor(PointCloud(sensor.points @ R_virt.T, sensor.normals @ R_virt.T))
        for cand in match_templates(query, library, cfg.top_k):
            init = initial_pose(library[cand.index], cand.roll, sensor, camera)
            jobs.append((si, cand, init, seg))

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(lambda j: _refine(model, j[3], j[2], cfg), jobs))

    scored = [(r.outliers, r.rmse, si, rank, r, cand)
              for rank, ((si, cand, _, _), r) in enumerate(zip(jobs, results)) if not r.diverged]
    if not scored:
        raise AllCandidatesDivergedError(f"all {len(jobs)} ICP candidates diverged")
    outliers, rmse, si, _, best, cand = min(scored, key=lambda s: s[:4])
    logger.debug("[detect] segment %d template %d: rmse %.3g, %d outlier(s)", si, cand.index, rmse, outliers)
    return DetectionResult(best.pose, rmse, outliers, cand.index, si)
