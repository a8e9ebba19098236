"""
Teaching phase: planar marker pose from four projected corners, object poses
from marker poses, and the relative assembly pose of part B in part A.
"""
import json
import logging
import math
from itertools import combinations

import numpy as np
from pydantic import Field, ValidationError
from scipy.spatial.transform import Rotation as ScipyRotation

from deskasm.camera import CameraIntrinsics
from deskasm.config import validation_error
from deskasm.errors import BehindCameraError, DegenerateConfigurationError, SchemaError
from deskasm.schemas import PoseModel, Schema
from deskasm.se3 import Pose, mean_rotation, orthonormalize, rot_x, rot_y, rot_z

logger = logging.getLogger(__name__)

RECORD_VERSION = 1
REFINE_STEPS   = 10


class MarkerModel(Schema):
    id: str
    side_length: float = Field(gt=0.0, alias="sideLength")
    marker_in_object: PoseModel = Field(default_factory=lambda: PoseModel(t=[0.0, 0.0, 0.0]),
                                        alias="markerInObject")


def marker_corners(side: float) -> np.ndarray:
    """Corners in the marker frame, in canonical observation order."""
    h = side / 2.0
    return np.array([[-h, h, 0.0], [h, h, 0.0], [h, -h, 0.0], [-h, -h, 0.0]])


def project_marker(marker_pose: Pose, marker: MarkerModel, cam: CameraIntrinsics) -> np.ndarray:
    return cam.project(marker_pose.transform_points(marker_corners(marker.side_length)))


# ---------------------------------------------------------------- pose from corners
def _check_corners(uv: np.ndarray) -> None:
    span = max(np.linalg.norm(a - b) for a, b in combinations(uv, 2))
    if span < 1e-9:
        raise DegenerateConfigurationError("marker corners coincide")
    for a, b, c in combinations(uv, 3):
        area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if area < 1e-6 * span * span:
            raise DegenerateConfigurationError("three or more marker corners are collinear")


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """DLT homography src -> dst (both (4, 2)) with Hartley normalisation."""
    def normaliser(p):
        c = p.mean(axis=0)
        s = math.sqrt(2.0) / np.mean(np.linalg.norm(p - c, axis=1))
        return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])

    Ts, Td = normaliser(src), normaliser(dst)
    a = (np.column_stack([src, np.ones(len(src))]) @ Ts.T)
    b = (np.column_stack([dst, np.ones(len(dst))]) @ Td.T)
    rows = []
    for (x, y, _), (u, v, _) in zip(a, b):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    H = np.linalg.svd(np.array(rows))[2][-1].reshape(3, 3)
    return np.linalg.inv(Td) @ H @ Ts


def _residuals(R, t, X, uv, cam):
    return (cam.project(X @ R.T + t) - uv).ravel()


def _jacobian(R, t, X, cam) -> np.ndarray:
    """d(pixels)/d(left rotation increment, translation), (2N, 6)."""
    RX = X @ R.T
    P = RX + t
    J = np.zeros((2 * len(X), 6))
    for i, (p, rx) in enumerate(zip(P, RX)):
        x, y, z = p
        dproj = np.array([[cam.fx / z, 0.0, -cam.fx * x / z ** 2],
                          [0.0, cam.fy / z, -cam.fy * y / z ** 2]])
        skew = np.array([[0.0, -rx[2], rx[1]], [rx[2], 0.0, -rx[0]], [-rx[1], rx[0], 0.0]])
        J[2 * i:2 * i + 2, :3] = -dproj @ skew
        J[2 * i:2 * i + 2, 3:] = dproj
    return J


def estimate_marker_pose(corners: np.ndarray, marker: MarkerModel,
                         cam: CameraIntrinsics) -> tuple[Pose, float]:
    """
    Marker pose in the camera frame from its four corner pixels, plus the
    reprojection rmse in pixels.  Homography decomposition gives the start,
    a short Levenberg-Marquardt run minimises reprojection error.
    """
    uv = np.asarray(corners, dtype=float).reshape(4, 2)
    _check_corners(uv)
    X = marker_corners(marker.side_length)
    norm = np.column_stack([(uv[:, 0] - cam.cx) / cam.fx, (uv[:, 1] - cam.cy) / cam.fy])

    H = _homography(X[:, :2], norm)
    lam = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    if H[2, 2] * lam < 0:
        lam = -lam
    r1, r2, t = lam * H[:, 0], lam * H[:, 1], lam * H[:, 2]
    R = orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))
    if np.any((X @ R.T + t)[:, 2] <= 0):
        raise BehindCameraError("marker solution lies behind the camera")

    res = _residuals(R, t, X, uv, cam)
    cost, damping = float(res @ res), 1e-3
    for _ in range(REFINE_STEPS):
        J = _jacobian(R, t, X, cam)
        JtJ = J.T @ J
        step = np.linalg.solve(JtJ + damping * np.diag(np.diag(JtJ) + 1e-12), -J.T @ res)
        R_new = ScipyRotation.from_rotvec(step[:3]).as_matrix() @ R
        t_new = t + step[3:]
        if np.all((X @ R_new.T + t_new)[:, 2] > 0):
            res_new = _residuals(R_new, t_new, X, uv, cam)
            cost_new = float(res_new @ res_new)
            if cost_new <= cost:
                R, t, res, cost = R_new, t_new, res_new, cost_new
                damping = max(damping * 0.1, 1e-12)
                continue
        damping *= 10.0
    rmse = math.sqrt(cost / len(X))
    return Pose(t, orthonormalize(R)), rmse


# ---------------------------------------------------------------- object poses
def object_pose_from_marker(marker_pose: Pose, marker: MarkerModel) -> Pose:
    return marker_pose @ marker.marker_in_object.to_pose().inverse()


def relative_assembly_pose(pose_a: Pose, pose_b: Pose) -> Pose:
    """Pose of B expressed in the frame of A."""
    return pose_a.inverse() @ pose_b


def aggregate_poses(poses: list[Pose]) -> Pose:
    """Per-component median position and chordal-mean rotation."""
    if len(poses) == 1:
        return poses[0]
    return Pose(np.median([p.position for p in poses], axis=0), mean_rotation([p.rotation for p in poses]))


# ---------------------------------------------------------------- recordings / records
class RecordingSample(Schema):
    corners_a: list[list[float]] = Field(alias="cornersA", min_length=4, max_length=4)
    corners_b: list[list[float]] = Field(alias="cornersB", min_length=4, max_length=4)
    intrinsics: CameraIntrinsics
    truth_a: PoseModel | None = Field(None, alias="truthA")
    truth_b: PoseModel | None = Field(None, alias="truthB")


class TeachingRecording(Schema):
    """Marker observations of the two parts held in their assembled configuration."""
    version: int = RECORD_VERSION
    marker_a: MarkerModel = Field(alias="markerA")
    marker_b: MarkerModel = Field(alias="markerB")
    samples: list[RecordingSample] = Field(min_length=1)
    approach: list[float] | None = Field(None, min_length=3, max_length=3)


class RecordSample(Schema):
    corners_a: list[list[float]] = Field(alias="cornersA")
    corners_b: list[list[float]] = Field(alias="cornersB")
    intrinsics: CameraIntrinsics
    pose_a: PoseModel = Field(alias="poseA")
    pose_b: PoseModel = Field(alias="poseB")
    relative: PoseModel
    rmse_a: float = Field(alias="rmseA")
    rmse_b: float = Field(alias="rmseB")


class TeachingRecord(Schema):
    version: int = RECORD_VERSION
    object_a: str = Field(alias="objectA")
    object_b: str = Field(alias="objectB")
    samples: list[RecordSample] = Field(default_factory=list)
    relative_pose: PoseModel = Field(alias="relativePose")
    approach: list[float] = Field(min_length=3, max_length=3)
    retraction_distance: float | None = Field(None, gt=0.0, alias="retractionDistance")
    truth: PoseModel | None = None

    @property
    def relative(self) -> Pose:
        return self.relative_pose.to_pose()

    @property
    def approach_vector(self) -> np.ndarray:
        return np.asarray(self.approach, dtype=float)


def teach(recording: TeachingRecording) -> TeachingRecord:
    """Estimate every sample and aggregate them into one teaching record."""
    samples, relatives = [], []
    for i, s in enumerate(recording.samples):
        marker_a, rmse_a = estimate_marker_pose(np.array(s.corners_a), recording.marker_a, s.intrinsics)
        marker_b, rmse_b = estimate_marker_pose(np.array(s.corners_b), recording.marker_b, s.intrinsics)
        pose_a = object_pose_from_marker(marker_a, recording.marker_a)
        pose_b = object_pose_from_marker(marker_b, recording.marker_b)
        rel = relative_assembly_pose(pose_a, pose_b)
        relatives.append(rel)
        samples.append(RecordSample(cornersA=s.corners_a, cornersB=s.corners_b, intrinsics=s.intrinsics,
                                    poseA=PoseModel.of(pose_a), poseB=PoseModel.of(pose_b),
                                    relative=PoseModel.of(rel), rmseA=rmse_a, rmseB=rmse_b))
        logger.debug("[teaching] sample %d: rmse A %.3g px, B %.3g px", i, rmse_a, rmse_b)
    relative = aggregate_poses(relatives)

    retraction = None
    if recording.approach is not None:
        v = np.asarray(recording.approach, dtype=float)
        length = float(np.linalg.norm(v))
        if length < 1e-12:
            raise SchemaError("approach vector has zero length", "approach")
        if abs(length - 1.0) > 1e-9:
            retraction = 0.5 * length
        v = v / length
    else:
        v = -relative.rotation[:, 2]

    truth = None
    truths = [(s.truth_a, s.truth_b) for s in recording.samples]
    if all(a is not None and b is not None for a, b in truths):
        truth = PoseModel.of(relative_assembly_pose(truths[0][0].to_pose(), truths[0][1].to_pose()))
    return TeachingRecord(objectA=recording.marker_a.id, objectB=recording.marker_b.id, samples=samples,
                          relativePose=PoseModel.of(relative), approach=v.tolist(),
                          retractionDistance=retraction, truth=truth)


def save_teaching_record(record: TeachingRecord, path: str) -> None:
    v = record.approach_vector
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-9:
        raise SchemaError(f"approach must be a unit vector, |v| = {np.linalg.norm(v):.6g}", "approach")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record.model_dump(by_alias=True), f, indent=2)


def _load_versioned(path: str, model, what: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{what} {path}: expected a JSON object")
    if "version" in raw and raw["version"] != RECORD_VERSION:
        raise SchemaError(f"{what} {path}: version {raw['version']} unsupported (expected {RECORD_VERSION})",
                          "version")
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise validation_error(exc, f"{what} {path}") from exc


def load_teaching_record(path: str) -> TeachingRecord:
    return _load_versioned(path, TeachingRecord, "teaching record")


def load_recording(path: str) -> TeachingRecording:
    return _load_versioned(path, TeachingRecording, "recording")


def simulate_recording(poses_a: list[Pose], poses_b: list[Pose], marker_a: MarkerModel, marker_b: MarkerModel,
                       cam: CameraIntrinsics, pixel_sigma: float = 0.0, rng: np.random.Generator | None = None,
                       approach=None) -> TeachingRecording:
    """Project both markers for each pair of camera-frame object poses."""
    rng = rng if rng is not None else np.random.default_rng(0)
    samples = []
    for pa, pb in zip(poses_a, poses_b):
        ca = project_marker(pa @ marker_a.marker_in_object.to_pose(), marker_a, cam)
        cb = project_marker(pb @ marker_b.marker_in_object.to_pose(), marker_b, cam)
        if pixel_sigma > 0:
            ca = ca + rng.normal(0.0, pixel_sigma, ca.shape)
            cb = cb + rng.normal(0.0, pixel_sigma, cb.shape)
        samples.append(RecordingSample(cornersA=ca.tolist(), cornersB=cb.tolist(), intrinsics=cam,
                                       truthA=PoseModel.of(pa), truthB=PoseModel.of(pb)))
    return TeachingRecording(markerA=marker_a, markerB=marker_b, samples=samples,
                             approach=None if approach is None else list(map(float, approach)))


def top_marker(marker_id: str, top: float, side: float = 0.04) -> MarkerModel:
    """A marker lying on the object's top face (at height *top*), facing up."""
    return MarkerModel(id=marker_id, sideLength=side, markerInObject=PoseModel(t=[0.0, 0.0, top]))


def trial_poses(relative: Pose, orientations: int = 5, distance: float = 0.6,
                tilt: float = math.radians(20.0)) -> list[tuple[Pose, Pose]]:
    """
    Camera-frame poses of the assembled pair for *orientations* teaching
    trials: A in front of the camera, tops facing it, turned about the
    optical axis and tilted.
    """
    out = []
    for k in range(orientations):
        turn = 2.0 * math.pi * k / orientations
        R = rot_z(turn) @ rot_x(math.pi + tilt * math.cos(turn)) @ rot_y(tilt * math.sin(turn))
        pose_a = Pose([0.02 * math.cos(turn), 0.02 * math.sin(turn), distance], R)
        out.append((pose_a, pose_a @ relative))
    return out
