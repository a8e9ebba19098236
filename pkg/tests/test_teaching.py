import json
import math

import numpy as np
import pytest

from conftest import write_json
from deskasm.errors import DegenerateConfigurationError, SchemaError
from deskasm.schemas import PoseModel
from deskasm.se3 import Pose, pose_error, rot_x, rot_z
from deskasm.teaching import (MarkerModel, TeachingRecord, aggregate_poses, estimate_marker_pose,
                              load_recording, load_teaching_record, marker_corners,
                              object_pose_from_marker, project_marker, relative_assembly_pose,
                              save_teaching_record, simulate_recording, teach, top_marker, trial_poses)

RELATIVE = Pose([0.0, 0.0, 0.03], np.eye(3))


def _recording(intrinsics, pixel_sigma=0.0, frames=1, orientations=5, approach=None, relative=RELATIVE, seed=0):
    pairs = trial_poses(relative, orientations)
    poses_a = [pa for pa, _ in pairs for _ in range(frames)]
    poses_b = [pb for _, pb in pairs for _ in range(frames)]
    return simulate_recording(poses_a, poses_b, top_marker("blockA", 0.03), top_marker("blockB", 0.03),
                              intrinsics, pixel_sigma, np.random.default_rng(seed), approach)


# ---------------------------------------------------------------- markers
def test_marker_corners_are_square() -> None:
    c = marker_corners(0.04)
    assert c.shape == (4, 3)
    assert np.allclose(np.linalg.norm(np.roll(c, -1, axis=0) - c, axis=1), 0.04)
    assert np.allclose(c.mean(axis=0), 0.0)


def test_marker_pose_from_exact_corners(intrinsics) -> None:
    marker = MarkerModel(id="m", sideLength=0.05)
    truth = Pose([0.05, -0.02, 0.5], rot_x(math.pi + 0.3) @ rot_z(0.4))
    pose, rmse = estimate_marker_pose(project_marker(truth, marker, intrinsics), marker, intrinsics)
    assert pose.allclose(truth, atol=1e-6)
    assert rmse < 1e-6


def test_fronto_parallel_marker(intrinsics) -> None:
    marker = MarkerModel(id="m", sideLength=0.04)
    truth = Pose([0.0, 0.0, 1.0], rot_x(math.pi))
    pose, _ = estimate_marker_pose(project_marker(truth, marker, intrinsics), marker, intrinsics)
    assert pose.allclose(truth, atol=1e-8)


def test_collinear_corners_are_rejected(intrinsics) -> None:
    marker = MarkerModel(id="m", sideLength=0.04)
    with pytest.raises(DegenerateConfigurationError):
        estimate_marker_pose(np.array([[10.0, 10.0], [20.0, 20.0], [30.0, 30.0], [40.0, 10.0]]), marker, intrinsics)
    with pytest.raises(DegenerateConfigurationError):
        estimate_marker_pose(np.full((4, 2), 100.0), marker, intrinsics)


# ---------------------------------------------------------------- poses
def test_object_pose_from_marker() -> None:
    marker = top_marker("a", 0.03)
    obj = Pose([0.1, 0.2, 0.6], rot_x(math.pi) @ rot_z(0.3))
    assert object_pose_from_marker(obj @ marker.marker_in_object.to_pose(), marker).allclose(obj, atol=1e-12)


def test_relative_assembly_pose() -> None:
    a = Pose([0.1, 0.2, 0.3], rot_z(0.5))
    assert relative_assembly_pose(a, a).allclose(Pose.identity(), atol=1e-12)
    assert relative_assembly_pose(a, a @ RELATIVE).allclose(RELATIVE, atol=1e-12)
    world = Pose([1.0, -2.0, 0.5], rot_x(0.7))
    b = Pose([0.0, 0.4, 0.1], rot_z(-1.0))
    assert relative_assembly_pose(world @ a, world @ b).allclose(relative_assembly_pose(a, b), atol=1e-12)


def test_aggregate_poses() -> None:
    poses = [Pose([0.0, 0.0, z], rot_z(0.1)) for z in (0.01, 0.02, 0.09)]
    agg = aggregate_poses(poses)
    assert np.allclose(agg.position, [0.0, 0.0, 0.02])
    assert np.allclose(agg.rotation, rot_z(0.1), atol=1e-12)
    assert aggregate_poses(poses[:1]) is poses[0]


# ---------------------------------------------------------------- teach
def test_teach_noise_free(intrinsics) -> None:
    record = teach(_recording(intrinsics))
    d, ang = pose_error(record.relative, RELATIVE)
    assert d < 1e-6 and ang < 1e-6
    assert (record.object_a, record.object_b) == ("blockA", "blockB")
    assert np.allclose(record.approach, [0.0, 0.0, -1.0], atol=1e-6)
    assert record.retraction_distance is None
    assert record.truth.to_pose().allclose(RELATIVE, atol=1e-12)
    assert len(record.samples) == 5


def test_teach_scales_retraction_from_approach(intrinsics) -> None:
    record = teach(_recording(intrinsics, approach=[0.0, 0.0, -0.06]))
    assert record.retraction_distance == pytest.approx(0.03)
    assert np.allclose(record.approach, [0.0, 0.0, -1.0])


def test_teach_unit_approach_keeps_default_retraction(intrinsics) -> None:
    record = teach(_recording(intrinsics, approach=[0.0, 1.0, 0.0]))
    assert record.retraction_distance is None
    assert record.approach == [0.0, 1.0, 0.0]


def test_teach_rejects_zero_approach(intrinsics) -> None:
    with pytest.raises(SchemaError):
        teach(_recording(intrinsics, approach=[0.0, 0.0, 0.0]))


def test_teach_with_pixel_noise(intrinsics) -> None:
    relative = Pose([0.01, -0.005, 0.03], rot_z(0.3))
    record = teach(_recording(intrinsics, pixel_sigma=0.2, frames=10, relative=relative, seed=3))
    d, ang = pose_error(record.relative, relative)
    assert d < 0.005
    assert ang < 0.05


# ---------------------------------------------------------------- files
def test_record_round_trip(tmp_path, intrinsics) -> None:
    record = teach(_recording(intrinsics, approach=[0.0, 0.0, -0.06]))
    path = str(tmp_path / "record.json")
    save_teaching_record(record, path)
    back = load_teaching_record(path)
    assert back.relative.allclose(record.relative, atol=0.0)
    assert back.retraction_distance == record.retraction_distance
    assert len(back.samples) == len(record.samples)
    assert "relativePose" in json.loads(open(path, encoding="utf-8").read())


def test_record_missing_relative_pose(tmp_path) -> None:
    path = str(tmp_path / "record.json")
    write_json(path, {"version": 1, "objectA": "a", "objectB": "b", "approach": [0.0, 0.0, -1.0]})
    with pytest.raises(SchemaError) as info:
        load_teaching_record(path)
    assert info.value.key == "relativePose"


def test_record_version_mismatch(tmp_path) -> None:
    path = str(tmp_path / "record.json")
    write_json(path, {"version": 2, "objectA": "a", "objectB": "b", "relativePose": {"t": [0, 0, 0]},
                      "approach": [0.0, 0.0, -1.0]})
    with pytest.raises(SchemaError) as info:
        load_teaching_record(path)
    assert info.value.key == "version"


def test_non_unit_approach_is_not_saved(tmp_path) -> None:
    record = TeachingRecord(objectA="a", objectB="b", relativePose=PoseModel(t=[0.0, 0.0, 0.0]),
                            approach=[0.0, 0.0, 2.0])
    with pytest.raises(SchemaError) as info:
        save_teaching_record(record, str(tmp_path / "record.json"))
    assert info.value.key == "approach"


def test_recording_round_trip(tmp_path, intrinsics) -> None:
    recording = _recording(intrinsics, orientations=2)
    path = str(tmp_path / "recording.json")
    write_json(path, recording.model_dump(by_alias=True))
    back = load_recording(path)
    assert len(back.samples) == 2
    assert teach(back).relative.allclose(teach(recording).relative, atol=1e-12)


def test_rotation_in_pose_model_is_validated() -> None:
    with pytest.raises(ValueError):
        PoseModel(t=[0.0, 0.0, 0.0], R=[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
