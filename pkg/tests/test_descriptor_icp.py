import math
from types import SimpleNamespace

import numpy as np
import pytest

from deskasm.cloud import PointCloud
from deskasm.descriptor import (ROLL_STEP, compute_descriptor, descriptor_distance, estimate_roll,
                                match_templates)
from deskasm.errors import PreconditionError
from deskasm.icp import best_fit_transform, icp_refine
from deskasm.mesh import l_prism, sample_surface
from deskasm.se3 import Pose, pose_error, random_rotation, rot_from_rpy, rot_z


def _sensor_cloud(rng, n=400) -> PointCloud:
    """Random points in front of the sensor with unit normals roughly facing it."""
    pts = np.column_stack([rng.uniform(-0.05, 0.05, (n, 2)), rng.uniform(0.4, 0.5, n)])
    normals = np.column_stack([rng.normal(0.0, 0.5, (n, 2)), -np.ones(n)])
    return PointCloud(pts, normals / np.linalg.norm(normals, axis=1, keepdims=True))


def _model(n=1500, seed=0) -> PointCloud:
    pts, normals, _ = sample_surface(l_prism(), n, np.random.default_rng(seed))
    return PointCloud(pts, normals)


# ---------------------------------------------------------------- descriptors
def test_identical_clouds_have_zero_distance() -> None:
    cloud = _sensor_cloud(np.random.default_rng(0))
    assert descriptor_distance(compute_descriptor(cloud), compute_descriptor(cloud)) == 0.0


def test_descriptor_ignores_point_order() -> None:
    cloud = _sensor_cloud(np.random.default_rng(1))
    perm = np.random.default_rng(2).permutation(len(cloud))
    a, b = compute_descriptor(cloud), compute_descriptor(cloud.subset(perm))
    assert descriptor_distance(a, b) < 1e-12
    assert np.allclose(a.roll_hist, b.roll_hist, atol=1e-12)


def test_descriptor_histograms_are_normalized() -> None:
    d = compute_descriptor(_sensor_cloud(np.random.default_rng(3)))
    for h in (d.normal_angle_hist, d.centroid_dist_hist, d.roll_hist):
        assert h.sum() == pytest.approx(1.0)


def test_roll_about_optical_axis_is_recovered() -> None:
    cloud = _sensor_cloud(np.random.default_rng(4), 2000)
    turn = Pose(np.zeros(3), rot_z(math.radians(40.0)))
    a, b = compute_descriptor(cloud), compute_descriptor(cloud.transformed(turn))
    assert descriptor_distance(a, b) < 0.05
    assert abs(estimate_roll(b.roll_hist, a.roll_hist) - math.radians(40.0)) <= ROLL_STEP + 1e-9


def test_estimate_roll_on_shifted_histograms() -> None:
    h = np.random.default_rng(5).random(90)
    assert estimate_roll(np.roll(h, 7), h) == pytest.approx(7 * ROLL_STEP)
    assert estimate_roll(np.roll(h, -5), h) == pytest.approx(-5 * ROLL_STEP)
    assert estimate_roll(h, h) == 0.0


def test_descriptor_preconditions() -> None:
    with pytest.raises(PreconditionError):
        compute_descriptor(PointCloud(np.zeros((0, 3)), np.zeros((0, 3))))
    with pytest.raises(PreconditionError):
        compute_descriptor(PointCloud(np.ones((4, 3))))


def test_match_templates_ranks_self_first() -> None:
    rng = np.random.default_rng(6)
    library = [SimpleNamespace(descriptor=compute_descriptor(_sensor_cloud(rng))) for _ in range(5)]
    hits = match_templates(library[3].descriptor, library, k=3)
    assert [h.index for h in hits][0] == 3
    assert hits[0].distance == 0.0
    assert [h.distance for h in hits] == sorted(h.distance for h in hits)
    assert len(match_templates(library[0].descriptor, library, k=10)) == 5
    with pytest.raises(PreconditionError):
        match_templates(library[0].descriptor, [])


# ---------------------------------------------------------------- icp
def test_best_fit_transform_is_exact() -> None:
    rng = np.random.default_rng(7)
    A = rng.normal(size=(30, 3))
    T = Pose(rng.normal(size=3), random_rotation(rng))
    assert best_fit_transform(A, T.transform_points(A)).allclose(T, atol=1e-9)


def test_icp_from_exact_pose_stops_immediately() -> None:
    model = _model()
    T = Pose([0.3, 0.1, 0.05], rot_from_rpy(0.2, -0.1, 1.0))
    result = icp_refine(model, model.transformed(T), T)
    assert result.iterations == 1
    assert result.converged and not result.diverged
    assert result.rmse < 1e-9
    assert result.outliers == 0


def test_icp_recovers_small_offset() -> None:
    model = _model()
    T = Pose([0.006, -0.004, 0.003], rot_from_rpy(math.radians(4.0), math.radians(-3.0), math.radians(6.0)))
    result = icp_refine(model, model.transformed(T), Pose.identity(), max_iter=200, tol=1e-10, cap=0.1)
    d, ang = pose_error(result.pose, T)
    assert not result.diverged
    assert d < 1e-3
    assert ang < 0.02
    assert result.history[0] >= result.rmse


def test_icp_disjoint_clouds_diverge() -> None:
    model = _model()
    far = model.transformed(Pose.from_translation([1.0, 0.0, 0.0]))
    result = icp_refine(model, far, Pose.identity(), cap=0.05)
    assert result.diverged
    assert result.pose.allclose(Pose.identity())


def test_icp_needs_points() -> None:
    with pytest.raises(PreconditionError):
        icp_refine(_model(), PointCloud(np.zeros((0, 3))), Pose.identity())
