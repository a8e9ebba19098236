import math

import numpy as np
import pytest

from deskasm.se3 import (Pose, compose_pose, invert_pose, is_rotation, mean_rotation, orthonormalize,
                         pose_error, random_rotation, rot_from_rpy, rot_x, rot_z, rotation_between,
                         rotation_distance, rpy_from_rot, transform_point, wrap_angle)


def _random_pose(rng) -> Pose:
    return Pose(rng.uniform(-1.0, 1.0, 3), random_rotation(rng))


# ---------------------------------------------------------------- rpy
def test_rot_from_rpy_identity() -> None:
    assert np.array_equal(rot_from_rpy(0.0, 0.0, 0.0), np.eye(3))


def test_rot_from_rpy_half_turn_about_z() -> None:
    assert np.allclose(rot_from_rpy(0.0, 0.0, math.pi), np.diag([-1.0, -1.0, 1.0]), atol=1e-12)


def test_rpy_round_trip_fixed_angles() -> None:
    r = rpy_from_rot(rot_from_rpy(0.1, 0.2, 0.3))
    assert np.allclose(r, (0.1, 0.2, 0.3), atol=1e-9)


def test_rpy_of_identity_and_pure_yaw() -> None:
    assert rpy_from_rot(np.eye(3)) == (0.0, 0.0, 0.0)
    assert np.allclose(rpy_from_rot(rot_z(math.pi / 2)), (0.0, 0.0, math.pi / 2), atol=1e-12)


def test_rpy_round_trip_random() -> None:
    rng = np.random.default_rng(11)
    for _ in range(300):
        roll, yaw = rng.uniform(-math.pi + 1e-3, math.pi - 1e-3, 2)
        pitch = rng.uniform(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
        assert np.allclose(rpy_from_rot(rot_from_rpy(roll, pitch, yaw)), (roll, pitch, yaw), atol=1e-9)


def test_rpy_gimbal_lock_puts_rotation_in_yaw() -> None:
    R = rot_from_rpy(0.3, math.pi / 2, 0.2)
    r = rpy_from_rot(R)
    assert r.roll == 0.0
    assert r.pitch == pytest.approx(math.pi / 2)
    assert np.allclose(rot_from_rpy(*r), R, atol=1e-9)


def test_wrap_angle_range() -> None:
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.25) == 0.25


# ---------------------------------------------------------------- rotations
def test_rotation_distance_cases() -> None:
    R = rot_from_rpy(0.4, -0.2, 1.1)
    assert rotation_distance(R, R) < 1e-12
    assert rotation_distance(rot_z(math.pi / 2), np.eye(3)) == pytest.approx(math.pi / 2)
    assert rotation_distance(rot_x(math.pi), np.eye(3)) == pytest.approx(math.pi)


def test_rotation_distance_symmetric() -> None:
    rng = np.random.default_rng(3)
    for _ in range(100):
        Ra, Rb = random_rotation(rng), random_rotation(rng)
        assert rotation_distance(Ra, Rb) == pytest.approx(rotation_distance(Rb, Ra), abs=1e-12)


def test_is_rotation_and_orthonormalize() -> None:
    assert is_rotation(rot_z(0.3))
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not is_rotation(2.0 * np.eye(3))
    noisy = rot_z(0.3) + 1e-4 * np.ones((3, 3))
    assert is_rotation(orthonormalize(noisy))


def test_rotation_between_maps_directions() -> None:
    for a, b in (([1, 0, 0], [0, 1, 0]), ([0, 0, 1], [0, 0, 1]), ([0, 0, 1], [0, 0, -1]), ([1, 2, 3], [-2, 0, 1])):
        R = rotation_between(a, b)
        assert is_rotation(R)
        assert np.allclose(R @ (np.array(a) / np.linalg.norm(a)), np.array(b) / np.linalg.norm(b), atol=1e-12)


def test_mean_rotation_of_equal_rotations() -> None:
    R = rot_from_rpy(0.2, 0.1, -0.7)
    assert np.allclose(mean_rotation([R, R, R]), R, atol=1e-12)


# ---------------------------------------------------------------- poses
def test_compose_with_identity() -> None:
    b = _random_pose(np.random.default_rng(0))
    assert compose_pose(Pose.identity(), b).allclose(b, atol=1e-15)
    assert (b @ Pose.identity()).allclose(b, atol=1e-15)


def test_invert_is_an_involution() -> None:
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = _random_pose(rng)
        assert invert_pose(invert_pose(a)).allclose(a, atol=1e-9)
        assert (a @ a.inverse()).allclose(Pose.identity(), atol=1e-12)


def test_transform_point_by_translation() -> None:
    t, p = np.array([0.1, -0.2, 0.3]), np.array([1.0, 2.0, 3.0])
    assert np.allclose(transform_point(Pose.from_translation(t), p), p + t, atol=1e-15)


def test_pose_matrix_and_dict_forms() -> None:
    a = _random_pose(np.random.default_rng(5))
    assert Pose.from_matrix(a.as_matrix()).allclose(a, atol=0.0)
    assert Pose.from_dict(a.to_dict()).allclose(a, atol=0.0)
    assert np.allclose(a.transform_points(np.eye(3)), [a.transform_point(e) for e in np.eye(3)])


def test_pose_error() -> None:
    a = Pose([0.0, 0.0, 0.0], np.eye(3))
    b = Pose([0.003, 0.004, 0.0], rot_z(0.1))
    d, ang = pose_error(a, b)
    assert d == pytest.approx(0.005)
    assert ang == pytest.approx(0.1)
