import numpy as np
import pytest

from deskasm.collision import (ConvexBody, bodies_clearance, capsule_clearance, points_clearance,
                               segment_bound, segment_samples, table_clearance)
from deskasm.mesh import box
from deskasm.placement import TableModel
from deskasm.se3 import Pose, rot_z


@pytest.fixture
def unit_box() -> ConvexBody:
    return ConvexBody.from_mesh(box(), name="box")


def test_distance_bound_outside_and_inside(unit_box) -> None:
    d = unit_box.distance_bound(np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.75]]))
    assert np.allclose(d, [1.5, -0.5, 0.25])
    assert unit_box.contains(np.array([[0.4, 0.4, -0.4], [0.6, 0.0, 0.0]])).tolist() == [True, False]
    assert unit_box.contains(np.array([0.6, 0.0, 0.0]), tol=0.2).tolist() == [True]


def test_posed_body() -> None:
    body = ConvexBody.from_mesh(box(), Pose.from_translation([1.0, 0.0, 0.0]))
    assert body.contains(np.array([1.4, 0.0, 0.0]))[0]
    assert not body.contains(np.array([0.4, 0.0, 0.0]))[0]
    assert len(body.vertices) == 8


def test_segment_bound(unit_box) -> None:
    assert segment_bound(unit_box, [-2.0, 2.0, 0.0], [2.0, 2.0, 0.0]) == pytest.approx(1.5)
    assert segment_bound(unit_box, [-2.0, 0.0, 0.0], [2.0, 0.0, 0.0]) == pytest.approx(-0.5)
    assert segment_bound(unit_box, [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]) == pytest.approx(1.5)


def test_segment_bound_matches_dense_sampling(unit_box) -> None:
    rng = np.random.default_rng(0)
    for _ in range(20):
        p, q = rng.uniform(-2.0, 2.0, (2, 3))
        dense = unit_box.distance_bound(segment_samples(p, q, 1e-3)).min()
        assert segment_bound(unit_box, p, q) <= dense + 1e-12
        assert segment_bound(unit_box, p, q) == pytest.approx(dense, abs=2e-3)


def test_capsule_clearance(unit_box) -> None:
    assert capsule_clearance(unit_box, [-2.0, 2.0, 0.0], [2.0, 2.0, 0.0], 0.1) == pytest.approx(1.4)


def test_points_and_table_clearance(unit_box) -> None:
    assert points_clearance(unit_box, np.array([[3.0, 0.0, 0.0], [0.0, 0.0, 1.0]])) == pytest.approx(0.5)
    table = TableModel(height=0.1, bounds=(-1.0, 1.0, -1.0, 1.0))
    pts = np.array([[0.0, 0.0, 0.5], [0.2, 0.0, 0.35]])
    assert table_clearance(table, pts, radius=0.05) == pytest.approx(0.2)
    assert table_clearance(table, pts) == pytest.approx(0.25)


def test_bodies_clearance(unit_box) -> None:
    far = ConvexBody.from_mesh(box(center=(3.0, 0.0, 0.0)))
    assert bodies_clearance(unit_box, far) == pytest.approx(2.0)
    overlapping = ConvexBody.from_mesh(box(center=(0.5, 0.0, 0.0)))
    assert bodies_clearance(unit_box, overlapping) < 0.0
    samples = np.array([[2.6, 0.0, 0.0]])
    assert bodies_clearance(unit_box, far, samples) < 0.0


def test_crossed_bars_overlap_without_vertex_contact() -> None:
    bar_x = ConvexBody.from_mesh(box((1.0, 0.1, 0.1)))
    bar_y = ConvexBody.from_mesh(box((0.1, 1.0, 0.1), (0.0, 0.0, 0.05)))
    assert not bar_x.contains(bar_y.vertices).any()
    assert not bar_y.contains(bar_x.vertices).any()
    assert bodies_clearance(bar_x, bar_y) == pytest.approx(-0.05, abs=1e-9)
    assert bodies_clearance(bar_y, bar_x) == pytest.approx(-0.05, abs=1e-9)
    lifted = ConvexBody.from_mesh(box((0.1, 1.0, 0.1), (0.0, 0.0, 0.3)))
    assert bodies_clearance(bar_x, lifted) == pytest.approx(0.2, abs=1e-9)


def test_rotated_edges_crossing() -> None:
    bar_x = ConvexBody.from_mesh(box((1.0, 0.1, 0.1)))
    diagonal = ConvexBody.from_mesh(box((1.0, 0.1, 0.1)), Pose([0.0, 0.0, 0.09], rot_z(0.8)))
    assert bodies_clearance(bar_x, diagonal) == pytest.approx(-0.01, abs=1e-9)
    apart = ConvexBody.from_mesh(box((1.0, 0.1, 0.1)), Pose([0.0, 0.0, 0.15], rot_z(0.8)))
    assert bodies_clearance(bar_x, apart) == pytest.approx(0.05, abs=1e-9)


def test_touching_faces_have_zero_clearance(unit_box) -> None:
    stacked = ConvexBody.from_mesh(box(center=(0.0, 0.0, 1.0)))
    assert bodies_clearance(unit_box, stacked) == pytest.approx(0.0, abs=1e-9)
