import io
import math

import numpy as np
import pytest
from rich.console import Console

from deskasm.reports import PrecisionReport, pose_row
from deskasm.se3 import Pose, rot_z


def test_pose_row_position_error() -> None:
    row = pose_row("t0", Pose([0.403, 0.004, 0.0], np.eye(3)), Pose([0.4, 0.0, 0.0], np.eye(3)), "raw")
    assert row.d_mm == pytest.approx(5.0)
    assert (row.x_mm, row.y_mm, row.z_mm) == pytest.approx((3.0, 4.0, 0.0))
    assert (row.roll_deg, row.pitch_deg, row.yaw_deg) == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)
    assert row.formatted() == "5.00 (0.00, 0.00, 0.00)"


def test_pose_row_wraps_yaw() -> None:
    row = pose_row("t1", Pose(np.zeros(3), rot_z(-3.1)), Pose(np.zeros(3), rot_z(3.1)))
    assert row.yaw_deg == pytest.approx(math.degrees(2 * math.pi - 6.2))
    assert row.d_mm == 0.0


def test_aggregates_are_recomputed_from_rows() -> None:
    report = PrecisionReport("detection")
    truth = Pose([0.4, 0.0, 0.0], np.eye(3))
    report.add(pose_row("a", Pose([0.402, 0.0, 0.0], np.eye(3)), truth, "raw"))
    report.add(pose_row("b", Pose([0.396, 0.0, 0.0], np.eye(3)), truth, "raw"))
    report.add(pose_row("a", Pose([0.401, 0.0, 0.0], np.eye(3)), truth, "corrected"))
    assert report.kinds() == ["raw", "corrected"]
    assert report.aggregate("raw")["x_mm"] == pytest.approx(3.0)
    assert report.maximum("raw")["d_mm"] == pytest.approx(4.0)
    assert report.aggregate()["d_mm"] == pytest.approx(7.0 / 3.0)
    assert report.aggregate("missing")["d_mm"] == 0.0
    report.rows.pop()
    assert report.kinds() == ["raw"]


def test_report_dict_and_table() -> None:
    report = PrecisionReport("detection", failures=["q3"])
    report.add(pose_row("q0", Pose([0.001, 0.0, 0.0], np.eye(3)), Pose.identity(), "raw"))
    data = report.to_dict()
    assert set(data) == {"title", "rows", "aggregate", "failures"}
    assert data["failures"] == ["q3"]
    assert data["rows"][0]["label"] == "q0"
    assert data["aggregate"]["raw"]["d_mm"] == pytest.approx(1.0)

    out = io.StringIO()
    Console(file=out, width=120).print(report.table())
    text = out.getvalue()
    assert "q0" in text and "mean |Δ|" in text
    assert "1.00 (0.00, 0.00, 0.00)" in text
