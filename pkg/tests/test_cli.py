import json
import os

import numpy as np
import pytest

from cli import main
from conftest import ASSETS, CUBE_SCENE, DEMO_SCENE
from deskasm.teaching import load_teaching_record


def test_placements_json(capsys, tmp_path) -> None:
    out_dir = str(tmp_path / "out")
    assert main(["placements", os.path.join(ASSETS, "cube.obj"), "--json", "--out-dir", out_dir]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["mesh"] == "cube.obj"
    assert len(data["placements"]) == 6
    with open(os.path.join(out_dir, "placements.json"), "r", encoding="utf-8") as f:
        assert json.load(f) == data


def test_teach_simulated(capsys, tmp_path) -> None:
    path = str(tmp_path / "record.json")
    code = main(["teach", "--simulate", DEMO_SCENE, "--frames", "2", "--orientations", "2",
                 "--pixel-sigma", "0", "-o", path, "--json"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["record"] == path
    assert data["report"] is not None
    record = load_teaching_record(path)
    assert np.allclose(record.relative.position, [0.0, 0.0, 0.03], atol=1e-6)
    assert record.object_a == "blockA"


def test_teach_needs_an_input() -> None:
    assert main(["teach"]) == 2


def test_input_errors_exit_two(tmp_path) -> None:
    assert main(["placements", str(tmp_path / "missing.obj")]) == 2
    assert main(["plan", "--scene", DEMO_SCENE, "--record", str(tmp_path / "missing.json")]) == 2
    assert main(["detect", "--scene", CUBE_SCENE, "--object", "nope"]) == 2


def test_bad_profile_exits_two(tmp_path) -> None:
    assert main(["placements", os.path.join(ASSETS, "cube.obj"), "--config", "no-such-profile"]) == 2


@pytest.mark.slow
def test_run_demo_writes_outputs(tmp_path) -> None:
    out_dir = str(tmp_path / "demo")
    assert main(["run-demo", "--out-dir", out_dir, "--json"]) == 0
    for name in ("trajectory.json", "plan_a.json", "plan_b.json", "report.json", "teaching_record.json"):
        assert os.path.exists(os.path.join(out_dir, name))
    with open(os.path.join(out_dir, "report.json"), "r", encoding="utf-8") as f:
        report = json.load(f)
    assert report["trajectory"]["byType"]["insert"] == 1
    assert "transfer" in report["trajectory"]["byType"]
    assert report["recheck"]["passed"] is True
    assert set(report["finalPoses"]) == {"blockA", "blockB"}


def test_detect_exits_four_when_camera_sees_nothing(tmp_path) -> None:
    with open(CUBE_SCENE, "r", encoding="utf-8") as f:
        data = json.load(f)
    data["camera"]["target"] = [0.45, -3.0, 0.6]
    data["objects"][0]["mesh"] = os.path.join(ASSETS, "cube.obj")
    path = tmp_path / "away.json"
    path.write_text(json.dumps(data))
    assert main(["detect", "--scene", str(path)]) == 4
