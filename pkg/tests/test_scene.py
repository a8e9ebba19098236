import json
import os

import numpy as np
import pytest

from conftest import ASSETS, DEMO_SCENE, write_json
from deskasm.errors import SchemaError
from deskasm.mesh import volume
from deskasm.placement import TableModel, stable_placements
from deskasm.scene import load_meshes, load_scene, quarter_centres, quarter_poses, render_scene, table_mesh


def _demo_raw() -> dict:
    with open(DEMO_SCENE, "r", encoding="utf-8") as f:
        raw = json.load(f)
    for o in raw["objects"]:
        o["mesh"] = os.path.join(ASSETS, os.path.basename(o["mesh"]))
    return raw


def test_demo_scene_loads() -> None:
    scene = load_scene(DEMO_SCENE)
    assert [o.name for o in scene.objects] == ["blockA", "blockB"]
    assert scene.assembly.object_a == "blockA"
    assert np.allclose(scene.assembly.relative_pose.to_pose().position, [0.0, 0.0, 0.03])
    assert scene.noise_sigma == 0.001
    meshes = load_meshes(scene)
    assert volume(meshes["blockA"]) == pytest.approx(0.06 * 0.06 * 0.03)
    assert volume(meshes["blockB"]) == pytest.approx(0.04 * 0.04 * 0.03)
    assert meshes["blockA"].vertices[:, 2].min() == pytest.approx(0.0)


def test_missing_mesh_file(tmp_path) -> None:
    raw = _demo_raw()
    raw["objects"][0]["mesh"] = "nowhere.obj"
    path = str(tmp_path / "scene.json")
    write_json(path, raw)
    with pytest.raises(SchemaError) as info:
        load_scene(path)
    assert info.value.key == "objects.0.mesh"


def test_unsupported_version(tmp_path) -> None:
    raw = _demo_raw()
    raw["version"] = 2
    path = str(tmp_path / "scene.json")
    write_json(path, raw)
    with pytest.raises(SchemaError) as info:
        load_scene(path)
    assert info.value.key == "version"


def test_assembly_names_unknown_object(tmp_path) -> None:
    raw = _demo_raw()
    raw["assembly"]["objectB"] = "blockC"
    path = str(tmp_path / "scene.json")
    write_json(path, raw)
    with pytest.raises(SchemaError):
        load_scene(path)


def test_missing_required_key(tmp_path) -> None:
    raw = _demo_raw()
    del raw["table"]
    path = str(tmp_path / "scene.json")
    write_json(path, raw)
    with pytest.raises(SchemaError) as info:
        load_scene(path)
    assert info.value.key == "table"


def test_missing_scene_file(tmp_path) -> None:
    with pytest.raises(SchemaError):
        load_scene(str(tmp_path / "absent.json"))


def test_camera_needs_pose_or_eye(tmp_path) -> None:
    raw = _demo_raw()
    del raw["camera"]["eye"]
    path = str(tmp_path / "scene.json")
    write_json(path, raw)
    with pytest.raises(SchemaError):
        load_scene(path)


def test_quarter_centres_and_poses(cube) -> None:
    table = TableModel(height=0.05, bounds=(0.2, 0.6, -0.2, 0.2))
    assert np.allclose(quarter_centres(table), [(0.3, -0.1), (0.5, -0.1), (0.3, 0.1), (0.5, 0.1)])
    poses = quarter_poses(table, stable_placements(cube)[0])
    assert len(poses) == 4
    assert all(p.position[2] == pytest.approx(0.07) for p in poses)


def test_table_mesh_covers_bounds() -> None:
    mesh = table_mesh(TableModel(height=0.1, bounds=(0.2, 0.7, -0.35, 0.35)))
    assert np.allclose(mesh.vertices[:, 2], 0.1)
    assert np.allclose(mesh.vertices[:, :2].min(axis=0), [0.2, -0.35])
    assert np.allclose(mesh.vertices[:, :2].max(axis=0), [0.7, 0.35])


def test_render_scene_include_filter() -> None:
    scene = load_scene(DEMO_SCENE)
    meshes = load_meshes(scene)
    table_only = render_scene(scene, meshes, noise_sigma=0.0, include=[])
    full = render_scene(scene, meshes, noise_sigma=0.0)
    assert np.allclose(table_only.points[:, 2], 0.0, atol=1e-9)
    assert full.points[:, 2].max() > 0.02
    assert len(table_only) > 0
