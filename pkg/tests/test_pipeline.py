import math

import numpy as np
import pytest

from conftest import CUBE_SCENE, DEMO_SCENE
from deskasm import pipeline
from deskasm.assembly import AssemblySpec, WorldGrasps
from deskasm.cloud import PointCloud
from deskasm.config import AppConfig, PerceptionConfig
from deskasm.errors import AssemblyCollisionError, NoSegmentError, SchemaError, StageError
from deskasm.executor import Executor, chain
from deskasm.grasp import GraspSet
from deskasm.pipeline import PIPELINE, at_goal, assembly_flow, detect_scene, detection_trials, initial_state, \
    run_report, simulate_teaching
from deskasm.robot import RobotModel
from deskasm.scene import load_meshes, load_scene
from deskasm.schemas import PoseModel
from deskasm.se3 import Pose, rot_x, rot_z
from deskasm.teaching import TeachingRecord


@pytest.fixture(scope="module")
def demo():
    scene = load_scene(DEMO_SCENE)
    return scene, load_meshes(scene)


def _record(rel=(0.0, 0.0, 0.03), a="blockA", b="blockB") -> TeachingRecord:
    return TeachingRecord(objectA=a, objectB=b, relativePose=PoseModel(t=list(rel)), approach=[0.0, 0.0, -1.0],
                          retractionDistance=0.03)


def test_at_goal(cube) -> None:
    goal = Pose([0.4, 0.0, 0.02], np.eye(3))
    assert at_goal(cube, goal, goal, 0.003)
    assert not at_goal(cube, Pose([0.41, 0.0, 0.02], np.eye(3)), goal, 0.003)
    assert at_goal(cube, Pose([0.4, 0.0, 0.02], rot_z(math.pi / 2)), goal, 0.003)
    assert not at_goal(cube, Pose([0.4, 0.0, 0.02], rot_z(0.3)), goal, 0.003)
    assert at_goal(cube, Pose([0.4, 0.0, 0.02], rot_x(math.pi)), goal, 0.003)


def test_flow_covers_both_steps() -> None:
    flow = assembly_flow()
    nodes = list(flow["nodes"])
    assert flow["start"] == "observe"
    assert nodes[-2:] == ["insert", "recheck"]
    assert nodes.index("step-a/motion") < nodes.index("step-b/graph")
    assert set(PIPELINE.catalogue()) == {"observe", "detect", "grasps", "assembly", "graph", "keyframes",
                                         "motion", "insert", "recheck"}


def test_simulated_teaching_recovers_relation(demo) -> None:
    scene, meshes = demo
    record = simulate_teaching(scene, meshes, frames=2, orientations=3, pixel_sigma=0.0)
    assert np.allclose(record.relative.position, [0.0, 0.0, 0.03], atol=1e-6)
    assert np.allclose(record.relative.rotation, np.eye(3), atol=1e-6)
    assert record.retraction_distance == pytest.approx(0.03)
    assert np.allclose(record.approach, [0.0, 0.0, -1.0])
    assert len(record.samples) == 6


def test_simulated_teaching_needs_true_relation(demo) -> None:
    scene, meshes = demo
    bare = scene.model_copy(update={"assembly": scene.assembly.model_copy(update={"relative_pose": None})})
    with pytest.raises(SchemaError) as info:
        simulate_teaching(bare, meshes)
    assert info.value.key == "assembly.relativePose"


def test_initial_state_checks_record(demo) -> None:
    scene, meshes = demo
    state = initial_state(scene, meshes, RobotModel(), _record(), AppConfig(), seed=5)
    assert state["seed"] == 5
    assert state["parts"]["A"].name == "blockA" and state["parts"]["B"].name == "blockB"
    assert state["parts"]["A"].truth.allclose(scene.object("blockA").pose.to_pose())
    assert np.allclose(state["goal_a"].position, [0.5, -0.05, 0.0])
    with pytest.raises(SchemaError) as info:
        initial_state(scene, meshes, RobotModel(), _record(a="blockB", b="blockA"), AppConfig())
    assert info.value.key == "objectA"
    with pytest.raises(SchemaError) as info:
        initial_state(scene.model_copy(update={"assembly": None}), meshes, RobotModel(), _record(), AppConfig())
    assert info.value.key == "assembly"


def test_overlapping_assembly_fails_in_its_stage(demo) -> None:
    scene, meshes = demo
    state = initial_state(scene, meshes, RobotModel(), _record(rel=(0.0, 0.0, 0.0)), AppConfig())
    with pytest.raises(StageError) as info:
        Executor(chain(("assembly", "assembly")), PIPELINE, state).run()
    assert info.value.stage == "assembly"
    assert isinstance(info.value.cause, AssemblyCollisionError)
    assert info.value.exit_code == 3


def test_step_skipped_when_part_is_at_goal(demo) -> None:
    scene, meshes = demo
    state = initial_state(scene, meshes, RobotModel(), _record(), AppConfig())
    goal = state["goal_a"]
    state["parts"]["A"].pose = goal
    state["parts"]["B"].pose = scene.object("blockB").pose.to_pose()
    state["assembly"] = AssemblySpec(Pose([0.0, 0.0, 0.03], np.eye(3)), np.array([0.0, 0.0, -1.0]), goal)
    state["world_grasps"] = WorldGrasps(GraspSet([], "a(g)"), GraspSet([], "a(g)"), GraspSet([], "p(g)"))
    state = Executor(chain(("graph", "graph", {"role": "A"}), ("keyframes", "keyframes", {"role": "A"})),
                     PIPELINE, state).run()
    assert state["graphs"]["A"] is None
    assert state["plans"]["A"].keyframes == [] and state["plans"]["A"].cost == 0.0

    report = run_report(state)
    assert report["plans"]["A"] == {"keyframes": 0, "transfers": 0, "cost": 0.0, "graph": None}
    assert report["assembly"]["retractionDistance"] == pytest.approx(0.5)
    assert report["finalPoses"]["blockA"] == goal.to_dict()
    assert report["detections"] == {}


@pytest.mark.slow
def test_detection_trials_on_cube() -> None:
    scene = load_scene(CUBE_SCENE)
    cfg = AppConfig(perception=PerceptionConfig(model_samples=1500, template_size=64, template_focal=100.0))
    report = detection_trials(scene, load_meshes(scene), "cube", cfg, seed=1)
    assert len(report.rows) + 3 * len(report.failures) == 3 * 6 * 4
    assert len(report.rows) > 0
    assert report.kinds() == ["raw", "literal", "yaw-invariant"]
    for row in report.rows:
        if row.kind == "literal":
            assert row.z_mm == pytest.approx(-20.0)
        if row.kind == "yaw-invariant":
            assert abs(row.z_mm) < 1e-6
    assert report.aggregate("yaw-invariant")["d_mm"] < 10.0


def _looking_away(scene):
    camera = scene.camera.model_copy(update={"target": [0.45, -3.0, 0.6]})
    return scene.model_copy(update={"camera": camera})


def test_detect_scene_fails_when_camera_sees_nothing() -> None:
    scene = _looking_away(load_scene(CUBE_SCENE))
    with pytest.raises(StageError) as info:
        detect_scene(scene, load_meshes(scene), ["cube"], AppConfig())
    assert info.value.stage == "observe"
    assert info.value.exit_code == 4
    assert isinstance(info.value.cause, NoSegmentError)


def test_detection_trials_without_any_detection_fail(monkeypatch) -> None:
    def no_segment(*args, **kwargs):
        raise NoSegmentError("scene cloud is empty")

    monkeypatch.setattr(pipeline, "build_template_library", lambda *args, **kwargs: [])
    monkeypatch.setattr(pipeline, "render_scene",
                        lambda *args, **kwargs: PointCloud(np.zeros((0, 3)), np.zeros((0, 3)), visible=False))
    monkeypatch.setattr(pipeline, "detect_object", no_segment)
    scene = load_scene(CUBE_SCENE)
    with pytest.raises(StageError) as info:
        detection_trials(scene, load_meshes(scene), "cube", AppConfig())
    assert info.value.stage == "trials/cube"
    assert info.value.exit_code == 4


@pytest.mark.slow
def test_detect_scene_reports_corrected_pose() -> None:
    scene = load_scene(CUBE_SCENE)
    cfg = AppConfig(perception=PerceptionConfig(model_samples=1500, template_size=64, template_focal=100.0))
    entries = detect_scene(scene, load_meshes(scene), ["cube"], cfg)
    entry = entries["cube"]
    assert entry["name"] == "cube"
    assert Pose.from_dict(entry["correctedPose"]).position[2] == pytest.approx(0.02)
    assert entry["error"]["corrected"]["d_mm"] < 10.0
