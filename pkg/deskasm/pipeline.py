"""
The assembly pipeline as a flow of registered stages.

    observe -> detect (A, B) -> grasps (A, B) -> assembly
            -> step A: graph -> keyframes -> motion
            -> step B: graph -> keyframes -> motion -> insert
            -> recheck

Every stage reads and extends one shared state dict; failures surface as
:class:`StageError` labelled with the flow node that raised them.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from deskasm.assembly import (AssemblySpec, WorldGrasps, assembly_grasps, check_assembled, insertion_line,
                              retract_grasps, world_grasps)
from deskasm.collision import ConvexBody
from deskasm.config import AppConfig, PlanningConfig, derive_seed
from deskasm.detect import DetectionResult, build_template_library, detect_object
from deskasm.errors import DetectionError, NoPathError, NoSegmentError, PlanningError, SchemaError, StageError
from deskasm.executor import Executor, chain
from deskasm.grasp import Grasp, GraspSet, collision_filter, sample_antipodal_grasps, transform_grasps
from deskasm.graph import Keyframe, KeyframePlan, build_grasp_graph, search_keyframes
from deskasm.mesh import TriMesh
from deskasm.motion import (CollisionChecker, HeldObject, Segment, Trajectory, attach_poses, plan_motion,
                            recheck, track_line)
from deskasm.placement import StablePlacement, TableModel, correct_pose, stable_placements
from deskasm.reports import PrecisionReport, pose_row
from deskasm.robot import RobotModel, solve_ik
from deskasm.scene import SceneConfig, quarter_poses, render_scene
from deskasm.se3 import Pose
from deskasm.stages import StageFactory
from deskasm.teaching import (TeachingRecord, simulate_recording, teach, top_marker, trial_poses)

logger = logging.getLogger(__name__)

PIPELINE = StageFactory()
ROLES = ("A", "B")


@dataclass(eq=False)
class Part:
    role:       str
    name:       str
    mesh:       TriMesh
    placements: list[StablePlacement] = field(default_factory=list)
    detection:  DetectionResult | None = None
    pose:       Pose | None = None            # current world pose (corrected detection, then goal)
    truth:      Pose | None = None
    grasps:     GraspSet | None = None        # object frame, tag "f"

    def body(self, pose: Pose | None = None) -> ConvexBody:
        return ConvexBody.from_mesh(self.mesh, pose or self.pose, self.name)


def _other(role: str) -> str:
    return "B" if role == "A" else "A"


def at_goal(mesh: TriMesh, pose: Pose, goal: Pose, tolerance: float) -> bool:
    """Whether the object already occupies its goal: every vertex lies near a goal-pose vertex."""
    d, _ = cKDTree(goal.transform_points(mesh.vertices)).query(pose.transform_points(mesh.vertices))
    return float(d.max()) < tolerance


def _standoff(tcp: Pose, distance: float) -> Pose:
    """*tcp* backed off along its approach axis."""
    return Pose(tcp.position - distance * tcp.rotation[:, 2], tcp.rotation)


def _raised(tcp: Pose, height: float) -> Pose:
    return Pose(tcp.position + np.array([0.0, 0.0, height]), tcp.rotation)


# ---------------------------------------------------------------- motion assembly
class MotionBuilder:
    """
    Appends segments to one continuous trajectory, keeping the checker each
    segment was planned against so the whole can be re-checked later.
    """
    def __init__(self, robot: RobotModel, table: TableModel, cfg: PlanningConfig, seed: int, start):
        self.robot      = robot
        self.table      = table
        self.cfg        = cfg
        self.seed       = seed
        self.trajectory = Trajectory()
        self.checkers: list[CollisionChecker] = []
        self.q = np.asarray(start, dtype=float)

    def checker(self, obstacles, opening: float | None = None, held: HeldObject | None = None) -> CollisionChecker:
        return CollisionChecker(self.robot, tuple(obstacles), self.table, self.cfg.contact_tolerance, held, opening)

    def solve(self, target: Pose, seed, checker: CollisionChecker) -> np.ndarray:
        q = solve_ik(self.robot, target, None if seed is None else [seed])
        if q is None or not checker.valid(q):
            raise NoPathError(f"no collision-free arm configuration at {np.round(target.position, 4).tolist()}")
        return q

    def _add(self, seg: Segment, checker: CollisionChecker, held: HeldObject | None) -> Segment:
        if held is not None:
            attach_poses(seg, self.robot, held)
        self.trajectory.segments.append(seg)
        self.checkers.append(checker)
        self.q = seg.waypoints[-1]
        logger.debug("[motion] %s segment: %d waypoint(s)", seg.type, len(seg.waypoints))
        return seg

    def move(self, kind: str, goal, checker: CollisionChecker, grasp_id: int | None = None,
             held: HeldObject | None = None) -> Segment:
        path = plan_motion(self.robot, self.q, goal, checker, self.cfg,
                           derive_seed(self.seed, f"{kind}/{len(self.checkers)}"))
        return self._add(Segment(kind, path, grasp_id), checker, held)

    def line(self, kind: str, end: Pose, checker: CollisionChecker, grasp_id: int | None = None,
             held: HeldObject | None = None) -> Segment:
        path = track_line(self.robot, self.q, end, checker, self.cfg)
        return self._add(Segment(kind, path, grasp_id), checker, held)


def realize_plan(builder: MotionBuilder, part: Part, plan: KeyframePlan, others: list[ConvexBody],
                 goal_resting: bool) -> None:
    """
    Turn a keyframe path into joint motion: reach the first grasp through its
    pre-grasp, then lift / transfer / place for every transfer and retreat /
    reach for every regrasp.  The hand still holds the object at the end.
    """
    cfg = builder.cfg
    kfs = plan.keyframes
    if not kfs:
        return

    def resting(k: Keyframe) -> bool:
        return k.layer != "bottom" or goal_resting

    def reach(k: Keyframe) -> None:
        free = builder.checker(others + [part.body(k.pose)], k.grasp.width)
        pre = _standoff(k.grasp.tcp, cfg.approach_distance)
        builder.move("transit", builder.solve(pre, k.config, free), free)
        builder.line("approach", k.grasp.tcp, free, k.grasp_id)

    reach(kfs[0])
    for a, b, kind in zip(kfs, kfs[1:], plan.segments):
        if kind == "transit":
            free = builder.checker(others + [part.body(a.pose)], a.grasp.width)
            builder.line("retreat", _standoff(a.grasp.tcp, cfg.approach_distance), free, a.grasp_id)
            reach(b)
            continue
        held = HeldObject.from_mesh(part.name, part.mesh, a.pose.inverse() @ a.grasp.tcp,
                                    seed=derive_seed(builder.seed, f"held/{part.name}"))
        carry = builder.checker(others, a.grasp.width, held)
        builder.line("lift", _raised(a.grasp.tcp, cfg.lift_height), carry, a.grasp_id, held)
        if resting(b):
            above = builder.solve(_raised(b.grasp.tcp, cfg.lift_height), b.config, carry)
            builder.move("transfer", above, carry, b.grasp_id, held)
            builder.line("place", b.grasp.tcp, carry, b.grasp_id, held)
        else:
            builder.move("transfer", builder.solve(b.grasp.tcp, b.config, carry), carry, b.grasp_id, held)


def node_screen(robot: RobotModel, table: TableModel, cfg: PlanningConfig, part: Part,
                others: list[ConvexBody], goal_resting: bool):
    """
    Graph-node veto: the whole arm must clear the scene at the grasp and, for
    a resting object, at the pre-grasp and lifted poses too.
    """
    def screen(layer: str, pose: Pose) -> Callable[[Grasp, np.ndarray], bool]:
        resting = layer != "bottom" or goal_resting
        scene = tuple(others) + ((part.body(pose),) if resting else ())
        base = CollisionChecker(robot, scene, table, cfg.contact_tolerance)

        def ok(grasp: Grasp, q: np.ndarray) -> bool:
            checker = replace(base, opening=grasp.width)
            if not checker.valid(q):
                return False
            if not resting:
                return True
            for target in (_standoff(grasp.tcp, cfg.approach_distance), _raised(grasp.tcp, cfg.lift_height)):
                q_t = solve_ik(robot, target, [q])
                if q_t is None or not checker.valid(q_t):
                    return False
            return True
        return ok
    return screen


# ---------------------------------------------------------------- stages
@PIPELINE.register("observe", inputs=["scene", "meshes", "seed"], outputs=["cloud"])
def observe(state: dict) -> dict:
    """Depth cloud of the scene from the configured camera; an empty view is a detection failure."""
    rng = np.random.default_rng(derive_seed(state["seed"], "observe"))
    scene: SceneConfig = state["scene"]
    cloud = render_scene(scene, state["meshes"], rng=rng)
    if not cloud.visible or len(cloud) == 0:
        eye = np.round(scene.camera.world_pose().position, 4).tolist()
        raise NoSegmentError(f"camera at {eye} sees nothing of the scene")
    return {"cloud": cloud}


@PIPELINE.register("detect", inputs=["cloud", "parts", "cfg"], outputs=["parts"])
def detect(state: dict, role: str) -> dict:
    """Stable placements, template matching with ICP, then placement correction."""
    cfg: AppConfig = state["cfg"]
    scene: SceneConfig = state["scene"]
    part: Part = state["parts"][role]
    part.placements = stable_placements(part.mesh, cfg.placement.margin_fraction, cfg.placement.cluster_angle_tol)
    library = build_template_library(part.mesh, cfg.perception)
    part.detection = detect_object(state["cloud"], part.mesh, library, scene.table, scene.camera.world_pose(),
                                   cfg.perception, derive_seed(state["seed"], f"detect/{part.name}"))
    part.pose = correct_pose(part.detection.raw_pose, part.placements, scene.table, cfg.placement.mode)
    logger.info("detected %s at %s (rmse %.2g m, %d outlier(s))", part.name,
                np.round(part.pose.position, 4).tolist(), part.detection.icp_rmse, part.detection.outlier_count)
    return {"parts": state["parts"]}


@PIPELINE.register("grasps", inputs=["parts", "robot", "cfg"], outputs=["parts"])
def grasps(state: dict, role: str) -> dict:
    """Free-space antipodal grasps in the object frame."""
    cfg: AppConfig = state["cfg"]
    part: Part = state["parts"][role]
    part.grasps = sample_antipodal_grasps(part.mesh, state["robot"].gripper, cfg.grasp,
                                          derive_seed(state["seed"], f"grasps/{part.name}"),
                                          cfg.placement.cluster_angle_tol)
    if not len(part.grasps):
        raise NoPathError(f"no antipodal grasp fits part {part.name}")
    return {"parts": state["parts"]}


@PIPELINE.register("assembly", inputs=["parts", "record", "robot", "goal_a"], outputs=["assembly", "world_grasps"])
def assembly(state: dict) -> dict:
    """Assembly relation, pre-assembly check and the world-frame goal grasp sets."""
    cfg: AppConfig = state["cfg"]
    a, b = state["parts"]["A"], state["parts"]["B"]
    spec = AssemblySpec.from_record(state["record"], state["goal_a"], cfg.planning.retraction_scale)
    check_assembled(a.mesh, b.mesh, spec, cfg.planning.contact_tolerance, seed=derive_seed(state["seed"], "assembly"))
    gA_a, gB_a = assembly_grasps(a.grasps, b.grasps, a.mesh, b.mesh, spec, state["robot"])
    gA_p, gB_p = retract_grasps(gA_a, gB_a, spec, state["robot"])
    world = world_grasps(gA_a, gA_p, gB_a, gB_p, spec)
    sets = {"A_assembled": len(gA_a), "B_assembled": len(gB_a), "A_pre": len(gA_p), "B_pre": len(gB_p),
            "A_goal": len(world.a_assembled), "B_goal": len(world.b_pre)}
    logger.info("assembly grasps: %s", sets)
    return {"assembly": spec, "world_grasps": world, "assembly_sets": sets}


def _step_setup(state: dict, role: str) -> tuple[Part, list[ConvexBody], Pose, GraspSet, bool]:
    """The moving part, its obstacles, goal pose, goal grasps and whether it rests at the goal."""
    part: Part = state["parts"][role]
    other: Part = state["parts"][_other(role)]
    spec: AssemblySpec = state["assembly"]
    world: WorldGrasps = state["world_grasps"]
    others = [other.body()]
    if role == "A":
        return part, others, spec.world_goal_a, world.a_assembled, True
    pre_b, _ = insertion_line(spec)
    return part, others, pre_b, world.b_pre, False


@PIPELINE.register("graph", inputs=["parts", "assembly", "world_grasps", "robot"], outputs=["graphs"])
def graph(state: dict, role: str) -> dict:
    """Three-layer grasp graph for one assembly step."""
    cfg: AppConfig = state["cfg"]
    scene: SceneConfig = state["scene"]
    robot: RobotModel = state["robot"]
    graphs = dict(state.get("graphs", {}))
    part, others, goal_pose, goal_set, goal_resting = _step_setup(state, role)
    if goal_resting and at_goal(part.mesh, part.pose, goal_pose, cfg.planning.goal_tolerance):
        logger.info("part %s already at its goal, step %s skipped", part.name, role)
        graphs[role] = None
        return {"graphs": graphs}

    gripper = robot.gripper
    g_init = collision_filter(transform_grasps(part.grasps, part.pose, "s'"), gripper, others, scene.table)
    g_goal = collision_filter(goal_set, gripper, others, scene.table)
    screen = node_screen(robot, scene.table, cfg.planning, part, others, goal_resting)
    graphs[role] = build_grasp_graph(g_init, part.placements, g_goal, part.grasps, scene.table, robot, gripper,
                                     cfg.planning, part.pose, goal_pose, others, screen)
    return {"graphs": graphs}


@PIPELINE.register("keyframes", inputs=["graphs"], outputs=["plans"])
def keyframes(state: dict, role: str) -> dict:
    """Cheapest keyframe path through the step's grasp graph."""
    plans = dict(state.get("plans", {}))
    g = state["graphs"][role]
    plans[role] = KeyframePlan() if g is None else search_keyframes(g)
    logger.info("step %s: %d keyframe(s), %d transfer(s)", role, len(plans[role].keyframes), plans[role].transfers)
    return {"plans": plans}


@PIPELINE.register("motion", inputs=["plans", "parts", "robot", "cfg"], outputs=["motion"])
def motion(state: dict, role: str) -> dict:
    """Joint motion for one step; part A is released at its goal."""
    cfg: AppConfig = state["cfg"]
    builder = state.get("motion")
    if builder is None:
        builder = MotionBuilder(state["robot"], state["scene"].table, cfg.planning,
                                derive_seed(state["seed"], "motion"), cfg.planning.home)
    part, others, goal_pose, _, goal_resting = _step_setup(state, role)
    plan: KeyframePlan = state["plans"][role]
    realize_plan(builder, part, plan, others, goal_resting)
    if role == "A":
        if plan.keyframes:
            last = plan.keyframes[-1]
            free = builder.checker(others + [part.body(last.pose)], last.grasp.width)
            builder.line("retreat", _standoff(last.grasp.tcp, cfg.planning.approach_distance), free, last.grasp_id)
        part.pose = goal_pose
    return {"motion": builder}


@PIPELINE.register("insert", inputs=["motion", "plans", "assembly", "parts"], outputs=["motion"])
def insert(state: dict) -> dict:
    """Straight insertion of B along the approach, release and return home."""
    cfg: AppConfig = state["cfg"]
    builder: MotionBuilder = state["motion"]
    a, b = state["parts"]["A"], state["parts"]["B"]
    plan: KeyframePlan = state["plans"]["B"]
    if not plan.keyframes:
        raise PlanningError("step B produced no keyframes to insert from")
    last = plan.keyframes[-1]
    _, final_b = insertion_line(state["assembly"])
    held = HeldObject.from_mesh(b.name, b.mesh, last.pose.inverse() @ last.grasp.tcp,
                                seed=derive_seed(builder.seed, f"held/{b.name}"))
    scene = [a.body()]
    tcp_end = final_b @ held.grasp
    builder.line("insert", tcp_end, builder.checker(scene, last.grasp.width, held), last.grasp_id, held)
    b.pose = final_b
    scene.append(b.body())
    builder.line("retreat", _standoff(tcp_end, cfg.planning.approach_distance),
                 builder.checker(scene, last.grasp.width), last.grasp_id)
    builder.move("transit", cfg.planning.home, builder.checker(scene))
    return {"motion": builder}


@PIPELINE.register("recheck", inputs=["motion", "cfg"], outputs=["recheck"])
def recheck_stage(state: dict) -> dict:
    """Fine-resolution collision re-check of the whole trajectory."""
    cfg: AppConfig = state["cfg"]
    builder: MotionBuilder = state["motion"]
    report = recheck(builder.trajectory, builder.checkers, cfg.planning.max_joint_step, cfg.planning.recheck_factor,
                     cfg.planning.recheck_tolerance)
    if not report.passed:
        raise PlanningError(f"trajectory fails the fine collision re-check at (segment, waypoint) "
                            f"{report.failures[:5]}")
    logger.info("re-check passed: %d configuration(s), min clearance %.4f m", report.checked, report.min_clearance)
    if report.min_clearance < 0.0:
        logger.warning("re-check accepted %.2f mm of penetration as contact (tolerance %.2f mm)",
                       -report.min_clearance * 1000, (report.tolerance or 0.0) * 1000)
    return {"recheck": report}


# ---------------------------------------------------------------- entry points
def assembly_flow() -> dict:
    return chain(("observe", "observe"),
                 ("detect-a", "detect", {"role": "A"}), ("detect-b", "detect", {"role": "B"}),
                 ("grasps-a", "grasps", {"role": "A"}), ("grasps-b", "grasps", {"role": "B"}),
                 ("assembly", "assembly"),
                 ("step-a/graph", "graph", {"role": "A"}), ("step-a/keyframes", "keyframes", {"role": "A"}),
                 ("step-a/motion", "motion", {"role": "A"}),
                 ("step-b/graph", "graph", {"role": "B"}), ("step-b/keyframes", "keyframes", {"role": "B"}),
                 ("step-b/motion", "motion", {"role": "B"}),
                 ("insert", "insert"),
                 ("recheck", "recheck"))


def initial_state(scene: SceneConfig, meshes: dict[str, TriMesh], robot: RobotModel, record: TeachingRecord,
                  cfg: AppConfig, seed: int | None = None) -> dict:
    if scene.assembly is None:
        raise SchemaError("scene has no assembly goal", "assembly")
    goal = scene.assembly
    if (record.object_a, record.object_b) != (goal.object_a, goal.object_b):
        raise SchemaError(f"teaching record pairs {record.object_a}/{record.object_b}, "
                          f"scene assembles {goal.object_a}/{goal.object_b}", "objectA")
    parts = {}
    for role, name in zip(ROLES, (goal.object_a, goal.object_b)):
        o = scene.object(name)
        parts[role] = Part(role, name, meshes[name], truth=o.pose.to_pose() if o.pose is not None else None)
    return {"scene": scene, "meshes": meshes, "robot": robot, "record": record, "cfg": cfg,
            "seed": cfg.seed if seed is None else seed, "parts": parts, "goal_a": goal.goal_pose_a.to_pose()}


def plan_assembly(scene: SceneConfig, meshes: dict[str, TriMesh], robot: RobotModel, record: TeachingRecord,
                  cfg: AppConfig, seed: int | None = None, pub=None) -> dict:
    """Run the whole flow; returns the final state."""
    state = initial_state(scene, meshes, robot, record, cfg, seed)
    return Executor(assembly_flow(), PIPELINE, state, pub).run()


def detection_entry(part: Part, table: TableModel, mode: str) -> dict:
    """Raw detection, corrected pose and, with ground truth, both pose errors."""
    corrected = correct_pose(part.detection.raw_pose, part.placements, table, mode)
    entry = {"name": part.name, **part.detection.to_dict(), "correctedPose": corrected.to_dict()}
    if part.truth is not None:
        entry["error"] = {kind: asdict(pose_row(part.name, est, part.truth, kind))
                          for kind, est in (("raw", part.detection.raw_pose), ("corrected", corrected))}
    return entry


def detect_scene(scene: SceneConfig, meshes: dict[str, TriMesh], names: list[str], cfg: AppConfig,
                 seed: int | None = None, pub=None) -> dict[str, dict]:
    """
    Observe the configured scene once and detect each of *names* in it; one
    :func:`detection_entry` per name.  Failures surface as :class:`StageError`
    labelled ``observe`` or ``detect/<name>``.
    """
    parts = {}
    for name in names:
        o = scene.object(name)
        parts[name] = Part(name, name, meshes[name], truth=o.pose.to_pose() if o.pose is not None else None)
    state = {"scene": scene, "meshes": meshes, "cfg": cfg, "parts": parts,
             "seed": cfg.seed if seed is None else seed}
    flow = chain(("observe", "observe"), *((f"detect/{n}", "detect", {"role": n}) for n in names))
    Executor(flow, PIPELINE, state, pub).run()
    return {n: detection_entry(parts[n], scene.table, cfg.placement.mode) for n in names}


def run_report(state: dict) -> dict:
    """Deterministic summary of a finished run (no timings)."""
    detections = {}
    for role in ROLES:
        part: Part = state["parts"][role]
        if part.detection is None:
            continue
        detections[role] = detection_entry(part, state["scene"].table, state["cfg"].placement.mode)

    plans = {}
    for role in ROLES:
        plan = state.get("plans", {}).get(role)
        g = state.get("graphs", {}).get(role)
        if plan is None:
            continue
        plans[role] = {"keyframes": len(plan.keyframes), "transfers": plan.transfers, "cost": plan.cost,
                       "graph": None if g is None else g.diagnostics()}

    report = {"seed": state["seed"], "detections": detections, "plans": plans}
    if "assembly" in state:
        spec: AssemblySpec = state["assembly"]
        report["assembly"] = {"retractionDistance": spec.retraction_distance,
                              "approach": spec.approach.tolist(), "sets": state.get("assembly_sets", {})}
    if "motion" in state:
        traj: Trajectory = state["motion"].trajectory
        kinds = sorted({s.type for s in traj.segments})
        report["trajectory"] = {"segments": len(traj.segments), "waypoints": traj.waypoint_count,
                                "byType": {k: traj.count(k) for k in kinds}}
    if "recheck" in state:
        report["recheck"] = state["recheck"].to_dict()
    report["finalPoses"] = {state["parts"][r].name: state["parts"][r].pose.to_dict()
                            for r in ROLES if state["parts"][r].pose is not None}
    return report


# ---------------------------------------------------------------- experiments
def detection_trials(scene: SceneConfig, meshes: dict[str, TriMesh], name: str, cfg: AppConfig,
                     seed: int = 0, yaw: float = 0.5,
                     modes: tuple[str, ...] = ("literal", "yaw-invariant")) -> PrecisionReport:
    """
    Detect *name* alone on the table in every stable placement at the centre
    of each table quarter; one raw row and one corrected row per mode.
    Raises :class:`StageError` (``trials/<name>``) when no trial yields a
    detection.
    """
    mesh = meshes[name]
    placements = stable_placements(mesh, cfg.placement.margin_fraction, cfg.placement.cluster_angle_tol)
    library = build_template_library(mesh, cfg.perception)
    camera = scene.camera.world_pose()
    report = PrecisionReport(f"detection precision: {name}")
    for pi, placement in enumerate(placements):
        for qi, truth in enumerate(quarter_poses(scene.table, placement, yaw)):
            label = f"p{pi}/q{qi + 1}"
            rng = np.random.default_rng(derive_seed(seed, f"trial/{name}/{label}"))
            cloud = render_scene(scene, meshes, {name: truth}, cfg.perception.noise_sigma, rng, include=[name])
            try:
                det = detect_object(cloud, mesh, library, scene.table, camera, cfg.perception,
                                    derive_seed(seed, f"detect/{name}/{label}"))
            except DetectionError as exc:
                logger.warning("trial %s: %s", label, exc)
                report.failures.append(label)
                continue
            report.add(pose_row(label, det.raw_pose, truth, "raw"))
            for mode in modes:
                report.add(pose_row(label, correct_pose(det.raw_pose, placements, scene.table, mode), truth, mode))
    if not report.rows:
        raise StageError(f"trials/{name}", NoSegmentError(
            f"no detection of {name} in any of {len(report.failures)} trial(s) from the scene camera"))
    return report


def simulate_teaching(scene: SceneConfig, meshes: dict[str, TriMesh], frames: int = 20, orientations: int = 5,
                      pixel_sigma: float = 0.5, marker_side: float = 0.04, seed: int = 0) -> TeachingRecord:
    """
    Teaching record from simulated marker observations of the scene's true
    assembly relation: *orientations* trials of *frames* frames each.
    """
    goal = scene.assembly
    if goal is None or goal.relative_pose is None:
        raise SchemaError("scene has no assembly.relativePose to teach from", "assembly.relativePose")
    rel = goal.relative_pose.to_pose()
    marker_a = top_marker(goal.object_a, float(meshes[goal.object_a].vertices[:, 2].max()), marker_side)
    marker_b = top_marker(goal.object_b, float(meshes[goal.object_b].vertices[:, 2].max()), marker_side)
    pairs = trial_poses(rel, orientations)
    poses_a = [pa for pa, _ in pairs for _ in range(frames)]
    poses_b = [pb for _, pb in pairs for _ in range(frames)]
    recording = simulate_recording(poses_a, poses_b, marker_a, marker_b, scene.camera.intrinsics, pixel_sigma,
                                   np.random.default_rng(derive_seed(seed, "teach")), goal.approach)
    return teach(recording)
