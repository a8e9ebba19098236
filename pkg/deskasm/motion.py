"""
Joint-space motion: the planner's collision checker, Transition-RRT with
shortcut smoothing, straight Cartesian segments by IK tracking, and the
trajectory container.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from deskasm.collision import ConvexBody, capsule_clearance, points_clearance
from deskasm.config import PlanningConfig
from deskasm.errors import MotionTimeoutError, NoPathError, PreconditionError
from deskasm.grasp import Grasp, gripper_capsules
from deskasm.mesh import TriMesh, sample_surface
from deskasm.placement import TableModel
from deskasm.robot import RobotModel, forward_kinematics, link_capsules, solve_ik, tool_pose
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

MOUNTED_LINKS = 2      # capsules fixed to the base, never tested against the table
LINE_POS_TOL = 1e-8
LINE_ROT_TOL = 1e-8


# ---------------------------------------------------------------- collision checking
@dataclass(frozen=True, eq=False)
class HeldObject:
    """An object in the hand: surface samples and hull in its own frame."""
    name:     str
    points:   np.ndarray
    body:     ConvexBody
    grasp:    Pose                    # tool centre point in the object frame

    @classmethod
    def from_mesh(cls, name: str, mesh: TriMesh, grasp: Pose, samples: int = 300,
                  seed: int = 0) -> "HeldObject":
        pts, _, _ = sample_surface(mesh, samples, np.random.default_rng(seed))
        body = ConvexBody.from_mesh(mesh, name=name)
        return cls(name, np.vstack([pts, body.vertices]), body, grasp)

    def pose_at(self, tcp: Pose) -> Pose:
        return tcp @ self.grasp.inverse()


@dataclass(frozen=True, eq=False)
class CollisionChecker:
    """
    Clearance of the arm, the open gripper and an optional held object against
    convex obstacles and the table top.  Penetration up to *tolerance* meters
    (1 mm by default) counts as contact and is allowed.
    """
    robot:     RobotModel
    obstacles: tuple = ()
    table:     TableModel | None = None
    tolerance: float = 1e-3
    held:      HeldObject | None = None
    opening:   float | None = None

    def holding(self, held: HeldObject | None, obstacles=None) -> "CollisionChecker":
        return replace(self, held=held, obstacles=self.obstacles if obstacles is None else tuple(obstacles))

    def clearance(self, q) -> float:
        k = forward_kinematics(self.robot, q)
        d = math.inf
        for i, (a, b, r) in enumerate(link_capsules(self.robot, q, k)):
            for body in self.obstacles:
                d = min(d, capsule_clearance(body, a, b, r))
            if self.table is not None and i >= MOUNTED_LINKS:
                d = min(d, min(a[2], b[2]) - self.table.height - r)

        tcp = k.tool
        width = self.opening if self.opening is not None else self.robot.gripper.max_opening
        half = 0.5 * width * tcp.rotation[:, 0]
        virtual = Grasp(tcp.position - half, tcp.position + half, tcp.rotation, -1)
        for a, b, r in gripper_capsules(virtual, self.robot.gripper):
            for body in self.obstacles:
                d = min(d, capsule_clearance(body, a, b, r))
            if self.table is not None:
                d = min(d, min(a[2], b[2]) - self.table.height - r)

        if self.held is not None:
            pose = self.held.pose_at(tcp)
            pts = pose.transform_points(self.held.points)
            inv = pose.inverse()
            for body in self.obstacles:
                d = min(d, points_clearance(body, pts))
                d = min(d, points_clearance(self.held.body, inv.transform_points(body.vertices)))
            if self.table is not None:
                d = min(d, float(pts[:, 2].min()) - self.table.height)
        return d

    def valid(self, q) -> bool:
        return self.robot.within_limits(np.asarray(q), 1e-9) and self.clearance(q) >= -self.tolerance


# ---------------------------------------------------------------- trajectory
@dataclass
class Segment:
    type:         str                       # transit | approach | retreat | lift | transfer | place | insert
    waypoints:    list[np.ndarray]
    grasp_id:     int | None = None
    object:       str | None = None
    object_poses: list[Pose] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"type": self.type, "graspId": self.grasp_id, "object": self.object,
                "waypoints": [[float(x) for x in q] for q in self.waypoints],
                "objectPoses": [[p.position.tolist(), p.rotation.reshape(-1).tolist()] for p in self.object_poses]}


@dataclass
class Trajectory:
    segments: list[Segment] = field(default_factory=list)

    def count(self, kind: str) -> int:
        return sum(1 for s in self.segments if s.type == kind)

    @property
    def waypoint_count(self) -> int:
        return sum(len(s.waypoints) for s in self.segments)

    def to_dict(self) -> dict:
        return {"segments": [s.to_dict() for s in self.segments]}


def attach_poses(segment: Segment, robot: RobotModel, held: HeldObject) -> Segment:
    """Fill the held object's pose at every waypoint from forward kinematics."""
    segment.object = held.name
    segment.object_poses = [held.pose_at(tool_pose(robot, q)) for q in segment.waypoints]
    return segment


# ---------------------------------------------------------------- interpolation
def _subdivisions(a: np.ndarray, b: np.ndarray, step: float) -> int:
    return max(1, int(math.ceil(float(np.max(np.abs(b - a))) / step - 1e-12)))


def interpolate(a: np.ndarray, b: np.ndarray, step: float) -> list[np.ndarray]:
    """Points after *a* up to and including *b*, no joint moving more than *step*."""
    n = _subdivisions(a, b, step)
    return [a + (b - a) * (k / n) for k in range(1, n + 1)]


def densify(path: list[np.ndarray], step: float) -> list[np.ndarray]:
    out = [np.array(path[0], dtype=float)]
    for a, b in zip(path, path[1:]):
        out.extend(interpolate(np.asarray(a, dtype=float), np.asarray(b, dtype=float), step))
    return out


def path_length(path: list[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(np.subtract(b, a)) for a, b in zip(path, path[1:])))


# ---------------------------------------------------------------- Transition-RRT
class _Edges:
    """Edge tests at the waypoint resolution, remembering the far-end clearance."""

    def __init__(self, checker: CollisionChecker, step: float):
        self.checker, self.step = checker, step
        self.tests = 0

    def clearance(self, a: np.ndarray, b: np.ndarray) -> float | None:
        d = math.inf
        for q in interpolate(a, b, self.step):
            self.tests += 1
            if not self.checker.robot.within_limits(q, 1e-9):
                return None
            d = self.checker.clearance(q)
            if d < -self.checker.tolerance:
                return None
        return d


def plan_motion(robot: RobotModel, start, goal, checker: CollisionChecker,
                cfg: PlanningConfig | None = None, seed: int = 0) -> list[np.ndarray]:
    """
    Transition-RRT in joint space.  The straight segment is tried first; the
    tree then grows under a Metropolis test on inverse clearance whose
    temperature rises after repeated refusals and falls after each accepted
    climb.  The path is shortcut and resampled to ``max_joint_step``.
    """
    cfg = cfg or PlanningConfig()
    start, goal = np.asarray(start, dtype=float), np.asarray(goal, dtype=float)
    lo, hi = robot.lower, robot.upper
    for name, q in (("start", start), ("goal", goal)):
        if not robot.within_limits(q, 1e-9):
            raise PreconditionError(f"{name} configuration violates joint limits")
    if np.allclose(start, goal, rtol=0.0, atol=1e-12):
        return [start.copy()]
    for name, q in (("start", start), ("goal", goal)):
        d = checker.clearance(q)
        if d < -checker.tolerance:
            raise NoPathError(f"{name} configuration in collision", {"clearance": d})

    step = cfg.max_joint_step
    edges = _Edges(checker, step)
    rng = np.random.default_rng(seed)

    if edges.clearance(start, goal) is not None:
        logger.debug("[motion] straight segment free (%d tests)", edges.tests)
        return densify([start, goal], step)

    def cost(d: float) -> float:
        return cfg.cost_weight / max(d, 1e-4)

    scale = 0.5 * (cost(checker.clearance(start)) + cost(checker.clearance(goal)))
    nodes = [start]
    parents = [-1]
    costs = [cost(checker.clearance(start))]
    temperature, failures = cfg.init_temperature, 0
    found = None

    for it in range(cfg.max_iter):
        target = goal if rng.random() < cfg.goal_bias else rng.uniform(lo, hi)
        arr = np.asarray(nodes)
        near = int(np.argmin(np.linalg.norm(arr - target, axis=1)))
        delta = target - arr[near]
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            continue
        q_new = arr[near] + delta * min(1.0, cfg.extend_step / dist)
        d = edges.clearance(arr[near], q_new)
        if d is None:
            continue
        c_new = cost(d)
        if c_new > costs[near]:
            p = math.exp(-(c_new - costs[near]) / (scale * temperature))
            if rng.random() >= p:
                failures += 1
                if failures > cfg.max_failures:
                    temperature *= cfg.temperature_factor
                    failures = 0
                continue
            temperature /= cfg.temperature_factor
            failures = 0
        nodes.append(q_new)
        parents.append(near)
        costs.append(c_new)
        if np.linalg.norm(goal - q_new) <= cfg.extend_step and edges.clearance(q_new, goal) is not None:
            found = len(nodes) - 1
            break
    if found is None:
        raise MotionTimeoutError(f"no path after {cfg.max_iter} extensions ({len(nodes)} tree node(s))")

    path, i = [goal], found
    while i >= 0:
        path.append(nodes[i])
        i = parents[i]
    path.reverse()
    logger.debug("[motion] tree reached goal after %d iteration(s), %d node(s)", it + 1, len(nodes))
    return densify(shortcut(path, edges, cfg.smoothing_iterations, rng), step)


def shortcut(path: list[np.ndarray], edges: _Edges, iterations: int,
             rng: np.random.Generator) -> list[np.ndarray]:
    path = list(path)
    for _ in range(iterations):
        if len(path) <= 2:
            break
        i, j = sorted(rng.choice(len(path), 2, replace=False))
        if j - i <= 1:
            continue
        if edges.clearance(path[i], path[j]) is not None:
            path = path[:i + 1] + path[j:]
    return path


# ---------------------------------------------------------------- Cartesian lines
def track_line(robot: RobotModel, q0, end: Pose, checker: CollisionChecker,
               cfg: PlanningConfig | None = None, max_depth: int = 10) -> list[np.ndarray]:
    """
    Move the tool centre point in a straight line from its pose at *q0* to
    the position of *end*, orientation fixed.  Every waypoint is an IK
    solution on the line, bisected until no joint moves more than
    ``max_joint_step`` between neighbours.
    """
    cfg = cfg or PlanningConfig()
    q0 = np.asarray(q0, dtype=float)
    start = tool_pose(robot, q0)
    p0, p1, R = start.position, np.asarray(end.position, dtype=float), start.rotation
    step = cfg.max_joint_step

    def solve(s: float, seed: np.ndarray) -> np.ndarray:
        target = Pose(p0 + s * (p1 - p0), R)
        q = solve_ik(robot, target, [seed], pos_tol=LINE_POS_TOL, rot_tol=LINE_ROT_TOL)
        if q is None:
            raise NoPathError(f"straight move leaves the workspace at {np.round(target.position, 4).tolist()}")
        if not checker.valid(q):
            raise NoPathError(f"straight move collides at {np.round(target.position, 4).tolist()}",
                              {"clearance": checker.clearance(q)})
        return q

    def fill(sa: float, qa: np.ndarray, sb: float, qb: np.ndarray, depth: int) -> list[np.ndarray]:
        if float(np.max(np.abs(qb - qa))) <= step:
            return [qb]
        if depth >= max_depth:
            raise NoPathError("straight move needs a joint flip")
        sm = 0.5 * (sa + sb)
        qm = solve(sm, qa)
        return fill(sa, qa, sm, qm, depth + 1) + fill(sm, qm, sb, qb, depth + 1)

    out, s_prev, q_prev = [q0], 0.0, q0
    for k in range(1, cfg.insert_steps + 1):
        s = k / cfg.insert_steps
        q = solve(s, q_prev)
        out.extend(fill(s_prev, q_prev, s, q, 0))
        s_prev, q_prev = s, q
    return out


# ---------------------------------------------------------------- verification
@dataclass
class RecheckReport:
    checked:       int
    min_clearance: float
    failures:      list[tuple[int, int]]        # (segment index, waypoint index)
    tolerance:     float | None = None          # largest penetration accepted as contact

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"checked": self.checked,
                "minClearance": None if math.isinf(self.min_clearance) else self.min_clearance,
                "passed": self.passed, "tolerance": self.tolerance,
                "failures": [list(f) for f in self.failures]}


def recheck(trajectory: Trajectory, checkers: list[CollisionChecker], step: float,
            factor: int = 4, tolerance: float | None = None) -> RecheckReport:
    """
    Re-test every segment at ``step / factor`` with its own checker; also
    flags joint jumps larger than *step*.  *tolerance* overrides the allowed
    penetration of every checker (``0.0`` accepts touching only).
    """
    fine = step / factor
    checked, lowest, failures = 0, math.inf, []
    for si, (seg, checker) in enumerate(zip(trajectory.segments, checkers)):
        allowed = checker.tolerance if tolerance is None else tolerance
        pts = seg.waypoints
        for wi, (a, b) in enumerate(zip(pts, pts[1:])):
            if float(np.max(np.abs(b - a))) > step + 1e-9:
                failures.append((si, wi + 1))
            for q in interpolate(a, b, fine):
                checked += 1
                d = checker.clearance(q)
                lowest = min(lowest, d)
                if d < -allowed or not checker.robot.within_limits(q, 1e-9):
                    failures.append((si, wi + 1))
                    break
        if len(pts) == 1:
            checked += 1
            d = checker.clearance(pts[0])
            lowest = min(lowest, d)
            if d < -allowed:
                failures.append((si, 0))
    if tolerance is None:
        tolerance = max((c.tolerance for c in checkers), default=None)
    return RecheckReport(checked, float(lowest), failures, tolerance)
