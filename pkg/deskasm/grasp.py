"""
Parallel-jaw grasps: antipodal sampling on the object mesh, rigid transforms
of grasp sets between frames, and the IK / collision filters.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from deskasm.collision import ConvexBody, capsule_clearance
from deskasm.config import GraspConfig
from deskasm.errors import NonWatertightError, PreconditionError
from deskasm.mesh import TriMesh, cluster_faces, intersect_rays, sample_surface
from deskasm.placement import TableModel
from deskasm.robot import GripperModel, RobotModel, solve_ik
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

# free -> surface / assembly, assembly -> pre-assembly / world, ...
TRANSITIONS = {
    "f":  {"s'", "a'"},
    "s":  {"s(g)"},
    "a":  {"p'", "a(g)"},
    "p":  {"p(g)"},
}
FILTERED = {"s'": "s", "a'": "a", "p'": "p"}


@dataclass(frozen=True, eq=False)
class Grasp:
    p0: np.ndarray
    p1: np.ndarray
    R:  np.ndarray          # x: closing axis, z: approach
    id: int

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    @property
    def tcp(self) -> Pose:
        """Tool centre point: midway between the contacts, palm orientation."""
        return Pose(0.5 * (self.p0 + self.p1), self.R)

    def transformed(self, pose: Pose) -> "Grasp":
        return Grasp(pose.transform_point(self.p0), pose.transform_point(self.p1), pose.rotation @ self.R, self.id)

    def to_dict(self, tag: str) -> dict:
        return {"id": self.id, "p0": self.p0.tolist(), "p1": self.p1.tolist(),
                "R": self.R.reshape(-1).tolist(), "tag": tag}


@dataclass(eq=False)
class GraspSet:
    grasps:  list[Grasp]
    tag:     str = "f"
    configs: dict[int, np.ndarray] = field(default_factory=dict)   # id -> joint solution

    def __post_init__(self):
        ids = [g.id for g in self.grasps]
        if len(set(ids)) != len(ids):
            raise PreconditionError("grasp ids must be unique")

    def __len__(self) -> int:
        return len(self.grasps)

    def __iter__(self):
        return iter(self.grasps)

    @property
    def ids(self) -> list[int]:
        return [g.id for g in self.grasps]

    def by_id(self) -> dict[int, Grasp]:
        return {g.id: g for g in self.grasps}

    def restrict(self, ids, tag: str | None = None) -> "GraspSet":
        keep = set(ids)
        return GraspSet([g for g in self.grasps if g.id in keep], tag or self.tag,
                        {i: q for i, q in self.configs.items() if i in keep})

    def to_json(self) -> list[dict]:
        return [g.to_dict(self.tag) for g in self.grasps]


# ---------------------------------------------------------------- gripper geometry
def gripper_capsules(grasp: Grasp, gripper: GripperModel) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Two fingers beside the contacts and the palm behind them, in the grasp's frame."""
    R, c = grasp.R, 0.5 * (grasp.p0 + grasp.p1)
    x, z = R[:, 0], R[:, 2]
    rf, rp = gripper.finger_radius, gripper.palm_radius
    fx = 0.5 * grasp.width + gripper.contact_gap + rf
    tip, root = 0.0, -gripper.finger_length + rf
    caps = [(c + s * fx * x + tip * z, c + s * fx * x + root * z, rf) for s in (-1.0, 1.0)]
    half = 0.5 * gripper.max_opening + gripper.contact_gap + 2 * rf
    palm_z = -gripper.finger_length - rp
    caps.append((c - half * x + palm_z * z, c + half * x + palm_z * z, rp))
    return caps


def gripper_clearance(grasp: Grasp, gripper: GripperModel, obstacles: list[ConvexBody],
                      table: TableModel | None = None) -> float:
    caps = gripper_capsules(grasp, gripper)
    d = math.inf
    for p, q, r in caps:
        for body in obstacles:
            d = min(d, capsule_clearance(body, p, q, r))
        if table is not None:
            d = min(d, min(p[2], q[2]) - table.height - r)
    return d


# ---------------------------------------------------------------- sampling
def _perpendicular(axis: np.ndarray) -> np.ndarray:
    e = np.eye(3)[int(np.argmin(np.abs(axis)))]
    u = np.cross(axis, e)
    return u / np.linalg.norm(u)


def palm_rotations(axis: np.ndarray, n: int) -> list[np.ndarray]:
    """*n* palm orientations evenly spaced about the closing *axis*."""
    u0 = _perpendicular(axis)
    w0 = np.cross(axis, u0)
    out = []
    for k in range(n):
        th = 2.0 * math.pi * k / n
        z = math.cos(th) * u0 + math.sin(th) * w0
        out.append(np.column_stack([axis, np.cross(z, axis), z]))
    return out


def sample_antipodal_grasps(mesh: TriMesh, gripper: GripperModel | None = None,
                            cfg: GraspConfig | None = None, seed: int = 0,
                            angle_tol: float = 0.05) -> GraspSet:
    """
    For every face cluster of *mesh*, shoot rays inward from area-sampled
    points; keep contact pairs whose exit normal lies within the friction
    angle of the contact axis and which fit the opening, then fan palm
    orientations about each axis and drop those touching the object.
    """
    gripper = gripper or GripperModel()
    cfg = cfg or GraspConfig()
    if not mesh.watertight:
        raise NonWatertightError("grasp sampling needs a watertight mesh")
    rng = np.random.default_rng(seed)
    cos_fa = math.cos(math.radians(cfg.friction_angle_deg))
    body = ConvexBody.from_mesh(mesh)

    origins, normals = [], []
    for cluster in cluster_faces(mesh, angle_tol):
        pts, nrm, _ = sample_surface(mesh, cfg.pairs_per_face, rng, cluster.triangles)
        origins.append(pts)
        normals.append(nrm)
    origins, normals = np.vstack(origins), np.vstack(normals)
    t, tri = intersect_rays(mesh, origins, -normals, t_min=1e-7)

    grasps, next_id = [], 0
    exit_normals = mesh.face_normals
    for p0, n0, ti, fi in zip(origins, normals, t, tri):
        if fi < 0:
            continue
        p1 = p0 - ti * n0
        width = float(np.linalg.norm(p1 - p0))
        if width <= 1e-9 or width > gripper.max_opening:
            continue
        axis = (p1 - p0) / width
        if float(-n0 @ axis) < cos_fa or float(exit_normals[fi] @ axis) < cos_fa:
            continue
        for R in palm_rotations(axis, cfg.approach_samples):
            g = Grasp(p0.copy(), p1.copy(), R, next_id)
            if gripper_clearance(g, gripper, [body]) > 0.0:
                grasps.append(g)
                next_id += 1

    if cfg.max_grasps is not None and len(grasps) > cfg.max_grasps:
        pick = np.linspace(0, len(grasps) - 1, cfg.max_grasps).round().astype(int)
        grasps = [Grasp(grasps[i].p0, grasps[i].p1, grasps[i].R, k) for k, i in enumerate(pick)]
    logger.debug("[grasp] %d antipodal grasp(s) from %d contact sample(s)", len(grasps), len(origins))
    return GraspSet(grasps, "f")


# ---------------------------------------------------------------- transforms / filters
def transform_grasps(g: GraspSet, pose: Pose, tag: str | None = None,
                     configs: dict[int, np.ndarray] | None = None) -> GraspSet:
    """
    Rigidly move every grasp; ids are kept.  Joint solutions belong to the old
    frame and are dropped unless *configs* (already solved for the new frame)
    is passed.
    """
    if tag is not None and tag != g.tag and tag not in TRANSITIONS.get(g.tag, set()):
        raise PreconditionError(f"grasp set tagged {g.tag!r} cannot become {tag!r}")
    ids = set(g.ids)
    kept = {i: q for i, q in (configs or {}).items() if i in ids}
    return GraspSet([x.transformed(pose) for x in g.grasps], tag or g.tag, kept)


IkSolver = Callable[[Pose, list | None], "np.ndarray | None"]


def ik_solver(ik: "RobotModel | IkSolver") -> IkSolver:
    """Wrap a robot model as ``solver(target, seeds)``; callables pass through."""
    if isinstance(ik, RobotModel):
        return lambda target, seeds=None: solve_ik(ik, target, seeds)
    return ik


def ik_filter(g: GraspSet, robot: "RobotModel | IkSolver", seeds: dict[int, np.ndarray] | None = None,
              frame: Pose | None = None) -> GraspSet:
    """
    Keep grasps whose tool pose has an IK solution; solutions are stored on the
    set.  With *frame*, the targets are ``frame @ tcp`` (grasps kept in a local
    frame, solved in the world).
    """
    solve = ik_solver(robot)
    kept, configs = [], {}
    for x in g.grasps:
        warm = [seeds[x.id]] if seeds and x.id in seeds else None
        q = g.configs.get(x.id)
        if q is None:
            q = solve(x.tcp if frame is None else frame @ x.tcp, warm)
        if q is not None:
            kept.append(x)
            configs[x.id] = q
    return GraspSet(kept, FILTERED.get(g.tag, g.tag), configs)


def _bodies(obstacles) -> list[ConvexBody]:
    return [o if isinstance(o, ConvexBody) else ConvexBody.from_mesh(o[0], o[1]) for o in obstacles or []]


def collision_filter(g: GraspSet, gripper: GripperModel, obstacles=None,
                     table: TableModel | None = None) -> GraspSet:
    """
    Keep grasps whose gripper capsules clear the table half-space and every
    obstacle, given as :class:`ConvexBody` or ``(mesh, pose)`` pairs.
    """
    bodies = _bodies(obstacles)
    kept = [x for x in g.grasps if gripper_clearance(x, gripper, bodies, table) > 0.0]
    ids = {x.id for x in kept}
    return GraspSet(kept, FILTERED.get(g.tag, g.tag), {i: q for i, q in g.configs.items() if i in ids})


def label_grasps(g: GraspSet, robot: RobotModel, obstacles=None,
                 table: TableModel | None = None) -> dict[str, list[int]]:
    """
    Three-way labelling: ``collided`` when the gripper touches the scene,
    otherwise ``ik_infeasible`` or ``feasible``.
    """
    bodies = _bodies(obstacles)
    labels = {"feasible": [], "ik_infeasible": [], "collided": []}
    for x in g.grasps:
        if gripper_clearance(x, robot.gripper, bodies, table) <= 0.0:
            labels["collided"].append(x.id)
        elif solve_ik(robot, x.tcp) is None:
            labels["ik_infeasible"].append(x.id)
        else:
            labels["feasible"].append(x.id)
    return labels
