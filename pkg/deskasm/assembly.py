"""
Assembly relation between two parts: pre-assembly retraction along the
taught approach, the assembly-frame grasp sets and their world mapping.

All poses in this module are expressed in A's local frame (A at the origin
with identity rotation) until :func:`world_grasps` maps them through the
goal pose of A.
"""
import logging
from dataclasses import dataclass

import numpy as np

from deskasm.collision import ConvexBody, bodies_clearance
from deskasm.errors import AssemblyCollisionError, PreconditionError
from deskasm.grasp import GraspSet, IkSolver, collision_filter, ik_filter, transform_grasps
from deskasm.mesh import TriMesh, sample_surface
from deskasm.robot import GripperModel, RobotModel
from deskasm.se3 import Pose
from deskasm.teaching import TeachingRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AssemblySpec:
    relative_pose:    Pose            # B in A
    approach:         np.ndarray      # unit
    world_goal_a:     Pose
    retraction_scale: float = 0.5
    approach_length:  float = 1.0     # magnitude of the taught approach vector

    def __post_init__(self):
        v = np.asarray(self.approach, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise PreconditionError("approach vector must be unit length")
        if self.retraction_scale < 0.0 or self.approach_length <= 0.0:
            raise PreconditionError("retraction scale must be >= 0 and approach length > 0")
        object.__setattr__(self, "approach", v)

    @property
    def offset(self) -> np.ndarray:
        """Retraction of A along +v; B moves by the opposite vector."""
        return self.retraction_scale * self.approach_length * self.approach

    @property
    def retraction_distance(self) -> float:
        return float(np.linalg.norm(self.offset))

    @classmethod
    def from_record(cls, record: TeachingRecord, world_goal_a: Pose,
                    retraction_scale: float = 0.5) -> "AssemblySpec":
        length = 1.0
        if record.retraction_distance is not None:
            length = 2.0 * record.retraction_distance
        return cls(record.relative, record.approach_vector, world_goal_a, retraction_scale, length)


# ---------------------------------------------------------------- poses
def pre_assembly_poses(spec: AssemblySpec) -> tuple[Pose, Pose]:
    """A moved by +offset, B by -offset; rotations untouched."""
    rel = spec.relative_pose
    pose_a = Pose(spec.offset, np.eye(3))
    pose_b = Pose(rel.position - spec.offset, rel.rotation)
    return pose_a, pose_b


def check_assembled(mesh_a: TriMesh, mesh_b: TriMesh, spec: AssemblySpec,
                    tolerance: float = 1e-3, samples: int = 400, seed: int = 0) -> float:
    """
    Raise :class:`AssemblyCollisionError` when B at its assembled pose
    penetrates A deeper than *tolerance*; returns the clearance estimate.
    Surface contact is allowed.
    """
    body_a = ConvexBody.from_mesh(mesh_a, name="A")
    body_b = ConvexBody.from_mesh(mesh_b, spec.relative_pose, name="B")
    pts, _, _ = sample_surface(mesh_b, samples, np.random.default_rng(seed))
    d = bodies_clearance(body_b, body_a, spec.relative_pose.transform_points(pts))
    logger.debug("[assembly] assembled clearance %.6f", d)
    if d < -tolerance:
        raise AssemblyCollisionError(f"B penetrates A by {-d * 1000:.2f} mm at the assembled pose")
    return d


# ---------------------------------------------------------------- grasp sets
def assembly_grasps(gA_f: GraspSet, gB_f: GraspSet, mesh_a: TriMesh, mesh_b: TriMesh,
                    spec: AssemblySpec, robot: "RobotModel | IkSolver",
                    gripper: GripperModel | None = None) -> tuple[GraspSet, GraspSet]:
    """
    Grasps on each part at the assembled pose that clear the other part and
    are reachable with A at its world goal.  Sets stay in A's frame.
    """
    gripper = gripper or (robot.gripper if isinstance(robot, RobotModel) else GripperModel())
    ident = Pose.identity()
    ga = transform_grasps(gA_f, ident, "a'")
    ga = collision_filter(ga, gripper, [(mesh_b, spec.relative_pose)])
    ga = ik_filter(ga, robot, frame=spec.world_goal_a)
    gb = transform_grasps(gB_f, spec.relative_pose, "a'")
    gb = collision_filter(gb, gripper, [(mesh_a, ident)])
    gb = ik_filter(gb, robot, frame=spec.world_goal_a)
    logger.debug("[assembly] assembled grasps: A %d/%d, B %d/%d", len(ga), len(gA_f), len(gb), len(gB_f))
    return ga, gb


def retract_grasps(gA_a: GraspSet, gB_a: GraspSet, spec: AssemblySpec,
                   robot: "RobotModel | IkSolver") -> tuple[GraspSet, GraspSet]:
    """
    Shift the assembled grasps to the pre-assembly poses (A by +offset, B by
    -offset) and keep those reachable in the world.  Empty results are
    logged, the planner reports the failure.
    """
    for g in (gA_a, gB_a):
        if g.tag != "a":
            raise PreconditionError(f"retraction expects assembled grasps, got tag {g.tag!r}")
    off = spec.offset
    ga = ik_filter(transform_grasps(gA_a, Pose.from_translation(off), "p'"), robot, frame=spec.world_goal_a)
    gb = ik_filter(transform_grasps(gB_a, Pose.from_translation(-off), "p'"), robot, frame=spec.world_goal_a)
    for name, g in (("A", ga), ("B", gb)):
        if not len(g):
            logger.warning("no reachable pre-assembly grasp for part %s", name)
    return ga, gb


@dataclass
class WorldGrasps:
    a_assembled: GraspSet    # A at its goal, ids that also survive retraction
    b_assembled: GraspSet
    b_pre:       GraspSet


def world_grasps(gA_a: GraspSet, gA_p: GraspSet, gB_a: GraspSet, gB_p: GraspSet,
                 spec: AssemblySpec) -> WorldGrasps:
    """
    Map the assembly-frame sets through A's world goal pose.  A does not move
    between pre-assembly and assembly, so its world set is the assembled one
    restricted to ids that also have a pre-assembly grasp.
    """
    W = spec.world_goal_a
    a = transform_grasps(gA_a.restrict(gA_p.ids), W, "a(g)", gA_a.configs)
    b_a = transform_grasps(gB_a, W, "a(g)", gB_a.configs)
    b_p = transform_grasps(gB_p, W, "p(g)", gB_p.configs)
    return WorldGrasps(a, b_a, b_p)


def insertion_line(spec: AssemblySpec) -> tuple[Pose, Pose]:
    """World poses of B before and after the final insertion."""
    _, pre_b = pre_assembly_poses(spec)
    W = spec.world_goal_a
    return W @ pre_b, W @ spec.relative_pose

