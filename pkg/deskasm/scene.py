"""
Scene files: objects with their meshes and ground-truth poses, the table,
the depth camera, the robot and the assembly goal.  Relative paths resolve
against the scene file's directory.
"""
import json
import logging
import os

import numpy as np
from pydantic import Field, ValidationError, model_validator

from deskasm.camera import CameraIntrinsics, look_at
from deskasm.cloud import PointCloud
from deskasm.config import validation_error
from deskasm.errors import SchemaError
from deskasm.mesh import TriMesh, load_mesh, merge_meshes, quad
from deskasm.placement import StablePlacement, TableModel
from deskasm.render import render_world
from deskasm.schemas import PoseModel, Schema
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

SCENE_VERSION = 1


class CameraConfig(Schema):
    intrinsics: CameraIntrinsics
    pose:   PoseModel | None = None
    eye:    list[float] | None = Field(None, min_length=3, max_length=3)
    target: list[float] | None = Field(None, min_length=3, max_length=3)

    @model_validator(mode="after")
    def _placement(self):
        if (self.pose is None) == (self.eye is None or self.target is None):
            raise ValueError("camera needs either 'pose' or both 'eye' and 'target'")
        return self

    def world_pose(self) -> Pose:
        return self.pose.to_pose() if self.pose is not None else look_at(self.eye, self.target)


class SceneObject(Schema):
    name:  str
    mesh:  str
    scale: float = Field(1.0, gt=0.0)
    pose:  PoseModel | None = None          # ground truth, when known


class AssemblyGoal(Schema):
    object_a:      str = Field(alias="objectA")
    object_b:      str = Field(alias="objectB")
    goal_pose_a:   PoseModel = Field(alias="goalPoseA")
    # the true assembly relation, used to simulate teaching recordings
    relative_pose: PoseModel | None = Field(None, alias="relativePose")
    approach:      list[float] | None = Field(None, min_length=3, max_length=3)


class SceneConfig(Schema):
    version:     int = SCENE_VERSION
    seed:        int = 0
    table:       TableModel
    camera:      CameraConfig
    robot:       str | None = None
    noise_sigma: float = Field(0.0, ge=0.0, alias="noiseSigma")
    objects:     list[SceneObject] = Field(min_length=1)
    assembly:    AssemblyGoal | None = None

    @model_validator(mode="after")
    def _names(self):
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise ValueError("object names must be unique")
        if self.assembly is not None:
            for key in (self.assembly.object_a, self.assembly.object_b):
                if key not in names:
                    raise ValueError(f"assembly refers to unknown object '{key}'")
        return self

    def object(self, name: str) -> SceneObject:
        for o in self.objects:
            if o.name == name:
                return o
        raise SchemaError(f"scene has no object '{name}'", "objects")


def load_scene(path: str) -> SceneConfig:
    """Parse and validate a scene file; every referenced file must exist."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as exc:
        raise SchemaError(f"scene {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scene {path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict) and raw.get("version", SCENE_VERSION) != SCENE_VERSION:
        raise SchemaError(f"scene {path}: version {raw['version']} unsupported", "version")
    try:
        scene = SceneConfig.model_validate(raw)
    except ValidationError as exc:
        raise validation_error(exc, f"scene {path}") from exc

    base = os.path.dirname(os.path.abspath(path))
    objects = []
    for i, o in enumerate(scene.objects):
        mesh = o.mesh if os.path.isabs(o.mesh) else os.path.join(base, o.mesh)
        if not os.path.exists(mesh):
            raise SchemaError(f"scene {path}: mesh file {o.mesh} not found", f"objects.{i}.mesh")
        objects.append(o.model_copy(update={"mesh": mesh}))
    robot = scene.robot
    if robot is not None:
        robot = robot if os.path.isabs(robot) else os.path.join(base, robot)
        if not os.path.exists(robot):
            raise SchemaError(f"scene {path}: robot file {scene.robot} not found", "robot")
    logger.debug("[scene] loaded %s: %d object(s)", path, len(objects))
    return scene.model_copy(update={"objects": objects, "robot": robot})


def load_meshes(scene: SceneConfig) -> dict[str, TriMesh]:
    return {o.name: load_mesh(o.mesh, o.scale) for o in scene.objects}


def table_mesh(table: TableModel) -> TriMesh:
    xmin, xmax, ymin, ymax = table.bounds
    return quad(xmax - xmin, ymax - ymin, (0.5 * (xmin + xmax), 0.5 * (ymin + ymax), table.height))


def render_scene(scene: SceneConfig, meshes: dict[str, TriMesh], poses: dict[str, Pose] | None = None,
                 noise_sigma: float | None = None, rng: np.random.Generator | None = None,
                 include: list[str] | None = None) -> PointCloud:
    """
    World-frame depth cloud of the table and every object (or only those in
    *include*).  *poses* overrides the scene's ground-truth poses; objects
    without any pose are left out.
    """
    parts = [table_mesh(scene.table)]
    for o in scene.objects:
        if include is not None and o.name not in include:
            continue
        pose = (poses or {}).get(o.name) or (o.pose.to_pose() if o.pose is not None else None)
        if pose is not None:
            parts.append(meshes[o.name].transformed(pose))
    sigma = scene.noise_sigma if noise_sigma is None else noise_sigma
    return render_world(merge_meshes(parts), scene.camera.world_pose(), scene.camera.intrinsics, sigma, rng)


# ---------------------------------------------------------------- experiment grids
def quarter_centres(table: TableModel) -> list[tuple[float, float]]:
    """Centres of the four table quarters, in (-x -y, +x -y, -x +y, +x +y) order."""
    xmin, xmax, ymin, ymax = table.bounds
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    hx, hy = 0.25 * (xmax - xmin), 0.25 * (ymax - ymin)
    return [(cx - hx, cy - hy), (cx + hx, cy - hy), (cx - hx, cy + hy), (cx + hx, cy + hy)]


def quarter_poses(table: TableModel, placement: StablePlacement, yaw: float = 0.0) -> list[Pose]:
    """The object resting in *placement* at the centre of each table quarter."""
    return [placement.pose_on(table, x, y, yaw) for x, y in quarter_centres(table)]
