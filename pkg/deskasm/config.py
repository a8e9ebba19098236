import hashlib
import json
import logging
import os
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from deskasm.errors import SchemaError

logger = logging.getLogger(__name__)

PROFILE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "profiles")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlacementConfig(_Section):
    margin_fraction:   float = Field(0.1, ge=0.0, lt=1.0)
    cluster_angle_tol: float = Field(0.05, gt=0.0)
    mode: Literal["yaw-invariant", "literal"] = "yaw-invariant"


class PerceptionConfig(_Section):
    ransac_iterations:     int   = Field(500, gt=0)
    plane_dist_tol:        float = Field(0.003, gt=0.0)
    min_plane_inlier_ratio: float = Field(0.2, ge=0.0, le=1.0)
    link_distance:         float = Field(0.012, gt=0.0)
    min_cluster_size:      int   = Field(30, ge=1)
    top_k:                 int   = Field(3, ge=1)
    icp_max_iter:          int   = Field(60, ge=1)
    icp_tol:               float = Field(1e-7, ge=0.0)
    icp_cap_factor:        float = Field(5.0, gt=0.0)
    model_samples:         int   = Field(3000, ge=10)
    noise_sigma:           float = Field(0.002, ge=0.0)
    template_size:         int   = Field(96, ge=16)
    template_focal:        float = Field(150.0, gt=0.0)
    template_distance_factor: float = Field(4.0, gt=1.0)
    workers:               int   = Field(1, ge=1)


class GraspConfig(_Section):
    pairs_per_face:     int   = Field(50, ge=1)
    friction_angle_deg: float = Field(10.0, gt=0.0, lt=90.0)
    approach_samples:   int   = Field(12, ge=1)
    max_grasps:         int | None = Field(None, ge=1)


class PlanningConfig(_Section):
    yaw_samples:          int   = Field(36, ge=1)
    transfer_cost:        float = Field(1.0, gt=0.0)
    transit_cost:         float = Field(1.0, gt=0.0)
    retraction_scale:     float = Field(0.5, ge=0.0)
    cost_weight:          float = Field(1.0, gt=0.0)
    max_iter:             int   = Field(20000, ge=1)
    max_joint_step:       float = Field(0.02, gt=0.0)
    extend_step:          float = Field(0.3, gt=0.0)
    goal_bias:            float = Field(0.1, ge=0.0, le=1.0)
    init_temperature:     float = Field(1e-3, gt=0.0)
    temperature_factor:   float = Field(2.0, gt=1.0)
    max_failures:         int   = Field(20, ge=1)
    smoothing_iterations: int   = Field(80, ge=0)
    contact_tolerance:    float = Field(1e-3, ge=0.0)    # penetration depth accepted as contact (m)
    insert_steps:         int   = Field(20, ge=1)
    approach_distance:    float = Field(0.05, ge=0.0)    # pre-grasp stand-off along the approach axis
    lift_height:          float = Field(0.05, ge=0.0)
    goal_tolerance:       float = Field(0.003, gt=0.0)   # "already at goal" vertex distance
    recheck_factor:       int   = Field(4, ge=1)
    recheck_tolerance:    float | None = Field(None, ge=0.0)   # None keeps contact_tolerance
    workers:              int   = Field(1, ge=1)
    home: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                              min_length=6, max_length=6)


class AppConfig(_Section):
    seed: int = 0
    placement:  PlacementConfig  = Field(default_factory=PlacementConfig)
    perception: PerceptionConfig = Field(default_factory=PerceptionConfig)
    grasp:      GraspConfig      = Field(default_factory=GraspConfig)
    planning:   PlanningConfig   = Field(default_factory=PlanningConfig)


def validation_error(exc: ValidationError, what: str) -> SchemaError:
    """Turn a pydantic error into a SchemaError naming the first offending key."""
    first = exc.errors()[0]
    key = ".".join(str(p) for p in first["loc"])
    if first["type"] == "missing":
        return SchemaError(f"{what}: missing required key '{key}'", key)
    return SchemaError(f"{what}: invalid value for '{key}': {first['msg']}", key)


def load_profile(name_or_path: str | None = None) -> AppConfig:
    """
    Load a configuration profile.  *name_or_path* is either a file path or the
    name of a JSON file under ``profiles/``; ``None`` gives the defaults.
    """
    if name_or_path is None:
        return AppConfig()
    path = name_or_path
    if not os.path.exists(path):
        path = os.path.join(PROFILE_DIR, f"{name_or_path}.json")
    if not os.path.exists(path):
        raise SchemaError(f"profile '{name_or_path}' not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"profile {path}: invalid JSON ({exc})") from exc
    try:
        cfg = AppConfig.model_validate(raw)
    except ValidationError as exc:
        raise validation_error(exc, f"profile {path}") from exc
    logger.debug("[config] loaded profile %s", path)
    return cfg


def derive_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage sub-seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")
