"""
Pydantic pieces shared by the JSON file formats (scenes, teaching records,
plans).
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from deskasm.se3 import Pose, is_rotation


class Schema(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class PoseModel(Schema):
    t: list[float] = Field(min_length=3, max_length=3)
    R: list[float] = Field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                           min_length=9, max_length=9)

    @field_validator("R")
    @classmethod
    def _rotation(cls, v):
        if not is_rotation(np.array(v).reshape(3, 3), tol=1e-6):
            raise ValueError("R is not a rotation matrix")
        return v

    def to_pose(self) -> Pose:
        return Pose.from_dict({"t": self.t, "R": self.R})

    @classmethod
    def of(cls, pose: Pose) -> "PoseModel":
        return cls(**pose.to_dict())
