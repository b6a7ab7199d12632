"""Pydantic schemas for person inputs: pose JSON, label tables and person manifests."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from patchroute.models.parsing import SemanticClass
from patchroute.models.pose import NUM_JOINTS, PoseSkeleton


class PoseFile(BaseModel):
    """pose.json: canvas (width, height) and 18 joints as [x, y, confidence]."""

    canvas: tuple[int, int]
    joints: list[tuple[float, float, float]] = Field(..., min_length=NUM_JOINTS, max_length=NUM_JOINTS)

    model_config = {"extra": "forbid"}

    @field_validator("canvas")
    @classmethod
    def validate_canvas(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("Canvas dimensions must be positive")
        return v

    def to_skeleton(self) -> PoseSkeleton:
        arr = np.array(self.joints, dtype=np.float64)
        return PoseSkeleton(arr[:, :2], arr[:, 2], self.canvas)

    @classmethod
    def from_skeleton(cls, pose: PoseSkeleton) -> "PoseFile":
        joints = [
            (float(x), float(y), float(c)) for (x, y), c in zip(pose.coords.tolist(), pose.confidence.tolist())
        ]
        return cls(canvas=pose.canvas_size, joints=joints)


class LabelTableFile(BaseModel):
    """labels.json: parsing label → semantic class."""

    labels: dict[int, SemanticClass] = Field(..., min_length=1)

    model_config = {"extra": "forbid"}

    @field_validator("labels")
    @classmethod
    def validate_labels(cls, v: dict[int, SemanticClass]) -> dict[int, SemanticClass]:
        if any(not 0 <= label <= 255 for label in v):
            raise ValueError("Labels must fit in an 8-bit parsing map")
        return v


class PersonManifest(BaseModel):
    """Person manifest JSON; paths are relative to the manifest's directory."""

    id: Optional[str] = None
    image: str = "image.png"
    pose: str = "pose.json"
    parsing: str = "parsing.png"
    labels: Optional[str] = Field(default=None, description="Label table JSON; the default table when omitted")

    model_config = {"extra": "forbid"}
