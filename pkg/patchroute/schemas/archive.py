"""Pydantic schemas for patch-set archive manifests."""

from typing import Literal

from pydantic import BaseModel, Field

from patchroute.models.layout import GarmentCategory, PatchSlot
from patchroute.schemas.person import PoseFile

FORMAT_VERSION = 1


class SlotEntry(BaseModel):
    """One patch: source quad, source → template homography and its PNG member."""

    quad: list[tuple[float, float]] = Field(..., min_length=4, max_length=4)
    homography: list[str] = Field(..., min_length=9, max_length=9, description="Row-major, 17 significant digits")
    file: str = Field(..., min_length=1)
    sha256: str = Field(..., pattern=r"^[0-9a-f]{64}$")

    model_config = {"extra": "forbid"}


class ArchiveManifest(BaseModel):
    """manifest.json of a patch-set archive."""

    format_version: Literal[1] = FORMAT_VERSION
    category: GarmentCategory
    source_pose: PoseFile
    slots: dict[PatchSlot, SlotEntry]

    model_config = {"extra": "forbid"}
