"""Pydantic schemas for edit scripts."""

from enum import Enum
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter

from patchroute.models.bundle import DressingOrder, LayerName
from patchroute.models.layout import PatchSlot


class TrimEnd(str, Enum):
    """End of the patch that a trim keeps."""

    PROXIMAL = "proximal"
    DISTAL = "distal"


# ─── Commands ────────────────────────────────────────────────────────────────


class SetDressingOrder(BaseModel):
    op: Literal["set_dressing_order"] = "set_dressing_order"
    order: DressingOrder

    model_config = {"extra": "forbid", "frozen": True}


class TrimPatch(BaseModel):
    """Keep `fraction` of the patch's template rows, counted from `keep_from`."""

    op: Literal["trim_patch"] = "trim_patch"
    slot: PatchSlot
    fraction: float = Field(..., ge=0, le=1)
    keep_from: TrimEnd = TrimEnd.PROXIMAL
    layer: Optional[LayerName] = Field(default=None, description="Defaults to the first layer holding the slot")

    model_config = {"extra": "forbid", "frozen": True}


class DropPatch(BaseModel):
    op: Literal["drop_patch"] = "drop_patch"
    slot: PatchSlot
    layer: Optional[LayerName] = None

    model_config = {"extra": "forbid", "frozen": True}


class ReplacePatch(BaseModel):
    """Take the slot's patch from a donor archive, referenced by path or name."""

    op: Literal["replace_patch"] = "replace_patch"
    slot: PatchSlot
    donor: str = Field(..., min_length=1)
    layer: Optional[LayerName] = None

    model_config = {"extra": "forbid", "frozen": True}


EditCommand = Annotated[
    Union[SetDressingOrder, TrimPatch, DropPatch, ReplacePatch],
    Field(discriminator="op"),
]

ShapeEdit = Union[TrimPatch, DropPatch]

EditScript = list[EditCommand]

edit_script_adapter: TypeAdapter[EditScript] = TypeAdapter(EditScript)
