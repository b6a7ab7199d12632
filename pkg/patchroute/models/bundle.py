"""Try-on bundles: upper and lower garment layers retargeted to one target pose."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

from patchroute.models.geometry import Homography
from patchroute.models.layout import PatchLayout, PatchSlot
from patchroute.models.patches import PatchSet, WarpedGarment
from patchroute.models.pose import PoseSkeleton


class DressingOrder(str, Enum):
    """Whether the upper garment is tucked into the lower one or worn over it."""

    TUCK_IN = "tuck_in"
    TUCK_OUT = "tuck_out"


class LayerName(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class GarmentLayer:
    """One garment of a bundle.

    `base` holds the patch set with local edits but without dressing-order
    clipping; `patches` and `warped` are what the active order produces.
    `homographies` overrides the corner DLT for refined slots.
    """

    base: PatchSet
    patches: PatchSet
    target_layout: PatchLayout
    warped: WarpedGarment
    homographies: Mapping[PatchSlot, Homography] = field(default_factory=dict)

    def with_base(self, base: PatchSet) -> "GarmentLayer":
        """New base set; refined homographies survive only for slots whose source patch is unchanged."""
        kept = {
            slot: h
            for slot, h in self.homographies.items()
            if slot in base.patches
            and slot in self.base.patches
            and base.patches[slot].h_source_to_norm == self.base.patches[slot].h_source_to_norm
            and base.patches[slot].source_quad == self.base.patches[slot].source_quad
        }
        return replace(self, base=base, patches=base, homographies=kept)


@dataclass(frozen=True)
class TryOnBundle:
    upper: Optional[GarmentLayer]
    lower: Optional[GarmentLayer]
    target_pose: PoseSkeleton
    dressing_order: Optional[DressingOrder] = None

    def __post_init__(self) -> None:
        if self.upper is None and self.lower is None:
            raise ValueError("A try-on bundle needs at least one garment layer")

    def layer(self, name: LayerName) -> Optional[GarmentLayer]:
        return self.upper if name is LayerName.UPPER else self.lower

    def with_layer(self, name: LayerName, layer: GarmentLayer) -> "TryOnBundle":
        if name is LayerName.UPPER:
            return replace(self, upper=layer)
        return replace(self, lower=layer)
