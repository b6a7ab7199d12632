"""Garment categories, patch slots and pose-guided patch layouts."""

from dataclasses import dataclass, field
from enum import Enum

from patchroute.models.geometry import Quadrilateral


class GarmentCategory(str, Enum):
    """Which patch set represents a garment."""

    UPPER = "upper"
    LOWER = "lower"
    DRESS = "dress"


class PatchSlot(str, Enum):
    """Named patch positions on the body."""

    NECK = "neck"
    TORSO = "torso"
    LEFT_UPPER_ARM = "left_upper_arm"
    LEFT_LOWER_ARM = "left_lower_arm"
    RIGHT_UPPER_ARM = "right_upper_arm"
    RIGHT_LOWER_ARM = "right_lower_arm"
    LEFT_UPPER_LEG = "left_upper_leg"
    LEFT_LOWER_LEG = "left_lower_leg"
    RIGHT_UPPER_LEG = "right_upper_leg"
    RIGHT_LOWER_LEG = "right_lower_leg"


UPPER_SLOTS: tuple[PatchSlot, ...] = tuple(PatchSlot)

LOWER_SLOTS: tuple[PatchSlot, ...] = (
    PatchSlot.TORSO,
    PatchSlot.LEFT_UPPER_LEG,
    PatchSlot.LEFT_LOWER_LEG,
    PatchSlot.RIGHT_UPPER_LEG,
    PatchSlot.RIGHT_LOWER_LEG,
)

# Painter's order for stitching: later slots overwrite earlier ones.
DEFAULT_Z_ORDER: tuple[PatchSlot, ...] = (
    PatchSlot.TORSO,
    PatchSlot.LEFT_UPPER_LEG,
    PatchSlot.RIGHT_UPPER_LEG,
    PatchSlot.LEFT_LOWER_LEG,
    PatchSlot.RIGHT_LOWER_LEG,
    PatchSlot.LEFT_UPPER_ARM,
    PatchSlot.RIGHT_UPPER_ARM,
    PatchSlot.LEFT_LOWER_ARM,
    PatchSlot.RIGHT_LOWER_ARM,
    PatchSlot.NECK,
)


def slots_for(category: GarmentCategory) -> tuple[PatchSlot, ...]:
    """Slot set of a category: ten for upper garments and dresses, five for lower ones."""
    return LOWER_SLOTS if category is GarmentCategory.LOWER else UPPER_SLOTS


@dataclass(frozen=True)
class PatchLayout:
    """Source or target quadrilaterals for each slot of a category."""

    category: GarmentCategory
    quads: dict[PatchSlot, Quadrilateral] = field(default_factory=dict)
    present: dict[PatchSlot, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        allowed = set(slots_for(self.category))
        foreign = (set(self.quads) | set(self.present)) - allowed
        if foreign:
            names = sorted(slot.value for slot in foreign)
            raise ValueError(f"Slots {names} do not belong to category '{self.category.value}'")
        missing = [slot for slot, ok in self.present.items() if ok and slot not in self.quads]
        if missing:
            raise ValueError(f"Present slots without a quad: {[s.value for s in missing]}")

    @property
    def present_slots(self) -> tuple[PatchSlot, ...]:
        """Present slots in canonical slot order."""
        return tuple(s for s in slots_for(self.category) if self.present.get(s, False))


class InferredCategory(str, Enum):
    """What a parsing map says a person is wearing."""

    UPPER = "upper"
    LOWER = "lower"
    DRESS = "dress"
    UPPER_AND_LOWER = "upper_and_lower"

    @property
    def garment_category(self) -> GarmentCategory:
        """Patch-set category to decompose; an upper + lower outfit is decomposed as its upper garment."""
        if self is InferredCategory.UPPER_AND_LOWER:
            return GarmentCategory.UPPER
        return GarmentCategory(self.value)
