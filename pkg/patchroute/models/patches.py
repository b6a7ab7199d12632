"""Normalized garment patches, patch sets and stitched warped garments."""

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from patchroute.models.geometry import Homography, Quadrilateral
from patchroute.models.layout import GarmentCategory, PatchSlot, slots_for
from patchroute.models.pose import PoseSkeleton

TEMPLATE_SIZE = 128


def _frozen(array: np.ndarray, dtype: type) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NormalizedPatch:
    """A garment region resampled onto the 128×128 template.

    The alpha channel is the validity mask: valid pixels carry alpha 255, invalid
    pixels are all-zero RGBA.
    """

    slot: PatchSlot
    image: np.ndarray
    source_quad: Quadrilateral
    h_source_to_norm: Homography

    def __post_init__(self) -> None:
        image = _frozen(self.image, np.uint8)
        if image.shape != (TEMPLATE_SIZE, TEMPLATE_SIZE, 4):
            raise ValueError(f"Patch image must be {TEMPLATE_SIZE}x{TEMPLATE_SIZE} RGBA, got {image.shape}")
        valid = image[..., 3] > 0
        if np.any(image[~valid]) or np.any(image[valid, 3] != 255):
            raise ValueError("Patch pixels must be fully opaque when valid and all-zero otherwise")
        object.__setattr__(self, "image", image)

    @property
    def valid_mask(self) -> np.ndarray:
        return self.image[..., 3] > 0

    def with_valid_mask(self, valid: np.ndarray) -> "NormalizedPatch":
        """Restrict validity to `valid`; pixels leaving the mask are zeroed."""
        keep = np.asarray(valid, dtype=bool) & self.valid_mask
        image = np.where(keep[..., None], self.image, 0).astype(np.uint8)
        return replace(self, image=image)

    def same_as(self, other: "NormalizedPatch") -> bool:
        """Bit-exact equality of pixels, quad and homography."""
        return (
            self.slot is other.slot
            and np.array_equal(self.image, other.image)
            and self.source_quad == other.source_quad
            and self.h_source_to_norm == other.h_source_to_norm
        )


@dataclass(frozen=True, eq=False)
class PatchSet:
    """Normalized patches of one garment, keyed by slot, with the pose they came from."""

    category: GarmentCategory
    patches: Mapping[PatchSlot, NormalizedPatch]
    source_pose: PoseSkeleton

    def __post_init__(self) -> None:
        allowed = slots_for(self.category)
        foreign = [slot for slot in self.patches if slot not in allowed]
        if foreign:
            raise ValueError(
                f"Slots {[s.value for s in foreign]} do not belong to category '{self.category.value}'"
            )
        for slot, patch in self.patches.items():
            if patch.slot is not slot:
                raise ValueError(f"Patch stored under '{slot.value}' is labelled '{patch.slot.value}'")
        ordered = {slot: self.patches[slot] for slot in allowed if slot in self.patches}
        object.__setattr__(self, "patches", ordered)

    @property
    def present_slots(self) -> tuple[PatchSlot, ...]:
        return tuple(self.patches)

    def with_patch(self, patch: NormalizedPatch) -> "PatchSet":
        return replace(self, patches={**self.patches, patch.slot: patch})

    def without(self, slot: PatchSlot) -> "PatchSet":
        return replace(self, patches={s: p for s, p in self.patches.items() if s is not slot})

    def restricted_to(self, slots: tuple[PatchSlot, ...] | set[PatchSlot]) -> "PatchSet":
        return replace(self, patches={s: p for s, p in self.patches.items() if s in slots})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatchSet):
            return NotImplemented
        return (
            self.category is other.category
            and self.source_pose == other.source_pose
            and self.present_slots == other.present_slots
            and all(self.patches[s].same_as(other.patches[s]) for s in self.patches)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class WarpedGarment:
    """Stitched target-pose garment G_t (RGBA) and its occupancy mask M_t."""

    image: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        image = _frozen(self.image, np.uint8)
        if image.ndim != 3 or image.shape[2] != 4:
            raise ValueError(f"Warped garment must be H×W×4, got {image.shape}")
        mask = image[..., 3] > 0 if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != image.shape[:2]:
            raise ValueError("Warped garment mask and image sizes differ")
        if not np.array_equal(mask, image[..., 3] > 0):
            raise ValueError("Warped garment mask must equal its alpha coverage")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "mask", _frozen(mask, bool))

    @classmethod
    def empty(cls, canvas: tuple[int, int]) -> "WarpedGarment":
        width, height = canvas
        return cls(np.zeros((height, width, 4), dtype=np.uint8))

    @property
    def canvas(self) -> tuple[int, int]:
        """(width, height)."""
        return int(self.image.shape[1]), int(self.image.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WarpedGarment):
            return NotImplemented
        return bool(np.array_equal(self.image, other.image))

    __hash__ = None  # type: ignore[assignment]
