"""Human parsing maps and the semantic classes their labels resolve to."""

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from patchroute.core.exceptions import UnknownLabelError


class SemanticClass(str, Enum):
    """Dataset-independent meaning of a parsing label."""

    BACKGROUND = "background"
    HAIR = "hair"
    FACE = "face"
    HEADWEAR = "headwear"
    UPPER_GARMENT = "upper_garment"
    LOWER_GARMENT = "lower_garment"
    DRESS = "dress"
    ACCESSORY = "accessory"
    ARMS = "arms"
    LEGS = "legs"
    HANDS = "hands"
    FEET = "feet"


# 20-class LIP-style labels.
DEFAULT_LABEL_TABLE: dict[int, SemanticClass] = {
    0: SemanticClass.BACKGROUND,
    1: SemanticClass.HEADWEAR,  # hat
    2: SemanticClass.HAIR,
    3: SemanticClass.HANDS,  # glove
    4: SemanticClass.HEADWEAR,  # sunglasses
    5: SemanticClass.UPPER_GARMENT,  # upper-clothes
    6: SemanticClass.DRESS,
    7: SemanticClass.UPPER_GARMENT,  # coat
    8: SemanticClass.FEET,  # socks
    9: SemanticClass.LOWER_GARMENT,  # pants
    10: SemanticClass.DRESS,  # jumpsuits
    11: SemanticClass.ACCESSORY,  # scarf
    12: SemanticClass.LOWER_GARMENT,  # skirt
    13: SemanticClass.FACE,
    14: SemanticClass.ARMS,  # left arm
    15: SemanticClass.ARMS,  # right arm
    16: SemanticClass.LEGS,  # left leg
    17: SemanticClass.LEGS,  # right leg
    18: SemanticClass.FEET,  # left shoe
    19: SemanticClass.FEET,  # right shoe
}

SKIN_CLASSES = frozenset({SemanticClass.ARMS, SemanticClass.LEGS, SemanticClass.FACE})

PROTECTED_CLASSES = frozenset(
    {
        SemanticClass.HAIR,
        SemanticClass.FACE,
        SemanticClass.HEADWEAR,
        SemanticClass.HANDS,
        SemanticClass.FEET,
    }
)


@dataclass(frozen=True, eq=False)
class ParsingMap:
    """Per-pixel labels (H×W uint8) and the table resolving them to semantic classes."""

    labels: np.ndarray
    label_table: Mapping[int, SemanticClass]

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"Parsing labels must be 2-D, got shape {labels.shape}")
        labels = labels.astype(np.uint8, copy=False)
        unknown = sorted(set(np.unique(labels).tolist()) - set(self.label_table))
        if unknown:
            raise UnknownLabelError("Parsing contains labels missing from the label table", labels=unknown)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "label_table", dict(self.label_table))

    @property
    def size(self) -> tuple[int, int]:
        """(width, height)."""
        return int(self.labels.shape[1]), int(self.labels.shape[0])

    def class_mask(self, classes: frozenset[SemanticClass] | set[SemanticClass]) -> np.ndarray:
        """Boolean H×W mask of pixels whose label resolves to any of the classes."""
        ids = [label for label, cls in self.label_table.items() if cls in classes]
        return np.isin(self.labels, np.array(ids, dtype=np.uint8))
