"""A person sample: image, skeleton and parsing that describe the same canvas."""

from dataclasses import dataclass

import numpy as np

from patchroute.core.exceptions import DimensionMismatchError
from patchroute.models.parsing import ParsingMap
from patchroute.models.pose import PoseSkeleton


@dataclass(frozen=True, eq=False)
class PersonRecord:
    """Image (H×W×3 uint8), pose and parsing of one person."""

    id: str
    image: np.ndarray
    pose: PoseSkeleton
    parsing: ParsingMap

    def __post_init__(self) -> None:
        height, width = self.image.shape[:2]
        if self.parsing.size != (width, height):
            raise DimensionMismatchError(
                "Parsing and image sizes differ",
                image=[width, height],
                parsing=list(self.parsing.size),
            )
        if self.pose.canvas_size != (width, height):
            raise DimensionMismatchError(
                "Pose canvas and image sizes differ",
                image=[width, height],
                pose=list(self.pose.canvas_size),
            )

    @property
    def canvas(self) -> tuple[int, int]:
        """(width, height)."""
        return int(self.image.shape[1]), int(self.image.shape[0])
