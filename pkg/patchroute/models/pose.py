"""Body skeleton in COCO-18 (OpenPose) joint order."""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from patchroute.core.exceptions import InvalidPoseError
from patchroute.models.geometry import Point2

OUT_OF_FRAME_TOLERANCE = 0.25


class Joint(IntEnum):
    """COCO-18 joint indices."""

    NOSE = 0
    NECK = 1
    R_SHOULDER = 2
    R_ELBOW = 3
    R_WRIST = 4
    L_SHOULDER = 5
    L_ELBOW = 6
    L_WRIST = 7
    R_HIP = 8
    R_KNEE = 9
    R_ANKLE = 10
    L_HIP = 11
    L_KNEE = 12
    L_ANKLE = 13
    R_EYE = 14
    L_EYE = 15
    R_EAR = 16
    L_EAR = 17


NUM_JOINTS = len(Joint)


@dataclass(frozen=True, eq=False)
class PoseSkeleton:
    """18 joints with confidences on a (width, height) canvas."""

    coords: np.ndarray
    confidence: np.ndarray
    canvas_size: tuple[int, int]

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        conf = np.asarray(self.confidence, dtype=np.float64)
        if coords.shape != (NUM_JOINTS, 2) or conf.shape != (NUM_JOINTS,):
            raise InvalidPoseError(
                f"Skeleton needs {NUM_JOINTS} joints",
                coords_shape=list(coords.shape),
                confidence_shape=list(conf.shape),
            )
        width, height = self.canvas_size
        if width <= 0 or height <= 0:
            raise InvalidPoseError("Canvas size must be positive", canvas=[width, height])
        if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(conf))):
            raise InvalidPoseError("Joint values must be finite")
        if np.any(conf < 0.0) or np.any(conf > 1.0):
            raise InvalidPoseError("Joint confidences must lie in [0, 1]")
        dims = np.array([width, height], dtype=np.float64)
        low, high = -OUT_OF_FRAME_TOLERANCE * dims, (1.0 + OUT_OF_FRAME_TOLERANCE) * dims
        outside = np.any((coords < low) | (coords > high), axis=1)
        if np.any(outside):
            raise InvalidPoseError(
                "Joints lie too far outside the canvas",
                joints=[Joint(i).name.lower() for i in np.flatnonzero(outside)],
            )
        coords.setflags(write=False)
        conf.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "canvas_size", (int(width), int(height)))

    def point(self, joint: Joint) -> Point2:
        x, y = self.coords[joint]
        return Point2(float(x), float(y))

    def confident(self, *joints: Joint, threshold: float) -> bool:
        """True when every listed joint meets the confidence threshold."""
        return all(self.confidence[j] >= threshold for j in joints)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoseSkeleton):
            return NotImplemented
        return (
            self.canvas_size == other.canvas_size
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.confidence, other.confidence)
        )

    __hash__ = None  # type: ignore[assignment]
