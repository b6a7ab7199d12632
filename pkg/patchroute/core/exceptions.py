"""Typed errors raised by the library and translated to exit codes by the CLI."""

from typing import Any


class PatchRouteError(Exception):
    """Base class for every error the pipeline raises on purpose."""

    code = "PatchRouteError"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = details

    def to_dict(self) -> dict[str, Any]:
        """Machine-readable form used for stderr diagnostics and job records."""
        return {"code": self.code, "message": self.message, "details": self.details}


# ─── Geometry ────────────────────────────────────────────────────────────────


class DegenerateQuadError(PatchRouteError):
    """Raised when a quadrilateral has a collinear triple, tiny area or crossing edges."""

    code = "DegenerateQuad"


class SingularSystemError(PatchRouteError):
    """Raised when a linear system or matrix cannot be solved or inverted."""

    code = "SingularSystem"


class PointAtInfinityError(PatchRouteError):
    """Raised when a homography sends a point to the line at infinity."""

    code = "PointAtInfinity"


# ─── Layout and warping ──────────────────────────────────────────────────────


class MissingCoreJointsError(PatchRouteError):
    """Raised when the torso joints are too uncertain to anchor a layout."""

    code = "MissingCoreJoints"


class CanvasMismatchError(PatchRouteError):
    """Raised when rendered patches do not share one canvas."""

    code = "CanvasMismatch"


class NoCommonSlotsError(PatchRouteError):
    """Raised when source and target share no present patch slot."""

    code = "NoCommonSlots"


class InvalidPoseError(PatchRouteError):
    """Raised when a skeleton violates its coordinate or confidence ranges."""

    code = "InvalidPose"


# ─── Masks and features ──────────────────────────────────────────────────────


class UnknownLabelError(PatchRouteError):
    """Raised when a parsing label is missing from its label table."""

    code = "UnknownLabel"


class DimensionMismatchError(PatchRouteError):
    """Raised when images, masks or maps that must align have different sizes."""

    code = "DimensionMismatch"


class ShapeMismatchError(DimensionMismatchError):
    """Raised when feature and affine parameter maps differ in shape."""

    code = "ShapeMismatch"


class MaskPartitionError(PatchRouteError):
    """Raised when aligned/misaligned masks do not partition the garment mask."""

    code = "MaskPartition"


class EmptyAlignedRegionError(PatchRouteError):
    """Raised when misaligned pixels exist but no aligned pixel defines a mean."""

    code = "EmptyAlignedRegion"


class NoSkinPixelsError(PatchRouteError):
    """Raised when a parsing map has no skin-class pixel."""

    code = "NoSkinPixels"


class NoGarmentPixelsError(PatchRouteError):
    """Raised when a parsing map has no garment-class pixel."""

    code = "NoGarmentPixels"


# ─── Editing ─────────────────────────────────────────────────────────────────


class MissingLayerError(PatchRouteError):
    """Raised when a dressing-order edit needs both upper and lower layers."""

    code = "MissingLayer"


class SlotAbsentError(PatchRouteError):
    """Raised when an edit names a slot that is not present."""

    code = "SlotAbsent"


class CategoryMismatchError(PatchRouteError):
    """Raised when two patch sets that must match have different categories."""

    code = "CategoryMismatch"


# ─── Input / output ──────────────────────────────────────────────────────────


class MissingFileError(PatchRouteError):
    """Raised when a required input file does not exist."""

    code = "MissingFile"


class MalformedJsonError(PatchRouteError):
    """Raised when a JSON input cannot be decoded or fails its schema."""

    code = "MalformedJson"


class CorruptArchiveError(PatchRouteError):
    """Raised when a patch-set archive fails its manifest or digest checks."""

    code = "CorruptArchive"


class ArchiveIoError(PatchRouteError):
    """Raised when an artifact cannot be read or written."""

    code = "IoError"


class ConfigError(PatchRouteError):
    """Raised when the run configuration is invalid."""

    code = "ConfigError"
