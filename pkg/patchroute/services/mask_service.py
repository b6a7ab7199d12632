"""Garment and misalignment masks, feature inpainting, modulation and auxiliary inputs."""

import logging

import numpy as np

from patchroute.core.exceptions import (
    DimensionMismatchError,
    EmptyAlignedRegionError,
    MaskPartitionError,
    NoSkinPixelsError,
    ShapeMismatchError,
    UnknownLabelError,
)
from patchroute.models.features import FeatureMap
from patchroute.models.layout import GarmentCategory
from patchroute.models.parsing import PROTECTED_CLASSES, SKIN_CLASSES, ParsingMap, SemanticClass
from patchroute.models.patches import WarpedGarment

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5

GARMENT_CLASSES: dict[GarmentCategory, SemanticClass] = {
    GarmentCategory.UPPER: SemanticClass.UPPER_GARMENT,
    GarmentCategory.LOWER: SemanticClass.LOWER_GARMENT,
    GarmentCategory.DRESS: SemanticClass.DRESS,
}


def _require_same_size(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatchError(
            f"{name_a} and {name_b} sizes differ",
            **{name_a: list(a.shape[:2]), name_b: list(b.shape[:2])},
        )


# ─── Mask Algebra ────────────────────────────────────────────────────────────


def garment_mask(parsing: ParsingMap, category: GarmentCategory) -> np.ndarray:
    """
    Pixels whose semantic class is the category's garment class.

    Raises:
        UnknownLabelError: the label table has no label for that class
    """
    cls = GARMENT_CLASSES[category]
    if cls not in set(parsing.label_table.values()):
        raise UnknownLabelError("Label table has no label for the garment class", garment_class=cls.value)
    return parsing.class_mask({cls})


def misalignment_masks(m_g: np.ndarray, m_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Split the garment mask into the part covered by the warp and the rest.

    Returns:
        Tuple of (m_align = m_g ∧ m_t, m_misalign = m_g ∧ ¬m_align)
    """
    m_g, m_t = np.asarray(m_g, dtype=bool), np.asarray(m_t, dtype=bool)
    _require_same_size("garment_mask", m_g, "warp_mask", m_t)
    m_align = m_g & m_t
    return m_align, m_g & ~m_align


def mask_out_of_garment(g_t: WarpedGarment, m_g: np.ndarray) -> WarpedGarment:
    """Remove the part of the warped garment that falls outside the garment mask."""
    m_g = np.asarray(m_g, dtype=bool)
    _require_same_size("warped_garment", g_t.image, "garment_mask", m_g)
    return WarpedGarment(np.where(m_g[..., None], g_t.image, 0).astype(np.uint8))


# ─── Feature Inpainting and Modulation ───────────────────────────────────────


def inpaint_features(
    f: FeatureMap,
    m_g: np.ndarray,
    m_align: np.ndarray,
    m_misalign: np.ndarray,
) -> FeatureMap:
    """
    Fill misaligned pixels with the per-channel mean over aligned pixels.

    Values outside `m_g` are zeroed first; aligned values are kept as they are.

    Raises:
        DimensionMismatchError: mask sizes differ from the feature map's H×W
        MaskPartitionError: m_align and m_misalign do not partition m_g
        EmptyAlignedRegionError: misaligned pixels exist but none are aligned
    """
    _, height, width = f.shape
    masks = [np.asarray(m, dtype=bool) for m in (m_g, m_align, m_misalign)]
    for name, m in zip(("garment_mask", "align_mask", "misalign_mask"), masks):
        if m.shape != (height, width):
            raise DimensionMismatchError(
                f"{name} does not match the feature map", mask=list(m.shape), features=[height, width]
            )
    m_g, m_align, m_misalign = masks
    if np.any(m_align & m_misalign) or not np.array_equal(m_align | m_misalign, m_g):
        raise MaskPartitionError("Aligned and misaligned masks must partition the garment mask")

    values = f.values.astype(np.float64)
    zeroed = np.where(m_g, values, 0.0)
    if not m_misalign.any():
        return FeatureMap(zeroed.astype(f.values.dtype))
    if not m_align.any():
        raise EmptyAlignedRegionError("No aligned pixel to average over", misaligned_px=int(m_misalign.sum()))
    means = values[:, m_align].mean(axis=1)
    out = np.where(m_misalign, means[:, None, None], zeroed)
    return FeatureMap(out.astype(f.values.dtype))


def spatially_adaptive_modulate(
    h: FeatureMap,
    gamma: FeatureMap,
    beta: FeatureMap,
    eps: float = DEFAULT_EPS,
) -> FeatureMap:
    """
    Standardize every channel over H×W, then apply per-pixel scale and shift.

    out = gamma · (h − μ) / (σ + eps) + beta, with σ the population standard
    deviation; statistics are computed in float64 and the result keeps the
    dtype of `h`.

    Raises:
        ShapeMismatchError: the three maps differ in shape
    """
    if not (h.shape == gamma.shape == beta.shape):
        raise ShapeMismatchError(
            "Feature and modulation maps differ in shape",
            features=list(h.shape),
            gamma=list(gamma.shape),
            beta=list(beta.shape),
        )
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = h.values.astype(np.float64)
    mu = x.mean(axis=(1, 2), keepdims=True)
    sigma = x.std(axis=(1, 2), keepdims=True)
    out = gamma.values.astype(np.float64) * (x - mu) / (sigma + eps) + beta.values.astype(np.float64)
    return FeatureMap(out.astype(h.values.dtype))


# ─── Auxiliary Inputs ────────────────────────────────────────────────────────


def median_skin_color(image: np.ndarray, parsing: ParsingMap) -> np.ndarray:
    """
    Canvas-size RGB image filled with the per-channel lower median of skin pixels.

    A 2-D grayscale image gives a gray fill.

    Raises:
        DimensionMismatchError: image and parsing sizes differ
        NoSkinPixelsError: no arm, leg or face pixel
    """
    image = np.atleast_3d(np.asarray(image))
    _require_same_size("image", image, "parsing", parsing.labels)
    skin = parsing.class_mask(SKIN_CLASSES)
    if not skin.any():
        raise NoSkinPixelsError("Parsing has no skin pixel")
    samples = image[..., :3][skin]
    k = (len(samples) - 1) // 2
    median = np.partition(samples, k, axis=0)[k]
    return np.broadcast_to(median.astype(np.uint8), (*image.shape[:2], 3)).copy()


def preserved_region(image: np.ndarray, parsing: ParsingMap) -> np.ndarray:
    """The image restricted to head, hand and foot pixels; zero elsewhere."""
    image = np.asarray(image)
    _require_same_size("image", image, "parsing", parsing.labels)
    keep = parsing.class_mask(PROTECTED_CLASSES)
    if image.ndim == 3:
        keep = keep[..., None]
    return np.where(keep, image, 0).astype(image.dtype)
