"""Patch normalization, retargeting, stitching and random erasing."""

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFilter

from patchroute.core.config import EraseParams, LayoutParams, LmOptions
from patchroute.core.exceptions import (
    CanvasMismatchError,
    DimensionMismatchError,
    NoCommonSlotsError,
    PointAtInfinityError,
)
from patchroute.models.geometry import Homography, Point2, Quadrilateral, to_points
from patchroute.models.layout import DEFAULT_Z_ORDER, GarmentCategory, PatchLayout, PatchSlot
from patchroute.models.parsing import ParsingMap
from patchroute.models.patches import TEMPLATE_SIZE, NormalizedPatch, PatchSet, WarpedGarment
from patchroute.models.pose import PoseSkeleton
from patchroute.services import geometry_service, layout_service, mask_service

logger = logging.getLogger(__name__)

_LAST = float(TEMPLATE_SIZE - 1)
TEMPLATE_CORNERS: tuple[Point2, ...] = to_points([(0.0, 0.0), (_LAST, 0.0), (_LAST, _LAST), (0.0, _LAST)])

BOUNDS_TOLERANCE = 1e-6
MIN_VALID_WEIGHT = 0.5


# ─── Resampling ──────────────────────────────────────────────────────────────


def _bilinear_cells(xy: np.ndarray, width: int, height: int) -> tuple[np.ndarray, ...]:
    """Bilinear cell of every sample point: in-bounds flag, corner indices and fractions."""
    x, y = xy[:, 0], xy[:, 1]
    finite = np.isfinite(x) & np.isfinite(y)
    x = np.where(finite, x, -1.0)
    y = np.where(finite, y, -1.0)
    inside = (
        finite
        & (x >= -BOUNDS_TOLERANCE)
        & (x <= width - 1 + BOUNDS_TOLERANCE)
        & (y >= -BOUNDS_TOLERANCE)
        & (y <= height - 1 + BOUNDS_TOLERANCE)
    )
    xc = np.clip(x, 0.0, width - 1)
    yc = np.clip(y, 0.0, height - 1)
    x0 = np.clip(np.floor(xc).astype(np.int64), 0, max(width - 2, 0))
    y0 = np.clip(np.floor(yc).astype(np.int64), 0, max(height - 2, 0))
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    return inside, x0, y0, x1, y1, xc - x0, yc - y0


def bilinear_sample(rgb: np.ndarray, valid: np.ndarray, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Validity-weighted bilinear sampling at (N, 2) source positions.

    A sample is valid when it lies inside the image and the bilinear weight
    carried by valid neighbours is at least one half; its colour is the
    weighted average of those neighbours.

    Returns:
        Tuple of (N×3 uint8 colours, N boolean validity); invalid colours are 0.
    """
    height, width = valid.shape
    inside, x0, y0, x1, y1, fx, fy = _bilinear_cells(xy, width, height)
    m = valid.astype(np.float64)
    rgb = rgb.astype(np.float64)
    acc = np.zeros((len(xy), 3))
    weight = np.zeros(len(xy))
    for yy, xx, w in (
        (y0, x0, (1 - fx) * (1 - fy)),
        (y0, x1, fx * (1 - fy)),
        (y1, x0, (1 - fx) * fy),
        (y1, x1, fx * fy),
    ):
        wm = w * m[yy, xx]
        weight += wm
        acc += wm[:, None] * rgb[yy, xx]
    ok = inside & (weight >= MIN_VALID_WEIGHT)
    colours = np.zeros((len(xy), 3), dtype=np.uint8)
    colours[ok] = np.clip(np.rint(acc[ok] / weight[ok, None]), 0, 255).astype(np.uint8)
    return colours, ok


def sample_footprint(h_target_to_norm: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """
    Template pixels read by bilinear sampling for the given canvas pixels.

    Args:
        h_target_to_norm: 3×3 canvas → template matrix
        pixels: (N, 2) integer canvas coordinates (x, y)

    Returns:
        128×128 boolean template mask.
    """
    footprint = np.zeros((TEMPLATE_SIZE, TEMPLATE_SIZE), dtype=bool)
    if len(pixels) == 0:
        return footprint
    pre, _ = geometry_service.project(h_target_to_norm, pixels.astype(np.float64))
    inside, x0, y0, x1, y1, _, _ = _bilinear_cells(pre, TEMPLATE_SIZE, TEMPLATE_SIZE)
    for yy, xx in ((y0, x0), (y0, x1), (y1, x0), (y1, x1)):
        footprint[yy[inside], xx[inside]] = True
    return footprint


def _render(
    rgb: np.ndarray,
    valid: np.ndarray,
    h_dst_to_src: np.ndarray,
    shape: tuple[int, int],
    box: tuple[int, int, int, int],
) -> np.ndarray:
    """Backward-map the pixels of `box` (x0, y0, x1, y1 inclusive) into an RGBA image of `shape`."""
    out = np.zeros((*shape, 4), dtype=np.uint8)
    bx0, by0, bx1, by1 = box
    if bx0 > bx1 or by0 > by1:
        return out
    ys, xs = np.mgrid[by0 : by1 + 1, bx0 : bx1 + 1]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    pre, _ = geometry_service.project(h_dst_to_src, pixels)
    colours, ok = bilinear_sample(rgb, valid, pre)
    block = np.zeros((len(pixels), 4), dtype=np.uint8)
    block[ok, :3] = colours[ok]
    block[ok, 3] = 255
    out[by0 : by1 + 1, bx0 : bx1 + 1] = block.reshape(by1 - by0 + 1, bx1 - bx0 + 1, 4)
    return out


def quad_bounds(quad: Quadrilateral, canvas: tuple[int, int]) -> tuple[int, int, int, int]:
    """Integer bounding box of a quad clipped to a (width, height) canvas; empty when x0 > x1."""
    width, height = canvas
    arr = quad.as_array()
    x0 = max(0, math.floor(arr[:, 0].min()))
    y0 = max(0, math.floor(arr[:, 1].min()))
    x1 = min(width - 1, math.ceil(arr[:, 0].max()))
    y1 = min(height - 1, math.ceil(arr[:, 1].max()))
    return x0, y0, x1, y1


# ─── Normalization and Retargeting ───────────────────────────────────────────


def normalize_patch(
    source: np.ndarray,
    quad: Quadrilateral,
    slot: PatchSlot,
    garment_mask: np.ndarray,
) -> NormalizedPatch:
    """
    Resample the garment region inside `quad` onto the 128×128 template.

    Template pixels are backward-mapped through the inverse of the
    source → template homography; validity is the resampled garment mask
    intersected with the in-bounds indicator.

    Raises:
        DimensionMismatchError: mask and image sizes differ
        DegenerateQuadError: degenerate quad
    """
    source = np.asarray(source)
    garment_mask = np.asarray(garment_mask, dtype=bool)
    if source.shape[:2] != garment_mask.shape:
        raise DimensionMismatchError(
            "Garment mask and source image sizes differ",
            image=list(source.shape[:2]),
            mask=list(garment_mask.shape),
        )
    h = geometry_service.estimate_homography_dlt(quad.corners, TEMPLATE_CORNERS)
    rgb = source[..., :3] if source.ndim == 3 else np.repeat(source[..., None], 3, axis=2)
    last = TEMPLATE_SIZE - 1
    image = _render(
        rgb, garment_mask, geometry_service.invert(h).m, (TEMPLATE_SIZE, TEMPLATE_SIZE), (0, 0, last, last)
    )
    return NormalizedPatch(slot=slot, image=image, source_quad=quad, h_source_to_norm=h)


def retarget_patch(
    p: NormalizedPatch,
    target_quad: Quadrilateral,
    canvas: tuple[int, int],
    h_norm_to_target: Optional[Homography] = None,
) -> tuple[np.ndarray, Homography]:
    """
    Render a normalized patch onto a transparent (width, height) canvas inside `target_quad`.

    Returns:
        Tuple of (H×W×4 RGBA image, template → target homography)
    """
    h = h_norm_to_target
    if h is None:
        h = geometry_service.estimate_homography_dlt(TEMPLATE_CORNERS, target_quad.corners)
    width, height = canvas
    rendered = _render(
        p.image[..., :3],
        p.valid_mask,
        geometry_service.invert(h).m,
        (height, width),
        quad_bounds(target_quad, canvas),
    )
    return rendered, h


def stitch(
    rendered: Sequence[tuple[PatchSlot, np.ndarray]],
    canvas: Optional[tuple[int, int]] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> WarpedGarment:
    """
    Painter's-algorithm composite of rendered patches in z-order.

    Later slots overwrite earlier ones where they are valid; the mask is the
    union of validity.

    Raises:
        CanvasMismatchError: rendered images differ in size from each other or from `canvas`
    """
    shapes = {img.shape for _, img in rendered}
    if canvas is not None:
        shapes.add((canvas[1], canvas[0], 4))
    if len(shapes) > 1:
        raise CanvasMismatchError("Rendered patches do not share one canvas", shapes=sorted(map(list, shapes)))
    if not shapes:
        raise ValueError("Nothing to stitch and no canvas given")
    (shape,) = shapes
    rank = {slot: i for i, slot in enumerate(z_order)}
    out = np.zeros(shape, dtype=np.uint8)
    for _, img in sorted(rendered, key=lambda item: rank.get(item[0], len(rank))):
        valid = img[..., 3] > 0
        out[valid] = img[valid]
    return WarpedGarment(out)


# ─── Pipeline ────────────────────────────────────────────────────────────────


def decompose_garment(
    image: np.ndarray,
    parsing: ParsingMap,
    pose: PoseSkeleton,
    category: GarmentCategory,
    params: Optional[LayoutParams] = None,
) -> PatchSet:
    """Layout the source garment and normalize every present slot."""
    layout = layout_service.build_layout(pose, category, params)
    mask = mask_service.garment_mask(parsing, category)
    patches = {slot: normalize_patch(image, layout.quads[slot], slot, mask) for slot in layout.present_slots}
    logger.debug("Garment decomposed", extra={"category": category.value, "slots": len(patches)})
    return PatchSet(category=category, patches=patches, source_pose=pose)


def refine_retarget_homography(
    patch: NormalizedPatch,
    target_quad: Quadrilateral,
    source_pose: PoseSkeleton,
    target_pose: PoseSkeleton,
    params: Optional[LayoutParams] = None,
    lm: Optional[LmOptions] = None,
) -> geometry_service.LmResult:
    """
    Fit the template → target homography to the quad corners and the slot's joints.

    Governing joints confident in both poses contribute a correspondence from
    their template position (through the source homography) to their target
    position, on top of the four corner pairs.
    """
    gate = (params or LayoutParams()).min_confidence
    src = list(TEMPLATE_CORNERS)
    dst = list(target_quad.corners)
    for joint in layout_service.governing_joints(patch.slot):
        if not (source_pose.confident(joint, threshold=gate) and target_pose.confident(joint, threshold=gate)):
            continue
        try:
            src.append(geometry_service.apply_homography(patch.h_source_to_norm, source_pose.point(joint)))
        except PointAtInfinityError:
            continue
        dst.append(target_pose.point(joint))
    h0 = geometry_service.estimate_homography_dlt(TEMPLATE_CORNERS, target_quad.corners)
    return geometry_service.levenberg_marquardt(
        h0,
        np.array([list(p) for p in src]),
        np.array([list(p) for p in dst]),
        lm or LmOptions(),
    )


def render_patchset(
    patches: PatchSet,
    target_layout: PatchLayout,
    canvas: tuple[int, int],
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
    homographies: Optional[dict[PatchSlot, Homography]] = None,
) -> tuple[WarpedGarment, dict[PatchSlot, Homography]]:
    """
    Retarget and stitch every slot present in both the patch set and the layout.

    Returns:
        Tuple of (stitched garment, template → target homography per rendered slot)
    """
    shared = [slot for slot in patches.present_slots if slot in target_layout.present_slots]
    rendered: list[tuple[PatchSlot, np.ndarray]] = []
    used: dict[PatchSlot, Homography] = {}
    for slot in shared:
        img, h = retarget_patch(
            patches.patches[slot],
            target_layout.quads[slot],
            canvas,
            (homographies or {}).get(slot),
        )
        rendered.append((slot, img))
        used[slot] = h
    if not rendered:
        return WarpedGarment.empty(canvas), used
    return stitch(rendered, canvas, z_order), used


def warp_garment(
    source_img: np.ndarray,
    source_parsing: ParsingMap,
    source_pose: PoseSkeleton,
    target_pose: PoseSkeleton,
    category: GarmentCategory,
    params: Optional[LayoutParams] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
    refine: bool = False,
    lm: Optional[LmOptions] = None,
) -> tuple[PatchSet, WarpedGarment]:
    """
    Decompose the source garment and retarget it to the target pose.

    The returned patch set holds only slots present in both poses, which are
    also the only slots stitched.

    Raises:
        NoCommonSlotsError: source and target share no present slot
    """
    patches = decompose_garment(source_img, source_parsing, source_pose, category, params)
    kept, warped, _ = warp_patchset(patches, target_pose, params, z_order, refine, lm)
    return kept, warped


def warp_patchset(
    patches: PatchSet,
    target_pose: PoseSkeleton,
    params: Optional[LayoutParams] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
    refine: bool = False,
    lm: Optional[LmOptions] = None,
) -> tuple[PatchSet, WarpedGarment, dict[PatchSlot, Homography]]:
    """
    Retarget an existing patch set to a target pose; see `warp_garment`.

    Returns:
        Tuple of (patches of the shared slots, stitched garment, template → target homographies)
    """
    target_layout = layout_service.build_layout(target_pose, patches.category, params)
    shared = shared_slots(patches.present_slots, target_layout.present_slots)
    overrides: dict[PatchSlot, Homography] = {}
    if refine:
        for slot in shared:
            result = refine_retarget_homography(
                patches.patches[slot], target_layout.quads[slot], patches.source_pose, target_pose, params, lm
            )
            overrides[slot] = result.homography
            logger.info(
                "Refined patch homography",
                extra={
                    "slot": slot.value,
                    "initial_cost": result.costs[0],
                    "final_cost": result.costs[-1],
                    "iterations": result.iterations,
                },
            )
    kept = patches.restricted_to(set(shared))
    warped, used = render_patchset(kept, target_layout, target_pose.canvas_size, z_order, overrides)
    return kept, warped, used


def shared_slots(source: Iterable[PatchSlot], target: Iterable[PatchSlot]) -> tuple[PatchSlot, ...]:
    """Slots present on both sides, in source order.

    Raises:
        NoCommonSlotsError: the intersection is empty
    """
    target = set(target)
    shared = tuple(slot for slot in source if slot in target)
    if not shared:
        raise NoCommonSlotsError("Source and target share no present patch slot")
    return shared


# ─── Random Erasing ──────────────────────────────────────────────────────────


def _stroke_segments(
    rng: np.random.Generator,
    mask: np.ndarray,
    params: EraseParams,
) -> list[tuple[tuple[float, float], tuple[float, float], int]]:
    """Random-walk brush strokes starting on garment pixels, as (start, end, width) segments."""
    height, width = mask.shape
    ys, xs = np.nonzero(mask)
    segments = []
    for _ in range(int(rng.integers(params.strokes[0], params.strokes[1] + 1))):
        k = int(rng.integers(len(xs)))
        x, y = float(xs[k]), float(ys[k])
        brush = int(rng.integers(params.brush_width[0], params.brush_width[1] + 1))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        for _ in range(int(rng.integers(params.steps[0], params.steps[1] + 1))):
            angle += float(rng.uniform(-math.pi / 4, math.pi / 4))
            length = float(rng.uniform(params.step_length[0], params.step_length[1]))
            nx = min(max(x + length * math.cos(angle), 0.0), width - 1.0)
            ny = min(max(y + length * math.sin(angle), 0.0), height - 1.0)
            segments.append(((x, y), (nx, ny), brush))
            x, y = nx, ny
    return segments


def _stamp_strokes(
    segments: list[tuple[tuple[float, float], tuple[float, float], int]],
    shape: tuple[int, int],
) -> np.ndarray:
    """Rasterize segments; each pixel keeps the 1-based index of the earliest segment covering it."""
    height, width = shape
    canvas = Image.new("I", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    for idx in range(len(segments) - 1, -1, -1):
        (x0, y0), (x1, y1), brush = segments[idx]
        r = brush / 2.0
        draw.line([(x0, y0), (x1, y1)], fill=idx + 1, width=brush)
        draw.ellipse([x0 - r, y0 - r, x0 + r, y0 + r], fill=idx + 1)
        draw.ellipse([x1 - r, y1 - r, x1 + r, y1 + r], fill=idx + 1)
    return np.array(canvas, dtype=np.int64)


def _dilate(mask: np.ndarray) -> np.ndarray:
    img = Image.fromarray(mask.astype(np.uint8) * 255)
    return np.array(img.filter(ImageFilter.MaxFilter(3))) > 0


def erase_mask(rng: np.random.Generator, garment: np.ndarray, params: EraseParams) -> np.ndarray:
    """
    Free-form stroke mask clipped to `garment`, with area inside the configured bounds.

    Pixels over the upper bound are dropped latest-stamp first; below the lower
    bound the mask grows by 3×3 dilation inside the garment, and by fresh seed
    points once dilation stalls. Empty when the bounds admit no integer area.
    """
    total = int(garment.sum())
    low = math.ceil(params.area_bounds[0] * total)
    high = math.floor(params.area_bounds[1] * total)
    if total == 0 or low > high:
        return np.zeros_like(garment, dtype=bool)

    stamps = _stamp_strokes(_stroke_segments(rng, garment, params), garment.shape)
    stamps[~garment] = 0
    next_stamp = int(stamps.max()) + 1

    while np.count_nonzero(stamps) < low:
        erased = stamps > 0
        grown = _dilate(erased) & garment & ~erased
        if not grown.any():
            free = np.flatnonzero(garment & ~erased)
            grown = np.zeros_like(garment)
            grown.flat[free[int(rng.integers(len(free)))]] = True
        stamps[grown] = next_stamp
        next_stamp += 1

    flat = stamps.ravel()
    idx = np.flatnonzero(flat)
    if len(idx) > high:
        order = np.lexsort((idx, flat[idx]))
        keep = np.zeros(flat.shape, dtype=bool)
        keep[idx[order[:high]]] = True
        return keep.reshape(garment.shape)
    return stamps > 0


def random_erase(
    g: WarpedGarment,
    seed: int,
    alpha: Optional[float] = None,
    params: Optional[EraseParams] = None,
) -> WarpedGarment:
    """
    With probability `alpha`, erase a free-form stroke region of the garment.

    Fully determined by `seed`; erased pixels become transparent and leave the mask.
    """
    params = params or EraseParams()
    alpha = params.alpha if alpha is None else alpha
    rng = np.random.default_rng(seed)
    if not rng.random() < alpha:
        return g
    erased = erase_mask(rng, np.array(g.mask), params)
    if not erased.any():
        return g
    image = np.array(g.image)
    image[erased] = 0
    logger.debug("Garment erased", extra={"seed": seed, "erased_px": int(erased.sum())})
    return WarpedGarment(image)
