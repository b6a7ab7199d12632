"""Patch-level garment editing: dressing order, shape edits, transfer and outfit composition."""

import logging
from dataclasses import replace
from typing import Mapping, Optional, Sequence

import numpy as np

from patchroute.core.config import LayoutParams, LmOptions
from patchroute.core.exceptions import (
    CategoryMismatchError,
    MissingFileError,
    MissingLayerError,
    SlotAbsentError,
)
from patchroute.models.bundle import DressingOrder, GarmentLayer, LayerName, TryOnBundle
from patchroute.models.geometry import Homography, Quadrilateral
from patchroute.models.layout import DEFAULT_Z_ORDER, GarmentCategory, PatchSlot, slots_for
from patchroute.models.patches import TEMPLATE_SIZE, NormalizedPatch, PatchSet, WarpedGarment
from patchroute.models.person import PersonRecord
from patchroute.models.pose import PoseSkeleton
from patchroute.schemas.edit import (
    DropPatch,
    EditCommand,
    ReplacePatch,
    SetDressingOrder,
    ShapeEdit,
    TrimEnd,
    TrimPatch,
)
from patchroute.services import geometry_service, layout_service, warp_service

logger = logging.getLogger(__name__)


# ─── Local Shape Edits ───────────────────────────────────────────────────────


def local_shape_edit(patches: PatchSet, cmd: ShapeEdit) -> PatchSet:
    """
    Trim or drop one patch; every other patch is left untouched.

    Trimming keeps the first round(fraction·128) template rows from the
    proximal edge (or the last ones when `keep_from` is distal).

    Raises:
        SlotAbsentError: the slot is not present in the patch set
    """
    if cmd.slot not in patches.patches:
        raise SlotAbsentError("Slot is not present in the patch set", slot=cmd.slot.value)
    if isinstance(cmd, DropPatch):
        return patches.without(cmd.slot)

    rows = int(round(cmd.fraction * TEMPLATE_SIZE))
    keep = np.zeros((TEMPLATE_SIZE, TEMPLATE_SIZE), dtype=bool)
    if cmd.keep_from is TrimEnd.PROXIMAL:
        keep[:rows] = True
    elif rows:
        keep[TEMPLATE_SIZE - rows :] = True
    return patches.with_patch(patches.patches[cmd.slot].with_valid_mask(keep))


def replace_patch(patches: PatchSet, slot: PatchSlot, donor: PatchSet) -> PatchSet:
    """
    Put the donor's patch into `slot`.

    Raises:
        CategoryMismatchError: the slot does not belong to the patch set's category
        SlotAbsentError: the donor has no patch in that slot
    """
    if slot not in slots_for(patches.category):
        raise CategoryMismatchError(
            "Slot does not belong to the patch set's category",
            slot=slot.value,
            category=patches.category.value,
        )
    if slot not in donor.patches:
        raise SlotAbsentError("Donor has no patch in this slot", slot=slot.value)
    return patches.with_patch(donor.patches[slot])


# ─── Bundles and Dressing Order ──────────────────────────────────────────────


def _render_layer(
    layer: GarmentLayer,
    patches: PatchSet,
    canvas: tuple[int, int],
    z_order: Sequence[PatchSlot],
) -> GarmentLayer:
    warped, _ = warp_service.render_patchset(patches, layer.target_layout, canvas, z_order, dict(layer.homographies))
    return replace(layer, patches=patches, warped=warped)


def _has_torso(layer: GarmentLayer) -> bool:
    torso = PatchSlot.TORSO
    return torso in layer.base.patches and torso in layer.target_layout.present_slots


def _torso_render(layer: GarmentLayer, canvas: tuple[int, int]) -> Optional[np.ndarray]:
    """Coverage of the layer's unclipped Torso patch on the canvas, if it is rendered at all."""
    if not _has_torso(layer):
        return None
    torso = PatchSlot.TORSO
    img, _ = warp_service.retarget_patch(
        layer.base.patches[torso], layer.target_layout.quads[torso], canvas, layer.homographies.get(torso)
    )
    return img[..., 3] > 0


def _below_waistline(lower_torso: Quadrilateral, canvas: tuple[int, int]) -> np.ndarray:
    """Canvas pixels on the hip side of the line through the lower Torso quad's top edge."""
    width, height = canvas
    c = lower_torso.as_array()
    edge = c[1] - c[0]
    ys, xs = np.mgrid[0:height, 0:width]

    def side(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return edge[0] * (y - c[0, 1]) - edge[1] * (x - c[0, 0])

    hips = (c[2] + c[3]) / 2.0
    return side(xs, ys) * np.sign(side(hips[0], hips[1])) > 0


def _clip_torso(
    patch: NormalizedPatch,
    target_quad: Quadrilateral,
    hidden: np.ndarray,
    canvas: tuple[int, int],
    h: Optional[Homography] = None,
) -> NormalizedPatch:
    """
    Invalidate template pixels sampled only for hidden canvas pixels.

    Template pixels that any non-hidden canvas pixel of the quad's box reads
    stay as they are, so the patch renders identically outside `hidden`.
    """
    if h is None:
        h = geometry_service.estimate_homography_dlt(warp_service.TEMPLATE_CORNERS, target_quad.corners)
    inv = geometry_service.invert(h).m
    x0, y0, x1, y1 = warp_service.quad_bounds(target_quad, canvas)
    if x0 > x1 or y0 > y1:
        return patch
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1)
    in_hidden = hidden[ys.ravel(), xs.ravel()]
    clip = warp_service.sample_footprint(inv, pixels[in_hidden])
    clip &= ~warp_service.sample_footprint(inv, pixels[~in_hidden])
    return patch.with_valid_mask(~clip)


def _apply_order(bundle: TryOnBundle, z_order: Sequence[PatchSlot]) -> TryOnBundle:
    """Recompute both layers from their base patch sets under the bundle's dressing order."""
    canvas = bundle.target_pose.canvas_size
    upper, lower = bundle.upper, bundle.lower
    torso = PatchSlot.TORSO

    if upper is not None and lower is not None and bundle.dressing_order is not None:
        if bundle.dressing_order is DressingOrder.TUCK_IN:
            cover, clipped_layer = _torso_render(lower, canvas), upper
            if cover is not None:
                cover = cover & _below_waistline(lower.target_layout.quads[torso], canvas)
        else:
            cover, clipped_layer = _torso_render(upper, canvas), lower
        if cover is not None and _has_torso(clipped_layer):
            patch = _clip_torso(
                clipped_layer.base.patches[torso],
                clipped_layer.target_layout.quads[torso],
                cover,
                canvas,
                clipped_layer.homographies.get(torso),
            )
            patches = clipped_layer.base.with_patch(patch)
            if clipped_layer is upper:
                upper = _render_layer(upper, patches, canvas, z_order)
                lower = _render_layer(lower, lower.base, canvas, z_order)
            else:
                upper = _render_layer(upper, upper.base, canvas, z_order)
                lower = _render_layer(lower, patches, canvas, z_order)
            return replace(bundle, upper=upper, lower=lower)

    if upper is not None:
        upper = _render_layer(upper, upper.base, canvas, z_order)
    if lower is not None:
        lower = _render_layer(lower, lower.base, canvas, z_order)
    return replace(bundle, upper=upper, lower=lower)


def set_dressing_order(
    bundle: TryOnBundle,
    order: DressingOrder,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> TryOnBundle:
    """
    Tuck the upper garment into the lower one, or let it hang over.

    TuckIn clips the upper Torso patch where it falls below the waistline
    inside the lower Torso's coverage and draws the lower garment on top.
    TuckOut clips the lower Torso patch under the upper Torso's coverage and
    draws the upper garment on top. Only the two Torso patches change.

    Raises:
        MissingLayerError: the bundle lacks an upper or a lower layer
    """
    if bundle.upper is None or bundle.lower is None:
        raise MissingLayerError(
            "Dressing order needs both upper and lower garments",
            upper=bundle.upper is not None,
            lower=bundle.lower is not None,
        )
    return _apply_order(replace(bundle, dressing_order=order), z_order)


def build_bundle(
    target_pose: PoseSkeleton,
    upper: Optional[PatchSet] = None,
    lower: Optional[PatchSet] = None,
    dressing_order: Optional[DressingOrder] = None,
    params: Optional[LayoutParams] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> TryOnBundle:
    """
    Retarget upper and lower patch sets to one pose.

    Layers keep every patch of their set; slots the target pose lacks are
    simply not rendered.

    Raises:
        CategoryMismatchError: the upper set is a lower garment or vice versa
        NoCommonSlotsError: a set shares no slot with the target pose
    """
    if upper is not None and upper.category is GarmentCategory.LOWER:
        raise CategoryMismatchError("Upper layer must be an upper garment or a dress", category=upper.category.value)
    if lower is not None and lower.category is not GarmentCategory.LOWER:
        raise CategoryMismatchError("Lower layer must be a lower garment", category=lower.category.value)

    def layer(patches: Optional[PatchSet]) -> Optional[GarmentLayer]:
        if patches is None:
            return None
        target_layout = layout_service.build_layout(target_pose, patches.category, params)
        warp_service.shared_slots(patches.present_slots, target_layout.present_slots)
        warped, _ = warp_service.render_patchset(patches, target_layout, target_pose.canvas_size, z_order)
        return GarmentLayer(base=patches, patches=patches, target_layout=target_layout, warped=warped)

    bundle = TryOnBundle(upper=layer(upper), lower=layer(lower), target_pose=target_pose)
    if dressing_order is None:
        return bundle
    return set_dressing_order(bundle, dressing_order, z_order)


def render_bundle(bundle: TryOnBundle) -> WarpedGarment:
    """Composite of the bundle's layers; the upper layer is on top only under TuckOut."""
    layers = [bundle.upper, bundle.lower]
    if bundle.dressing_order is DressingOrder.TUCK_OUT:
        layers.reverse()
    width, height = bundle.target_pose.canvas_size
    out = np.zeros((height, width, 4), dtype=np.uint8)
    for layer in layers:
        if layer is None:
            continue
        valid = layer.warped.mask
        out[valid] = layer.warped.image[valid]
    return WarpedGarment(out)


# ─── Transfer and Composition ────────────────────────────────────────────────


def transfer_pairing(
    shape_source: PatchSet,
    texture_source: PatchSet,
    target_pose: PoseSkeleton,
    params: Optional[LayoutParams] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> tuple[PatchSet, WarpedGarment]:
    """
    Pair one garment's normalized patches with another garment's warp.

    Both outputs cover the slots present in the two sets and the target pose.

    Raises:
        CategoryMismatchError: the sets differ in category
        NoCommonSlotsError: no slot is shared by all three
    """
    if shape_source.category is not texture_source.category:
        raise CategoryMismatchError(
            "Shape and texture sources differ in category",
            shape=shape_source.category.value,
            texture=texture_source.category.value,
        )
    target_layout = layout_service.build_layout(target_pose, shape_source.category, params)
    shared = warp_service.shared_slots(
        [s for s in shape_source.present_slots if s in texture_source.patches],
        target_layout.present_slots,
    )
    warped, _ = warp_service.render_patchset(
        texture_source.restricted_to(set(shared)), target_layout, target_pose.canvas_size, z_order
    )
    return shape_source.restricted_to(set(shared)), warped


def outfit_compose(
    upper_source: PersonRecord,
    lower_source: PersonRecord,
    target: PersonRecord,
    upper_category: GarmentCategory = GarmentCategory.UPPER,
    params: Optional[LayoutParams] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
    refine: bool = False,
    lm: Optional[LmOptions] = None,
) -> TryOnBundle:
    """
    Dress the target person in one source's upper garment and another's lower garment.

    Each garment is warped independently; the bundle starts tucked in.

    Raises:
        CategoryMismatchError: `upper_category` is the lower category
    """
    if upper_category is GarmentCategory.LOWER:
        raise CategoryMismatchError("Upper source must provide an upper garment or a dress")
    layers: dict[LayerName, GarmentLayer] = {}
    for name, person, category in (
        (LayerName.UPPER, upper_source, upper_category),
        (LayerName.LOWER, lower_source, GarmentCategory.LOWER),
    ):
        patches = warp_service.decompose_garment(person.image, person.parsing, person.pose, category, params)
        kept, warped, used = warp_service.warp_patchset(patches, target.pose, params, z_order, refine, lm)
        target_layout = layout_service.build_layout(target.pose, category, params)
        layers[name] = GarmentLayer(
            base=kept,
            patches=kept,
            target_layout=target_layout,
            warped=warped,
            homographies=used if refine else {},
        )
        logger.info(
            "Garment warped for outfit",
            extra={"layer": name.value, "source": person.id, "target": target.id, "slots": len(kept.patches)},
        )
    bundle = TryOnBundle(upper=layers[LayerName.UPPER], lower=layers[LayerName.LOWER], target_pose=target.pose)
    return set_dressing_order(bundle, DressingOrder.TUCK_IN, z_order)


# ─── Edit Scripts ────────────────────────────────────────────────────────────


def _resolve_layer(bundle: TryOnBundle, slot: PatchSlot, layer: Optional[LayerName]) -> LayerName:
    """The named layer, or the first layer (upper, then lower) holding the slot."""
    if layer is not None:
        if bundle.layer(layer) is None:
            raise MissingLayerError("Edit names a layer the bundle does not have", layer=layer.value)
        return layer
    for name in (LayerName.UPPER, LayerName.LOWER):
        candidate = bundle.layer(name)
        if candidate is not None and slot in candidate.base.patches:
            return name
    raise SlotAbsentError("No layer holds this slot", slot=slot.value)


def apply_edit(
    bundle: TryOnBundle,
    cmd: EditCommand,
    donors: Optional[Mapping[str, PatchSet]] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> TryOnBundle:
    """Apply one edit command and re-render the bundle."""
    if isinstance(cmd, SetDressingOrder):
        return set_dressing_order(bundle, cmd.order, z_order)

    name = _resolve_layer(bundle, cmd.slot, cmd.layer)
    layer = bundle.layer(name)
    assert layer is not None
    if isinstance(cmd, (TrimPatch, DropPatch)):
        base = local_shape_edit(layer.base, cmd)
    elif isinstance(cmd, ReplacePatch):
        donor = (donors or {}).get(cmd.donor)
        if donor is None:
            raise MissingFileError("Donor archive was not loaded", donor=cmd.donor)
        base = replace_patch(layer.base, cmd.slot, donor)
    else:
        raise TypeError(f"Unsupported edit command {cmd!r}")
    return _apply_order(bundle.with_layer(name, layer.with_base(base)), z_order)


def apply_edit_script(
    bundle: TryOnBundle,
    script: Sequence[EditCommand],
    donors: Optional[Mapping[str, PatchSet]] = None,
    z_order: Sequence[PatchSlot] = DEFAULT_Z_ORDER,
) -> TryOnBundle:
    """Apply commands in order; an empty script returns the bundle unchanged."""
    for i, cmd in enumerate(script):
        bundle = apply_edit(bundle, cmd, donors, z_order)
        logger.debug("Edit applied", extra={"index": i, "op": cmd.op})
    return bundle
