"""Pose-guided quadrilateral patch layouts."""

import logging
import math
from typing import Optional

import numpy as np

from patchroute.core.config import LayoutParams
from patchroute.core.exceptions import DegenerateQuadError, MissingCoreJointsError
from patchroute.models.geometry import Point2, Quadrilateral
from patchroute.models.layout import GarmentCategory, PatchLayout, PatchSlot, slots_for
from patchroute.models.pose import Joint, PoseSkeleton

logger = logging.getLogger(__name__)

MIN_LIMB_LENGTH = 2.0

TORSO_JOINTS = (Joint.L_SHOULDER, Joint.R_SHOULDER, Joint.R_HIP, Joint.L_HIP)

# (upper slot, lower slot, proximal, middle, distal joint, uses arm ratio)
LIMB_CHAINS: tuple[tuple[PatchSlot, PatchSlot, Joint, Joint, Joint, bool], ...] = (
    (PatchSlot.LEFT_UPPER_ARM, PatchSlot.LEFT_LOWER_ARM, Joint.L_SHOULDER, Joint.L_ELBOW, Joint.L_WRIST, True),
    (PatchSlot.RIGHT_UPPER_ARM, PatchSlot.RIGHT_LOWER_ARM, Joint.R_SHOULDER, Joint.R_ELBOW, Joint.R_WRIST, True),
    (PatchSlot.LEFT_UPPER_LEG, PatchSlot.LEFT_LOWER_LEG, Joint.L_HIP, Joint.L_KNEE, Joint.L_ANKLE, False),
    (PatchSlot.RIGHT_UPPER_LEG, PatchSlot.RIGHT_LOWER_LEG, Joint.R_HIP, Joint.R_KNEE, Joint.R_ANKLE, False),
)


# ─── Primitive Quads ─────────────────────────────────────────────────────────


def limb_quad(proximal: Point2, distal: Point2, width: float) -> Quadrilateral:
    """
    Rectangle around the limb axis from `proximal` to `distal`.

    With unit axis d and normal n = (d_y, -d_x) the corners are
    proximal + w/2·n (anchor), proximal - w/2·n, distal - w/2·n, distal + w/2·n.

    Raises:
        DegenerateQuadError: limb shorter than 2 px
    """
    axis = distal.as_array() - proximal.as_array()
    length = float(np.hypot(axis[0], axis[1]))
    if length <= MIN_LIMB_LENGTH:
        raise DegenerateQuadError("Limb is too short for a patch", length=length)
    d = axis / length
    offset = np.array([d[1], -d[0]]) * (width / 2.0)
    p, q = proximal.as_array(), distal.as_array()
    return Quadrilateral.from_coords([p + offset, p - offset, q - offset, q + offset])


def _push_outward(corners: np.ndarray, margin: float) -> np.ndarray:
    """Move every corner away from the corners' centroid by `margin` px."""
    centroid = corners.mean(axis=0)
    out = corners.copy()
    for i, corner in enumerate(corners):
        direction = corner - centroid
        norm = float(np.hypot(direction[0], direction[1]))
        if norm > 0:
            out[i] = corner + direction / norm * margin
    return out


def _torso_quads(pose: PoseSkeleton, category: GarmentCategory, params: LayoutParams) -> Quadrilateral:
    l_sh, r_sh, r_hip, l_hip = (pose.coords[j] for j in TORSO_JOINTS)
    shoulder_mid, hip_mid = (l_sh + r_sh) / 2.0, (l_hip + r_hip) / 2.0
    margin = params.torso_margin_ratio * float(np.hypot(*(shoulder_mid - hip_mid)))
    if category is GarmentCategory.LOWER:
        # Waistline to hips.
        w = params.waist_height_ratio
        corners = np.array([l_hip + w * (l_sh - l_hip), r_hip + w * (r_sh - r_hip), r_hip, l_hip])
    else:
        corners = np.array([l_sh, r_sh, r_hip, l_hip])
    return Quadrilateral.from_coords(_push_outward(corners, margin))


def _neck_quad(pose: PoseSkeleton, params: LayoutParams) -> Quadrilateral:
    """Shoulder-wide rectangle standing on the neck joint, extending towards the head."""
    neck = pose.coords[Joint.NECK]
    span = pose.coords[Joint.L_SHOULDER] - pose.coords[Joint.R_SHOULDER]
    width = float(np.hypot(span[0], span[1]))
    if width <= MIN_LIMB_LENGTH:
        raise DegenerateQuadError("Shoulders are too close for a neck patch", width=width)
    up = np.array([span[1], -span[0]]) / width * (params.neck_height_ratio * width)
    left, right = neck + span / 2.0, neck - span / 2.0
    return Quadrilateral.from_coords([left + up, right + up, right, left])


def governing_joints(slot: PatchSlot) -> tuple[Joint, ...]:
    """Joints whose confidence decides whether `slot` is present."""
    if slot is PatchSlot.TORSO:
        return TORSO_JOINTS
    if slot is PatchSlot.NECK:
        return (Joint.NECK, Joint.L_SHOULDER, Joint.R_SHOULDER)
    for upper_slot, lower_slot, proximal, middle, distal, _ in LIMB_CHAINS:
        if slot is upper_slot:
            return proximal, middle
        if slot is lower_slot:
            return middle, distal
    raise ValueError(f"Unknown slot {slot}")


def _snap_to_joint_edge(upper: Quadrilateral, lower: Quadrilateral) -> Quadrilateral:
    """Reuse the upper segment's distal edge as the lower segment's proximal edge."""
    u, l = upper.corners, lower.corners
    try:
        return Quadrilateral((u[3], u[2], l[2], l[3]))
    except DegenerateQuadError:
        return lower


# ─── Layout ──────────────────────────────────────────────────────────────────


def build_layout(
    pose: PoseSkeleton,
    category: GarmentCategory,
    params: Optional[LayoutParams] = None,
) -> PatchLayout:
    """
    Quadrilateral patch layout of a garment category on a skeleton.

    A slot is present when every joint governing it meets `min_confidence` and
    its quad is non-degenerate; other slots are dropped, never extrapolated.

    Raises:
        MissingCoreJointsError: a shoulder or hip joint is below the confidence gate
    """
    params = params or LayoutParams()
    gate = params.min_confidence
    if not pose.confident(*TORSO_JOINTS, threshold=gate):
        raise MissingCoreJointsError(
            "Shoulder and hip joints are required to anchor the layout",
            confidences={j.name.lower(): float(pose.confidence[j]) for j in TORSO_JOINTS},
        )

    wanted = set(slots_for(category))
    quads: dict[PatchSlot, Quadrilateral] = {PatchSlot.TORSO: _torso_quads(pose, category, params)}

    if PatchSlot.NECK in wanted and pose.confident(Joint.NECK, threshold=gate):
        try:
            quads[PatchSlot.NECK] = _neck_quad(pose, params)
        except DegenerateQuadError as exc:
            logger.warning("Dropping neck patch", extra={"slot": PatchSlot.NECK.value, "reason": exc.message})

    for upper_slot, lower_slot, proximal, middle, distal, is_arm in LIMB_CHAINS:
        if upper_slot not in wanted:
            continue
        ratio = params.arm_width_ratio if is_arm else params.leg_width_ratio
        segments = ((upper_slot, proximal, middle), (lower_slot, middle, distal))
        for slot, start, end in segments:
            if not pose.confident(start, end, threshold=gate):
                continue
            p, q = pose.point(start), pose.point(end)
            length = math.hypot(q.x - p.x, q.y - p.y)
            try:
                quads[slot] = limb_quad(p, q, ratio * length)
            except DegenerateQuadError as exc:
                logger.warning("Dropping limb patch", extra={"slot": slot.value, "reason": exc.message})
        if upper_slot in quads and lower_slot in quads:
            quads[lower_slot] = _snap_to_joint_edge(quads[upper_slot], quads[lower_slot])

    present = {slot: slot in quads for slot in slots_for(category)}
    dropped = [slot.value for slot, ok in present.items() if not ok]
    if dropped:
        logger.warning("Layout has absent slots", extra={"category": category.value, "absent": dropped})
    return PatchLayout(category=category, quads=quads, present=present)
