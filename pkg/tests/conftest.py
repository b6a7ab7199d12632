"""Pytest configuration and shared fixtures."""

import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pytest
from PIL import Image, ImageDraw

from patchroute.models.layout import GarmentCategory, PatchSlot
from patchroute.models.parsing import DEFAULT_LABEL_TABLE, ParsingMap
from patchroute.models.person import PersonRecord
from patchroute.models.pose import NUM_JOINTS, Joint, PoseSkeleton
from patchroute.schemas.person import PoseFile
from patchroute.services import layout_service

CANVAS = (320, 512)
CANVAS_FLAG = "320x512"

UPPER_LABEL = 5
LOWER_LABEL = 9
DRESS_LABEL = 6
FACE_LABEL = 13
ARM_LABEL = 14

TOP_SLOTS = (
    PatchSlot.NECK,
    PatchSlot.TORSO,
    PatchSlot.LEFT_UPPER_ARM,
    PatchSlot.LEFT_LOWER_ARM,
    PatchSlot.RIGHT_UPPER_ARM,
    PatchSlot.RIGHT_LOWER_ARM,
)

UPPER_COLOUR = (200, 30, 30)
LOWER_COLOUR = (30, 30, 200)

# Standing person, arms hanging slightly away from the body.
CANONICAL_JOINTS: dict[Joint, tuple[float, float]] = {
    Joint.NOSE: (160.0, 60.0),
    Joint.NECK: (160.0, 100.0),
    Joint.R_SHOULDER: (120.0, 110.0),
    Joint.R_ELBOW: (100.0, 180.0),
    Joint.R_WRIST: (90.0, 250.0),
    Joint.L_SHOULDER: (200.0, 110.0),
    Joint.L_ELBOW: (220.0, 180.0),
    Joint.L_WRIST: (230.0, 250.0),
    Joint.R_HIP: (135.0, 260.0),
    Joint.R_KNEE: (130.0, 360.0),
    Joint.R_ANKLE: (128.0, 460.0),
    Joint.L_HIP: (185.0, 260.0),
    Joint.L_KNEE: (190.0, 360.0),
    Joint.L_ANKLE: (192.0, 460.0),
    Joint.R_EYE: (150.0, 55.0),
    Joint.L_EYE: (170.0, 55.0),
    Joint.R_EAR: (140.0, 60.0),
    Joint.L_EAR: (180.0, 60.0),
}


# ─── Builders ────────────────────────────────────────────────────────────────


def make_pose(
    *,
    dx: float = 0.0,
    dy: float = 0.0,
    jitter: Optional[np.random.Generator] = None,
    confidence: Optional[dict[Joint, float]] = None,
    canvas: tuple[int, int] = CANVAS,
) -> PoseSkeleton:
    """Canonical skeleton, optionally shifted, jittered or with lowered confidences."""
    coords = np.array([CANONICAL_JOINTS[Joint(i)] for i in range(NUM_JOINTS)], dtype=np.float64)
    if jitter is not None:
        coords = coords + jitter.uniform(-8.0, 8.0, size=coords.shape)
    coords = coords + np.array([dx, dy])
    conf = np.ones(NUM_JOINTS)
    for joint, value in (confidence or {}).items():
        conf[joint] = value
    return PoseSkeleton(coords, conf, canvas)


# Index permutation that exchanges every left joint with its right twin.
MIRROR_PERMUTATION = (0, 1, 5, 6, 7, 2, 3, 4, 11, 12, 13, 8, 9, 10, 15, 14, 17, 16)


def transform_pose(pose: PoseSkeleton, scale: float = 1.0, dx: float = 0.0, dy: float = 0.0) -> PoseSkeleton:
    """Uniformly scale about the origin, then translate; the canvas is unchanged."""
    return PoseSkeleton(pose.coords * scale + np.array([dx, dy]), pose.confidence.copy(), pose.canvas_size)


def mirror_pose(pose: PoseSkeleton, axis_x: float) -> PoseSkeleton:
    """Reflect across the vertical line x = axis_x and swap left/right joints."""
    coords = pose.coords.copy()
    coords[:, 0] = 2.0 * axis_x - coords[:, 0]
    order = list(MIRROR_PERMUTATION)
    return PoseSkeleton(coords[order], pose.confidence[order], pose.canvas_size)


def _fill_quads(
    draw: ImageDraw.ImageDraw,
    pose: PoseSkeleton,
    category: GarmentCategory,
    value: int,
    slots: Optional[Iterable[PatchSlot]] = None,
) -> None:
    layout = layout_service.build_layout(pose, category)
    wanted = set(layout.present_slots if slots is None else slots)
    for slot in layout.present_slots:
        if slot not in wanted:
            continue
        draw.polygon([tuple(c) for c in layout.quads[slot].as_array().tolist()], fill=value)


def make_person(
    pose: Optional[PoseSkeleton] = None,
    *,
    wear: Iterable[str] = ("upper",),
    person_id: str = "person",
    textured: bool = False,
) -> PersonRecord:
    """
    Synthetic person whose garments exactly fill the layout quads of their category.

    Upper garments cover neck, torso and arms; a lower garment is painted
    over them, so the upper one ends at the waistline.
    Plain garments are uniformly coloured; textured ones carry a smooth ramp.
    """
    pose = pose or make_pose()
    width, height = pose.canvas_size
    labels = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(labels)
    draw.ellipse([145, 40, 175, 80], fill=FACE_LABEL)
    wear = tuple(wear)
    if "dress" in wear:
        _fill_quads(draw, pose, GarmentCategory.DRESS, DRESS_LABEL)
    if "upper" in wear:
        _fill_quads(draw, pose, GarmentCategory.UPPER, UPPER_LABEL, TOP_SLOTS)
    if "lower" in wear:
        _fill_quads(draw, pose, GarmentCategory.LOWER, LOWER_LABEL)
    parsing = np.array(labels, dtype=np.uint8)

    if textured:
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        image = np.stack([xs * 200.0 / width, ys * 200.0 / height, np.full_like(xs, 100.0)], axis=2)
        image = np.rint(image).astype(np.uint8)
    else:
        image = np.full((height, width, 3), 240, dtype=np.uint8)
        image[parsing == UPPER_LABEL] = UPPER_COLOUR
        image[parsing == DRESS_LABEL] = UPPER_COLOUR
        image[parsing == LOWER_LABEL] = LOWER_COLOUR
    image[parsing == FACE_LABEL] = (220, 180, 150)
    return PersonRecord(id=person_id, image=image, pose=pose, parsing=ParsingMap(parsing, DEFAULT_LABEL_TABLE))


def seed_person(root: Path, name: str = "person", person: Optional[PersonRecord] = None, **kwargs) -> Path:
    """Write a person directory (image.png, pose.json, parsing.png) under `root`."""
    person = person or make_person(person_id=name, **kwargs)
    directory = Path(root) / name
    directory.mkdir(parents=True, exist_ok=True)
    Image.fromarray(person.image).save(directory / "image.png")
    Image.fromarray(person.parsing.labels).save(directory / "parsing.png")
    pose = PoseFile.from_skeleton(person.pose).model_dump(mode="json")
    (directory / "pose.json").write_text(json.dumps(pose))
    return directory


def seed_script(path: Path, commands: list[dict]) -> Path:
    Path(path).write_text(json.dumps(commands))
    return Path(path)


def slot_area(mask: np.ndarray) -> int:
    return int(np.asarray(mask, dtype=bool).sum())


# ─── Fixtures ────────────────────────────────────────────────────────────────


@pytest.fixture
def pose() -> PoseSkeleton:
    return make_pose()


@pytest.fixture
def upper_person() -> PersonRecord:
    return make_person(wear=("upper",), person_id="upper")


@pytest.fixture
def outfit_person() -> PersonRecord:
    return make_person(wear=("upper", "lower"), person_id="outfit")


@pytest.fixture
def people_root(tmp_path: Path) -> Path:
    """A people directory with an upper-garment wearer, an outfit wearer and a shifted copy."""
    root = tmp_path / "people"
    seed_person(root, "alice", wear=("upper",))
    seed_person(root, "bob", wear=("upper", "lower"))
    seed_person(root, "carol", person=make_person(make_pose(dx=12.0, dy=6.0), wear=("upper", "lower")))
    return root
