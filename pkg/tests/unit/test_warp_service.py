"""Unit tests for patch normalization, retargeting, stitching and random erasing."""

import numpy as np
import pytest
from PIL import Image, ImageFilter

from patchroute.core.config import EraseParams
from patchroute.core.exceptions import CanvasMismatchError, DimensionMismatchError, NoCommonSlotsError
from patchroute.models.geometry import Quadrilateral
from patchroute.models.layout import GarmentCategory, PatchSlot
from patchroute.models.patches import WarpedGarment
from patchroute.models.pose import Joint
from patchroute.services import geometry_service, layout_service, mask_service
from patchroute.services.warp_service import (
    decompose_garment,
    normalize_patch,
    random_erase,
    retarget_patch,
    shared_slots,
    stitch,
    warp_garment,
    warp_patchset,
)
from tests.conftest import CANVAS, UPPER_COLOUR, make_person, make_pose, transform_pose

SQUARE_128 = Quadrilateral.from_coords([(0, 0), (127, 0), (127, 127), (0, 127)])


def erode(mask: np.ndarray, size: int = 7) -> np.ndarray:
    img = Image.fromarray(mask.astype(np.uint8) * 255)
    return np.array(img.filter(ImageFilter.MinFilter(size))) > 0


def quad_coverage(quad: Quadrilateral) -> np.ndarray:
    """Canvas pixels a fully valid patch paints when rendered into `quad`."""
    width, height = CANVAS
    white = np.full((height, width, 3), 255, dtype=np.uint8)
    full = normalize_patch(white, quad, PatchSlot.TORSO, np.ones((height, width), dtype=bool))
    img, _ = retarget_patch(full, quad, CANVAS)
    return img[..., 3] > 0


def solid_rgba(canvas: tuple[int, int], box: tuple[int, int, int, int], colour: tuple[int, int, int]) -> np.ndarray:
    width, height = canvas
    img = np.zeros((height, width, 4), dtype=np.uint8)
    x0, y0, x1, y1 = box
    img[y0:y1, x0:x1] = (*colour, 255)
    return img


# ─── Tests: Normalization ────────────────────────────────────────────────────


class TestNormalizePatch:
    """Tests for resampling a quad onto the template."""

    def test_uniform_source_gives_uniform_patch(self):
        source = np.zeros((300, 300, 3), dtype=np.uint8)
        source[...] = (255, 0, 0)
        quad = Quadrilateral.from_coords([(20, 30), (250, 40), (230, 260), (40, 240)])
        patch = normalize_patch(source, quad, PatchSlot.TORSO, np.ones((300, 300), dtype=bool))
        assert patch.valid_mask.all()
        assert (patch.image[..., :3] == (255, 0, 0)).all()

    def test_template_square_is_an_identity_resample(self):
        rng = np.random.default_rng(0)
        source = rng.integers(0, 256, size=(160, 160, 3), dtype=np.uint8)
        patch = normalize_patch(source, SQUARE_128, PatchSlot.TORSO, np.ones((160, 160), dtype=bool))
        np.testing.assert_array_equal(patch.image[..., :3], source[:128, :128])

    def test_ramp_at_half_resolution(self):
        ramp = np.tile(np.arange(256, dtype=np.uint8), (256, 1))
        source = np.stack([ramp, ramp, ramp], axis=2)
        quad = Quadrilateral.from_coords([(0, 0), (254, 0), (254, 254), (0, 254)])
        patch = normalize_patch(source, quad, PatchSlot.TORSO, np.ones((256, 256), dtype=bool))
        expected = np.rint(np.arange(128) * 254.0 / 127.0)
        np.testing.assert_array_equal(patch.image[0, :, 0], expected.astype(np.uint8))

    def test_mask_limits_validity(self):
        source = np.full((200, 200, 3), 90, dtype=np.uint8)
        mask = np.zeros((200, 200), dtype=bool)
        mask[:, :64] = True
        patch = normalize_patch(source, SQUARE_128, PatchSlot.TORSO, mask)
        assert patch.valid_mask[:, :64].all()
        assert not patch.valid_mask[:, 65:].any()
        assert not patch.image[~patch.valid_mask].any()

    def test_mask_size_must_match(self):
        with pytest.raises(DimensionMismatchError):
            normalize_patch(np.zeros((10, 10, 3), np.uint8), SQUARE_128, PatchSlot.TORSO, np.ones((9, 10), bool))


# ─── Tests: Retargeting and Stitching ────────────────────────────────────────


class TestRetargetPatch:
    """Tests for rendering a patch into a target quad."""

    @pytest.fixture
    def red_patch(self):
        source = np.zeros((300, 300, 3), dtype=np.uint8)
        source[...] = (255, 0, 0)
        quad = Quadrilateral.from_coords([(20, 30), (250, 40), (230, 260), (40, 240)])
        return normalize_patch(source, quad, PatchSlot.TORSO, np.ones((300, 300), dtype=bool))

    def test_uniform_patch_fills_the_quad(self, red_patch):
        target = Quadrilateral.from_coords([(50, 60), (150, 70), (140, 200), (60, 190)])
        img, _ = retarget_patch(red_patch, target, CANVAS)
        valid = img[..., 3] > 0
        assert (img[valid, :3] == (255, 0, 0)).all()
        assert not img[~valid].any()
        assert abs(int(valid.sum()) - target.area) < 0.05 * target.area

    def test_shift_equivariance(self):
        rng = np.random.default_rng(5)
        checker = (np.indices((128, 128)).sum(axis=0) // 8 % 2 * 200).astype(np.uint8)
        source = np.zeros((200, 200, 3), dtype=np.uint8)
        source[:128, :128] = checker[..., None] + rng.integers(0, 20, size=(128, 128, 1), dtype=np.uint8)
        patch = normalize_patch(source, SQUARE_128, PatchSlot.TORSO, np.ones((200, 200), dtype=bool))
        target = Quadrilateral.from_coords([(40, 50), (170, 60), (160, 220), (50, 210)])
        img, _ = retarget_patch(patch, target, CANVAS)
        moved = Quadrilateral.from_coords((p.x + 10, p.y) for p in target.corners)
        shifted, _ = retarget_patch(patch, moved, CANVAS)
        np.testing.assert_array_equal(shifted[:, 10:], img[:, :-10])

    def test_corners_map_through_the_combined_homography(self, upper_person):
        patches = decompose_garment(
            upper_person.image, upper_person.parsing, upper_person.pose, GarmentCategory.UPPER
        )
        target_layout = layout_service.build_layout(make_pose(dx=15, dy=-5), GarmentCategory.UPPER)
        for slot, patch in patches.patches.items():
            _, h = retarget_patch(patch, target_layout.quads[slot], CANVAS)
            combined = geometry_service.compose(h, patch.h_source_to_norm)
            for src, dst in zip(patch.source_quad.corners, target_layout.quads[slot].corners):
                mapped = geometry_service.apply_homography(combined, src)
                assert abs(mapped.x - dst.x) < 1e-6 and abs(mapped.y - dst.y) < 1e-6


class TestStitch:
    """Tests for the painter's-algorithm composite."""

    def test_single_patch(self):
        img = solid_rgba(CANVAS, (10, 10, 50, 50), (1, 2, 3))
        g = stitch([(PatchSlot.TORSO, img)])
        np.testing.assert_array_equal(g.image, img)
        np.testing.assert_array_equal(g.mask, img[..., 3] > 0)

    def test_disjoint_union(self):
        a = solid_rgba(CANVAS, (10, 10, 50, 50), (1, 2, 3))
        b = solid_rgba(CANVAS, (100, 100, 150, 150), (4, 5, 6))
        g = stitch([(PatchSlot.TORSO, a), (PatchSlot.NECK, b)])
        np.testing.assert_array_equal(g.mask, (a[..., 3] > 0) | (b[..., 3] > 0))

    def test_arm_is_drawn_over_torso(self):
        torso = solid_rgba(CANVAS, (50, 50, 150, 250), (200, 0, 0))
        arm = solid_rgba(CANVAS, (120, 60, 180, 120), (0, 200, 0))
        g = stitch([(PatchSlot.LEFT_UPPER_ARM, arm), (PatchSlot.TORSO, torso)])
        assert tuple(g.image[100, 130, :3]) == (0, 200, 0)
        assert tuple(g.image[200, 60, :3]) == (200, 0, 0)

    def test_canvas_mismatch(self):
        a = solid_rgba(CANVAS, (0, 0, 5, 5), (1, 1, 1))
        b = solid_rgba((100, 100), (0, 0, 5, 5), (1, 1, 1))
        with pytest.raises(CanvasMismatchError):
            stitch([(PatchSlot.TORSO, a), (PatchSlot.NECK, b)])


# ─── Tests: Warping ──────────────────────────────────────────────────────────


class TestWarpGarment:
    """Tests for decomposition followed by retargeting."""

    def test_same_pose_round_trip(self):
        """Textured fixtures: interior MAE ≤ 2/255 per slot and IoU ≥ 0.95 against the garment."""
        rng = np.random.default_rng(21)
        for _ in range(10):
            person = make_person(make_pose(jitter=rng), textured=True)
            patches, warped = warp_garment(
                person.image, person.parsing, person.pose, person.pose, GarmentCategory.UPPER
            )
            garment = mask_service.garment_mask(person.parsing, GarmentCategory.UPPER)
            layout = layout_service.build_layout(person.pose, GarmentCategory.UPPER)
            coverage = {slot: quad_coverage(layout.quads[slot]) for slot in layout.present_slots}

            for slot in (PatchSlot.TORSO, PatchSlot.LEFT_UPPER_ARM):
                img, _ = retarget_patch(patches.patches[slot], layout.quads[slot], CANVAS)
                interior = erode(coverage[slot] & garment) & (img[..., 3] > 0)
                assert interior.sum() > 100
                err = np.abs(img[interior, :3].astype(int) - person.image[interior].astype(int))
                assert err.mean() <= 2.0

            expected = garment & np.any(list(coverage.values()), axis=0)
            iou = (warped.mask & expected).sum() / (warped.mask | expected).sum()
            assert iou >= 0.95

    def test_same_pose_round_trip_on_every_slot(self):
        rng = np.random.default_rng(22)
        for _ in range(3):
            person = make_person(make_pose(jitter=rng), wear=("dress",), textured=True)
            patches, _ = warp_garment(person.image, person.parsing, person.pose, person.pose, GarmentCategory.DRESS)
            garment = mask_service.garment_mask(person.parsing, GarmentCategory.DRESS)
            layout = layout_service.build_layout(person.pose, GarmentCategory.DRESS)
            assert set(patches.present_slots) == set(PatchSlot)

            for slot in patches.present_slots:
                img, _ = retarget_patch(patches.patches[slot], layout.quads[slot], CANVAS)
                interior = erode(quad_coverage(layout.quads[slot]) & garment) & (img[..., 3] > 0)
                assert interior.sum() > 20, slot
                err = np.abs(img[interior, :3].astype(int) - person.image[interior].astype(int))
                assert err.mean() <= 2.0, slot

    def test_uniform_garment_stays_uniform(self, upper_person):
        _, warped = warp_garment(
            upper_person.image,
            upper_person.parsing,
            upper_person.pose,
            make_pose(dx=20, dy=10),
            GarmentCategory.UPPER,
        )
        assert warped.mask.any()
        assert (warped.image[warped.mask, :3] == UPPER_COLOUR).all()

    def test_translation_equivariance(self, upper_person):
        args = (upper_person.image, upper_person.parsing, upper_person.pose)
        _, base = warp_garment(*args, upper_person.pose, GarmentCategory.UPPER)
        _, moved = warp_garment(*args, transform_pose(upper_person.pose, dy=20), GarmentCategory.UPPER)
        np.testing.assert_array_equal(moved.image[20:], base.image[:-20])

    def test_drops_slots_missing_from_the_target(self, upper_person):
        target = make_pose(confidence={Joint.L_WRIST: 0.0})
        kept, _ = warp_garment(
            upper_person.image, upper_person.parsing, upper_person.pose, target, GarmentCategory.UPPER
        )
        assert PatchSlot.LEFT_LOWER_ARM not in kept.patches
        assert len(kept.patches) == 9

    def test_refined_homographies_are_reported(self, upper_person):
        patches = decompose_garment(
            upper_person.image, upper_person.parsing, upper_person.pose, GarmentCategory.UPPER
        )
        _, warped, used = warp_patchset(patches, make_pose(dx=10), refine=True)
        assert set(used) == set(patches.present_slots)
        assert warped.mask.any()

    def test_shared_slots_must_not_be_empty(self):
        with pytest.raises(NoCommonSlotsError):
            shared_slots([PatchSlot.NECK], [PatchSlot.TORSO])


# ─── Tests: Random Erasing ───────────────────────────────────────────────────


def square_garment(size: int = 24, canvas: int = 32) -> WarpedGarment:
    img = np.zeros((canvas, canvas, 4), dtype=np.uint8)
    img[:size, :size] = (10, 20, 30, 255)
    return WarpedGarment(img)


class TestRandomErase:
    """Tests for the erasing augmentation."""

    def test_alpha_zero_is_identity(self):
        g = square_garment()
        for seed in range(20):
            assert random_erase(g, seed, alpha=0.0) == g

    def test_deterministic_per_seed(self):
        g = square_garment(96, 128)
        assert random_erase(g, 42, alpha=1.0) == random_erase(g, 42, alpha=1.0)

    def test_erased_fraction_within_bounds(self):
        params = EraseParams()
        g = square_garment(96, 128)
        total = int(g.mask.sum())
        for seed in range(200):
            out = random_erase(g, seed, alpha=1.0, params=params)
            erased = total - int(out.mask.sum())
            assert params.area_bounds[0] * total <= erased <= params.area_bounds[1] * total
            assert not (out.mask & ~g.mask).any()

    def test_application_rate(self):
        """10 000 seeds at alpha 0.9: erasure applied within three standard deviations."""
        g = square_garment()
        applied = sum(random_erase(g, seed, alpha=0.9) != g for seed in range(10_000))
        assert abs(applied / 10_000 - 0.9) <= 0.009

    def test_empty_garment(self):
        g = WarpedGarment.empty((16, 16))
        assert random_erase(g, 0, alpha=1.0) == g
