"""Service layer wiring repositories and library operations into the command pipeline."""

import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from patchroute.core.config import RunConfig
from patchroute.core.exceptions import (
    DimensionMismatchError,
    MalformedJsonError,
    MissingLayerError,
    NoGarmentPixelsError,
)
from patchroute.models.bundle import TryOnBundle
from patchroute.models.layout import GarmentCategory, InferredCategory
from patchroute.models.parsing import ParsingMap
from patchroute.models.patches import PatchSet, WarpedGarment
from patchroute.models.person import PersonRecord
from patchroute.repositories import artifact_repository, patchset_repository
from patchroute.repositories.person_repository import PersonRepository, infer_category
from patchroute.schemas.edit import EditScript, ReplacePatch, edit_script_adapter
from patchroute.services import edit_service, mask_service, warp_service

logger = logging.getLogger(__name__)

WARPED_FILE = "warped.png"
MASK_FILE = "mask.png"
HOMOGRAPHY_FILE = "homographies.json"
GARMENT_MASK_FILE = "garment_mask.png"
ALIGN_MASK_FILE = "align_mask.png"
MISALIGN_MASK_FILE = "misalign_mask.png"
GARMENT_ONLY_FILE = "warped_in_garment.png"
PREVIEW_FILE = "preview.png"


class PipelineService:
    """Runs the decompose / retarget / masks / edit steps for one run configuration."""

    def __init__(self, config: RunConfig, people: PersonRepository) -> None:
        self._config = config
        self._people = people

    @property
    def config(self) -> RunConfig:
        return self._config

    # ─── Helpers ───────────────────────────────────────────────────────

    def load_person(self, ref: str | Path) -> PersonRecord:
        """Load a person and check it lives on the configured canvas."""
        person = self._people.load(ref)
        if person.canvas != self._config.canvas:
            raise DimensionMismatchError(
                "Person canvas differs from the configured canvas",
                person=person.id,
                canvas=list(person.canvas),
                expected=list(self._config.canvas),
            )
        return person

    def resolve_category(self, parsing: ParsingMap, requested: str) -> GarmentCategory:
        """The requested category, or the one inferred from the parsing for `auto`."""
        if requested != "auto":
            return GarmentCategory(requested)
        inferred = infer_category(parsing)
        if inferred is InferredCategory.UPPER_AND_LOWER:
            logger.warning("Person wears upper and lower garments; decomposing the upper one")
        return inferred.garment_category

    # ─── Decompose ─────────────────────────────────────────────────────

    def decompose(self, person_ref: str | Path, out_archive: Path, category: str = "auto") -> PatchSet:
        """Decompose a person's garment into normalized patches and write the archive."""
        person = self.load_person(person_ref)
        resolved = self.resolve_category(person.parsing, category)
        patches = warp_service.decompose_garment(
            person.image, person.parsing, person.pose, resolved, self._config.layout
        )
        patchset_repository.save_patchset(patches, out_archive)
        logger.info(
            "Garment decomposed",
            extra={"person": person.id, "category": resolved.value, "slots": len(patches.patches)},
        )
        return patches

    # ─── Retarget ──────────────────────────────────────────────────────

    def warp(
        self,
        patches: PatchSet,
        target: PersonRecord,
        erase_seed: Optional[int] = None,
        alpha: Optional[float] = None,
        erase: bool = True,
    ) -> tuple[WarpedGarment, dict]:
        """Retarget, stitch and (with probability alpha) erase."""
        cfg = self._config
        _, warped, homographies = warp_service.warp_patchset(
            patches, target.pose, cfg.layout, cfg.z_order, cfg.refine_homographies, cfg.lm
        )
        if erase:
            seed = cfg.seed if erase_seed is None else erase_seed
            warped = warp_service.random_erase(warped, seed, cfg.erase.alpha if alpha is None else alpha, cfg.erase)
        return warped, homographies

    def write_warp(self, out_dir: Path, warped: WarpedGarment, homographies: dict) -> list[str]:
        out_dir = Path(out_dir)
        artifact_repository.save_warped_garment(out_dir / WARPED_FILE, warped)
        artifact_repository.save_mask(out_dir / MASK_FILE, warped.mask)
        artifact_repository.save_homographies(out_dir / HOMOGRAPHY_FILE, homographies)
        return [WARPED_FILE, MASK_FILE, HOMOGRAPHY_FILE]

    def retarget(
        self,
        archive: Path,
        target_ref: str | Path,
        out_dir: Path,
        erase_seed: Optional[int] = None,
        alpha: Optional[float] = None,
    ) -> WarpedGarment:
        """Retarget an archive to a target person; writes G_t, M_t and the homographies."""
        patches = patchset_repository.load_patchset(archive)
        target = self.load_person(target_ref)
        warped, homographies = self.warp(patches, target, erase_seed, alpha)
        self.write_warp(out_dir, warped, homographies)
        return warped

    # ─── Masks ─────────────────────────────────────────────────────────

    def masks(
        self,
        g_t_path: Path,
        m_t_path: Path,
        parsing_path: Path,
        out_dir: Path,
        category: str = "auto",
        labels: Optional[Path] = None,
    ) -> None:
        """Write M_g, M_align, M_misalign and the warp restricted to M_g."""
        g_t = artifact_repository.load_warped_garment(g_t_path)
        m_t = artifact_repository.load_mask(m_t_path)
        parsing = self._people.load_parsing(parsing_path, labels)
        resolved = self.resolve_category(parsing, category)
        m_g = mask_service.garment_mask(parsing, resolved)
        if not m_g.any():
            raise NoGarmentPixelsError("Parsing has no pixel of the requested garment", category=resolved.value)
        m_align, m_misalign = mask_service.misalignment_masks(m_g, m_t)
        out_dir = Path(out_dir)
        artifact_repository.save_mask(out_dir / GARMENT_MASK_FILE, m_g)
        artifact_repository.save_mask(out_dir / ALIGN_MASK_FILE, m_align)
        artifact_repository.save_mask(out_dir / MISALIGN_MASK_FILE, m_misalign)
        artifact_repository.save_warped_garment(
            out_dir / GARMENT_ONLY_FILE, mask_service.mask_out_of_garment(g_t, m_g)
        )

    # ─── Edit ──────────────────────────────────────────────────────────

    def load_script(self, script_path: Path) -> EditScript:
        try:
            return edit_script_adapter.validate_python(artifact_repository.read_json(script_path))
        except ValidationError as exc:
            raise MalformedJsonError(
                "Edit script does not match its schema",
                path=str(script_path),
                errors=exc.errors(include_url=False, include_context=False),
            ) from exc

    def _load_layer(self, ref: Optional[Path], lower: bool) -> Optional[PatchSet]:
        """An archive as stored, or a person directory decomposed on the fly."""
        if ref is None:
            return None
        if patchset_repository.is_archive(ref):
            return patchset_repository.load_patchset(ref)
        person = self.load_person(ref)
        if lower:
            category = GarmentCategory.LOWER
        elif infer_category(person.parsing) is InferredCategory.DRESS:
            category = GarmentCategory.DRESS
        else:
            category = GarmentCategory.UPPER
        return warp_service.decompose_garment(person.image, person.parsing, person.pose, category, self._config.layout)

    def edit(
        self,
        target_ref: str | Path,
        script_path: Path,
        out_dir: Path,
        upper: Optional[Path] = None,
        lower: Optional[Path] = None,
    ) -> TryOnBundle:
        """
        Apply an edit script to a bundle; writes the edited archives and a composite preview.

        Archives are written in the format they were read in (directory or zip)
        under the input's name.
        """
        if upper is None and lower is None:
            raise MissingLayerError("An edit needs an upper or a lower garment")
        cfg = self._config
        target = self.load_person(target_ref)
        script = self.load_script(script_path)
        donors = {
            cmd.donor: patchset_repository.load_patchset(self._donor_path(cmd.donor, script_path))
            for cmd in script
            if isinstance(cmd, ReplacePatch)
        }
        bundle = edit_service.build_bundle(
            target.pose,
            upper=self._load_layer(upper, lower=False),
            lower=self._load_layer(lower, lower=True),
            params=cfg.layout,
            z_order=cfg.z_order,
        )
        bundle = edit_service.apply_edit_script(bundle, script, donors, cfg.z_order)

        out_dir = Path(out_dir)
        for ref, layer in ((upper, bundle.upper), (lower, bundle.lower)):
            if ref is not None and layer is not None:
                patchset_repository.save_patchset(layer.patches, out_dir / self._archive_name(Path(ref)))
        artifact_repository.save_warped_garment(out_dir / PREVIEW_FILE, edit_service.render_bundle(bundle))
        logger.info("Edit script applied", extra={"commands": len(script), "out_dir": str(out_dir)})
        return bundle

    @staticmethod
    def _donor_path(donor: str, script_path: Path) -> Path:
        path = Path(donor)
        return path if path.is_absolute() else Path(script_path).parent / path

    @staticmethod
    def _archive_name(ref: Path) -> str:
        if patchset_repository.is_archive(ref):
            return ref.name
        return f"{ref.name}.zip"

    # ─── Inspect ───────────────────────────────────────────────────────

    def inspect(self, path: Path) -> str:
        """Human-readable summary of an archive or a person."""
        path = Path(path)
        if patchset_repository.is_archive(path):
            patches = patchset_repository.load_patchset(path)
            width, height = patches.source_pose.canvas_size
            lines = [
                f"archive: {path}",
                f"category: {patches.category.value}",
                f"source canvas: {width}x{height}",
                f"slots: {len(patches.patches)}",
            ]
            for slot, patch in patches.patches.items():
                valid = int(patch.valid_mask.sum())
                lines.append(f"  {slot.value:<16} valid {valid:>5} px  quad area {patch.source_quad.area:.1f}")
            return "\n".join(lines)

        person = self._people.load(path)
        width, height = person.canvas
        lines = [f"person: {person.id}", f"canvas: {width}x{height}"]
        try:
            lines.append(f"category: {infer_category(person.parsing).value}")
        except NoGarmentPixelsError:
            lines.append("category: none")
        confident = int((person.pose.confidence >= self._config.layout.min_confidence).sum())
        lines.append(f"confident joints: {confident}/{len(person.pose.confidence)}")
        return "\n".join(lines)
