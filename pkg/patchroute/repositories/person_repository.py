"""Repository layer for person samples on disk."""

import logging
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from pydantic import ValidationError

from patchroute.core.exceptions import ArchiveIoError, MalformedJsonError, MissingFileError, NoGarmentPixelsError
from patchroute.models.layout import InferredCategory
from patchroute.models.parsing import DEFAULT_LABEL_TABLE, ParsingMap, SemanticClass
from patchroute.models.person import PersonRecord
from patchroute.repositories import artifact_repository
from patchroute.schemas.person import LabelTableFile, PersonManifest, PoseFile

logger = logging.getLogger(__name__)


def _parse(model: type, path: Path):
    try:
        return model.model_validate(artifact_repository.read_json(path))
    except ValidationError as exc:
        raise MalformedJsonError(
            f"{path.name} does not match its schema",
            path=str(path),
            errors=exc.errors(include_url=False, include_context=False),
        ) from exc


class PersonRepository:
    """Loads person samples from directories or manifest files, optionally under a root."""

    def __init__(
        self,
        root: Optional[Path] = None,
        label_table: Optional[Mapping[int, SemanticClass]] = None,
    ) -> None:
        self._root = Path(root) if root is not None else None
        self._label_table = dict(label_table or DEFAULT_LABEL_TABLE)

    # ─── Resolution ────────────────────────────────────────────────────

    def resolve(self, ref: str | Path) -> Path:
        """A path as given, or an id looked up under the root."""
        path = Path(ref)
        if path.exists():
            return path
        if self._root is not None and (self._root / str(ref)).exists():
            return self._root / str(ref)
        raise MissingFileError("Person not found", ref=str(ref), root=str(self._root) if self._root else None)

    # ─── Read ──────────────────────────────────────────────────────────

    def load_parsing(self, path: Path, labels: Optional[Path] = None) -> ParsingMap:
        """Indexed parsing PNG with the label table from `labels` or the repository default."""
        path = Path(path)
        img = artifact_repository.decode_png(artifact_repository.read_bytes(path), str(path))
        if img.mode not in ("P", "L"):
            raise ArchiveIoError("Parsing must be an 8-bit single-channel PNG", path=str(path))
        table = self._label_table if labels is None else _parse(LabelTableFile, Path(labels)).labels
        return ParsingMap(np.array(img, dtype=np.uint8), table)

    def load(self, ref: str | Path) -> PersonRecord:
        """
        Load and validate one person.

        Raises:
            MissingFileError: a required file is absent
            MalformedJsonError: pose, label or manifest JSON fails its schema
            DimensionMismatchError: image, parsing and pose canvases disagree
            UnknownLabelError: parsing uses labels missing from the table
        """
        path = self.resolve(ref)
        if path.is_file():
            manifest = _parse(PersonManifest, path)
            base = path.parent
            person_id = manifest.id or path.stem
        else:
            manifest = PersonManifest()
            base = path
            person_id = path.name
            if (base / "labels.json").is_file():
                manifest = manifest.model_copy(update={"labels": "labels.json"})

        pose_file = _parse(PoseFile, base / manifest.pose)
        image = artifact_repository.decode_png(
            artifact_repository.read_bytes(base / manifest.image), str(base / manifest.image)
        )
        record = PersonRecord(
            id=person_id,
            image=np.array(image.convert("RGB"), dtype=np.uint8),
            pose=pose_file.to_skeleton(),
            parsing=self.load_parsing(
                base / manifest.parsing, base / manifest.labels if manifest.labels is not None else None
            ),
        )
        logger.debug("Person loaded", extra={"person": person_id, "canvas": list(record.canvas)})
        return record


def load_person(dir_or_manifest: str | Path) -> PersonRecord:
    """Load a person directory (image.png, pose.json, parsing.png, optional labels.json) or manifest."""
    return PersonRepository().load(dir_or_manifest)


def infer_category(parsing: ParsingMap) -> InferredCategory:
    """
    Garment category from the classes present; a dress wins over everything else.

    Raises:
        NoGarmentPixelsError: no garment class is present
    """
    if parsing.class_mask({SemanticClass.DRESS}).any():
        return InferredCategory.DRESS
    upper = bool(parsing.class_mask({SemanticClass.UPPER_GARMENT}).any())
    lower = bool(parsing.class_mask({SemanticClass.LOWER_GARMENT}).any())
    if upper and lower:
        return InferredCategory.UPPER_AND_LOWER
    if upper:
        return InferredCategory.UPPER
    if lower:
        return InferredCategory.LOWER
    raise NoGarmentPixelsError("Parsing has no garment pixel")
