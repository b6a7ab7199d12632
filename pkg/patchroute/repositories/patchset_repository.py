"""Patch-set archives: a directory or zip holding manifest.json plus one RGBA PNG per slot."""

import hashlib
import io
import logging
import shutil
import tempfile
import zipfile
import zlib
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from patchroute.core.exceptions import (
    ArchiveIoError,
    CorruptArchiveError,
    MissingFileError,
    PatchRouteError,
)
from patchroute.models.geometry import Quadrilateral
from patchroute.models.patches import TEMPLATE_SIZE, NormalizedPatch, PatchSet
from patchroute.repositories import artifact_repository
from patchroute.schemas.archive import FORMAT_VERSION, ArchiveManifest, SlotEntry
from patchroute.schemas.person import PoseFile

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ZIP_DATE_TIME = (1980, 1, 1, 0, 0, 0)


def is_archive(path: Path) -> bool:
    """True for a zip file or a directory containing an archive manifest."""
    path = Path(path)
    return (path.is_file() and zipfile.is_zipfile(path)) or (path / MANIFEST).is_file()


# ─── Encoding ────────────────────────────────────────────────────────────────


def _members(p: PatchSet) -> list[tuple[str, bytes]]:
    """Archive members in write order: manifest first, then slots in canonical order."""
    files: list[tuple[str, bytes]] = []
    slots: dict[str, SlotEntry] = {}
    for slot, patch in p.patches.items():
        name = f"{slot.value}.png"
        data = artifact_repository.encode_png(patch.image)
        files.append((name, data))
        slots[slot.value] = SlotEntry(
            quad=[(c.x, c.y) for c in patch.source_quad.corners],
            homography=artifact_repository.homography_to_strings(patch.h_source_to_norm),
            file=name,
            sha256=hashlib.sha256(data).hexdigest(),
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "category": p.category.value,
        "source_pose": PoseFile.from_skeleton(p.source_pose).model_dump(mode="json"),
        "slots": {k: v.model_dump(mode="json") for k, v in slots.items()},
    }
    return [(MANIFEST, artifact_repository.dump_json(manifest)), *files]


def save_patchset(p: PatchSet, path: Path) -> None:
    """
    Write a patch set; a `.zip` path gives a zip archive, anything else a directory.

    The previous archive at `path` is replaced only once the new one is complete.

    Raises:
        ArchiveIoError: the archive cannot be written
    """
    path = Path(path)
    members = _members(p)
    if path.suffix.lower() == ".zip":
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, data in members:
                info = zipfile.ZipInfo(name, date_time=ZIP_DATE_TIME)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                zf.writestr(info, data)
        artifact_repository.atomic_write_bytes(path, buf.getvalue())
        return

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"))
        try:
            for name, data in members:
                (staging / name).write_bytes(data)
            if path.exists():
                shutil.rmtree(path)
            staging.rename(path)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
    except OSError as exc:
        raise ArchiveIoError(f"Cannot write archive {path}: {exc}", path=str(path)) from exc
    logger.info("Archive written", extra={"path": str(path), "slots": len(p.patches)})


# ─── Decoding ────────────────────────────────────────────────────────────────


class _ArchiveReader:
    """Uniform member access for directory and zip archives."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self._zip = zipfile.ZipFile(path) if path.is_file() else None

    def read(self, name: str) -> bytes:
        if self._zip is not None:
            try:
                return self._zip.read(name)
            except KeyError as exc:
                raise CorruptArchiveError("Archive member is missing", path=str(self.path), member=name) from exc
            except (zipfile.BadZipFile, zlib.error, EOFError, OSError) as exc:
                raise CorruptArchiveError(
                    f"Archive member is unreadable: {exc}", path=str(self.path), member=name
                ) from exc
        try:
            return artifact_repository.read_bytes(self.path / name)
        except MissingFileError as exc:
            raise CorruptArchiveError("Archive member is missing", path=str(self.path), member=name) from exc

    def close(self) -> None:
        if self._zip is not None:
            self._zip.close()


def load_patchset(path: Path) -> PatchSet:
    """
    Read a patch set written by `save_patchset`.

    Raises:
        MissingFileError: nothing exists at `path`
        CorruptArchiveError: manifest invalid, member missing or digest mismatch
        ArchiveIoError: the archive cannot be read
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError("Archive does not exist", path=str(path))
    try:
        reader = _ArchiveReader(path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise ArchiveIoError(f"Cannot open archive: {exc}", path=str(path)) from exc
    try:
        return _decode(reader)
    finally:
        reader.close()


def _decode(reader: _ArchiveReader) -> PatchSet:
    source = str(reader.path)
    try:
        manifest = ArchiveManifest.model_validate_json(reader.read(MANIFEST))
    except ValidationError as exc:
        raise CorruptArchiveError(
            "Archive manifest is invalid", path=source, errors=exc.errors(include_url=False, include_context=False)
        ) from exc

    patches: dict = {}
    for slot, entry in manifest.slots.items():
        data = reader.read(entry.file)
        if hashlib.sha256(data).hexdigest() != entry.sha256:
            raise CorruptArchiveError("Digest mismatch", path=source, member=entry.file)
        image = np.array(artifact_repository.decode_png(data, f"{source}:{entry.file}").convert("RGBA"))
        if image.shape != (TEMPLATE_SIZE, TEMPLATE_SIZE, 4):
            raise CorruptArchiveError("Patch image has the wrong size", path=source, member=entry.file)
        try:
            patches[slot] = NormalizedPatch(
                slot=slot,
                image=image,
                source_quad=Quadrilateral.from_coords(entry.quad),
                h_source_to_norm=artifact_repository.homography_from_strings(entry.homography),
            )
        except (ValueError, PatchRouteError) as exc:
            raise CorruptArchiveError(f"Invalid patch: {exc}", path=source, member=entry.file) from exc
    try:
        return PatchSet(category=manifest.category, patches=patches, source_pose=manifest.source_pose.to_skeleton())
    except (ValueError, PatchRouteError) as exc:
        raise CorruptArchiveError(f"Invalid patch set: {exc}", path=source) from exc

