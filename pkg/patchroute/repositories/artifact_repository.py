"""Reading and writing pipeline artifacts: PNG images and masks, feature maps, homographies."""

import io
import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from PIL import Image, UnidentifiedImageError

from patchroute.core.exceptions import ArchiveIoError, CorruptArchiveError, MalformedJsonError, MissingFileError
from patchroute.models.features import FeatureMap
from patchroute.models.geometry import Homography
from patchroute.models.layout import PatchSlot
from patchroute.models.patches import WarpedGarment

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"PRFM"
FEATURE_HEADER = struct.Struct("<4sIII")


# ─── Primitives ──────────────────────────────────────────────────────────────


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write to a temporary sibling, then rename over `path`."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise ArchiveIoError(f"Cannot write {path}: {exc}", path=str(path)) from exc
    logger.info("Artifact written", extra={"path": str(path), "bytes": len(data)})


def read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("File does not exist", path=str(path))
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ArchiveIoError(f"Cannot read {path}: {exc}", path=str(path)) from exc


def dump_json(payload: Any) -> bytes:
    """Canonical JSON bytes: sorted keys, two-space indent, trailing newline."""
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def read_json(path: Path) -> Any:
    try:
        return json.loads(read_bytes(path))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJsonError(f"Invalid JSON: {exc}", path=str(path)) from exc


def encode_png(array: np.ndarray) -> bytes:
    """PNG bytes of a uint8 array; H×W is grayscale, H×W×3 RGB, H×W×4 RGBA."""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes, source: str = "<bytes>") -> Image.Image:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
        return img
    except (UnidentifiedImageError, OSError) as exc:
        raise ArchiveIoError(f"Cannot decode PNG: {exc}", path=source) from exc


# ─── Images and Masks ────────────────────────────────────────────────────────


def save_rgba(path: Path, image: np.ndarray) -> None:
    atomic_write_bytes(path, encode_png(np.asarray(image, dtype=np.uint8)))


def load_rgba(path: Path) -> np.ndarray:
    return np.array(decode_png(read_bytes(path), str(path)).convert("RGBA"), dtype=np.uint8)


def save_mask(path: Path, mask: np.ndarray) -> None:
    """Binary mask as an 8-bit grayscale PNG (0 / 255)."""
    atomic_write_bytes(path, encode_png(np.asarray(mask, dtype=bool).astype(np.uint8) * 255))


def load_mask(path: Path) -> np.ndarray:
    img = decode_png(read_bytes(path), str(path))
    if img.mode == "RGBA":
        return np.array(img)[..., 3] > 0
    return np.array(img.convert("L")) > 127


def save_warped_garment(path: Path, g: WarpedGarment) -> None:
    save_rgba(path, g.image)


def load_warped_garment(path: Path) -> WarpedGarment:
    try:
        return WarpedGarment(load_rgba(path))
    except ValueError as exc:
        raise CorruptArchiveError(f"Invalid warped garment: {exc}", path=str(path)) from exc


# ─── Feature Maps ────────────────────────────────────────────────────────────


def encode_feature_map(f: FeatureMap) -> bytes:
    """16-byte header (magic, C, H, W as little-endian u32), then little-endian float32 values."""
    c, h, w = f.shape
    return FEATURE_HEADER.pack(FEATURE_MAGIC, c, h, w) + f.values.astype("<f4").tobytes(order="C")


def decode_feature_map(data: bytes, source: str = "<bytes>") -> FeatureMap:
    if len(data) < FEATURE_HEADER.size:
        raise CorruptArchiveError("Feature map is shorter than its header", path=source)
    magic, c, h, w = FEATURE_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise CorruptArchiveError("Feature map has a wrong magic number", path=source)
    expected = FEATURE_HEADER.size + 4 * c * h * w
    if len(data) != expected:
        raise CorruptArchiveError("Feature map size does not match its header", path=source, size=len(data))
    values = np.frombuffer(data, dtype="<f4", offset=FEATURE_HEADER.size).reshape(c, h, w)
    try:
        return FeatureMap(values.astype(np.float32))
    except ValueError as exc:
        raise CorruptArchiveError(str(exc), path=source) from exc


def save_feature_map(path: Path, f: FeatureMap) -> None:
    atomic_write_bytes(path, encode_feature_map(f))


def load_feature_map(path: Path) -> FeatureMap:
    return decode_feature_map(read_bytes(path), str(path))


# ─── Homographies ────────────────────────────────────────────────────────────


def homography_to_strings(h: Homography) -> list[str]:
    """Row-major entries with 17 significant digits, enough to restore every double."""
    return [format(v, ".17g") for v in h.to_list()]


def homography_from_strings(values: list[str]) -> Homography:
    return Homography.from_list([float(v) for v in values])


def save_homographies(path: Path, homographies: Mapping[PatchSlot, Homography]) -> None:
    payload = {slot.value: homography_to_strings(h) for slot, h in homographies.items()}
    atomic_write_bytes(path, dump_json(payload))


def load_homographies(path: Path) -> dict[PatchSlot, Homography]:
    payload = read_json(path)
    try:
        return {PatchSlot(slot): homography_from_strings(values) for slot, values in payload.items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise MalformedJsonError(f"Invalid homography file: {exc}", path=str(path)) from exc
