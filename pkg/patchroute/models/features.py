"""Feature maps consumed by the inpainting and modulation operations."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """C×H×W array of finite real values (float32 or float64)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 3:
            raise ValueError(f"Feature map must be C×H×W, got shape {values.shape}")
        if values.dtype not in (np.float32, np.float64):
            values = values.astype(np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("Feature map values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int, int]:
        c, h, w = self.values.shape
        return int(c), int(h), int(w)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return self.values.dtype == other.values.dtype and bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]
