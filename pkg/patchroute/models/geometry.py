"""Projective geometry value types: points, homographies and quadrilaterals."""

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from patchroute.core.exceptions import DegenerateQuadError, SingularSystemError

# ─── Tolerances ──────────────────────────────────────────────────────────────

DET_EPS = 1e-12
BOTTOM_RIGHT_EPS = 1e-9
UNIT_NORM_TOL = 16 * np.finfo(np.float64).eps
MIN_QUAD_AREA = 1.0
MIN_TRIANGLE_AREA = 1e-6


# ─── Point ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Point2:
    """Pixel coordinates; x grows to the right, y grows downwards."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point coordinates must be finite, got ({self.x}, {self.y})")

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


def to_points(coords: Iterable[Sequence[float]]) -> tuple[Point2, ...]:
    """Build points from any iterable of (x, y) pairs."""
    return tuple(Point2(float(x), float(y)) for x, y in coords)


def points_array(points: Iterable[Point2]) -> np.ndarray:
    """Stack points into an (N, 2) float64 array."""
    return np.array([[p.x, p.y] for p in points], dtype=np.float64).reshape(-1, 2)


# ─── Homography ──────────────────────────────────────────────────────────────


def normalize_scale(m: np.ndarray) -> np.ndarray:
    """
    Fix the projective scale: m[2,2] = 1 unless it is ~0, then unit Frobenius norm.

    A matrix already in normal form is returned as is, so normalizing twice is bit-exact.
    """
    m = np.asarray(m, dtype=np.float64)
    if abs(m[2, 2]) >= BOTTOM_RIGHT_EPS:
        return m if m[2, 2] == 1.0 else m / m[2, 2]
    norm = np.linalg.norm(m)
    return m if abs(norm - 1.0) <= UNIT_NORM_TOL else m / norm


@dataclass(frozen=True, eq=False)
class Homography:
    """Invertible 3×3 projective transform stored in scale-normalized form."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"Homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SingularSystemError("Homography has non-finite entries")
        m = normalize_scale(m)
        if abs(np.linalg.det(m)) <= DET_EPS:
            raise SingularSystemError("Homography is not invertible", det=float(np.linalg.det(m)))
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "Homography":
        """Rebuild from the row-major 9-element serialization."""
        if len(values) != 9:
            raise ValueError(f"Homography needs 9 values, got {len(values)}")
        return cls(np.array([float(v) for v in values], dtype=np.float64).reshape(3, 3))

    def to_list(self) -> list[float]:
        return [float(v) for v in self.m.reshape(-1)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.m, other.m))

    def __hash__(self) -> int:
        return hash(self.m.tobytes())

    def __repr__(self) -> str:
        return f"Homography({self.m.tolist()})"


# ─── Quadrilateral ───────────────────────────────────────────────────────────


def signed_area(corners: np.ndarray) -> float:
    """Shoelace area; positive when corners run counter-clockwise in raw coordinates."""
    x, y = corners[:, 0], corners[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return 0.5 * abs(float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])))


def min_triangle_area(corners: np.ndarray) -> float:
    """Smallest area over the four corner triples (zero for a collinear triple)."""
    return min(
        _triangle_area(corners[i], corners[j], corners[k])
        for i, j, k in ((0, 1, 2), (1, 2, 3), (2, 3, 0), (3, 0, 1))
    )


def _segments_cross(p1: np.ndarray, p2: np.ndarray, q1: np.ndarray, q2: np.ndarray) -> bool:
    def orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
        return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(corners: np.ndarray) -> bool:
    """True when opposite edges do not intersect."""
    c = corners
    return not (_segments_cross(c[0], c[1], c[2], c[3]) or _segments_cross(c[1], c[2], c[3], c[0]))


def check_quadruple(corners: np.ndarray) -> None:
    """Reject point quadruples with a collinear triple or (near-)zero area."""
    if corners.shape != (4, 2) or not np.all(np.isfinite(corners)):
        raise DegenerateQuadError("Expected four finite corner points", shape=list(corners.shape))
    tri = min_triangle_area(corners)
    if tri <= MIN_TRIANGLE_AREA:
        raise DegenerateQuadError("Corner triple is collinear", min_triangle_area=tri)


@dataclass(frozen=True)
class Quadrilateral:
    """Four corners in semantic order: anchor first, then counter-clockwise as displayed."""

    corners: tuple[Point2, Point2, Point2, Point2]

    def __post_init__(self) -> None:
        if len(self.corners) != 4:
            raise DegenerateQuadError(f"Quadrilateral needs 4 corners, got {len(self.corners)}")
        arr = self.as_array()
        check_quadruple(arr)
        area = abs(signed_area(arr))
        if area <= MIN_QUAD_AREA:
            raise DegenerateQuadError("Quadrilateral area is too small", area=area)
        if not is_simple(arr):
            raise DegenerateQuadError("Quadrilateral edges intersect")

    @classmethod
    def from_coords(cls, coords: Iterable[Sequence[float]]) -> "Quadrilateral":
        return cls(to_points(coords))  # type: ignore[arg-type]

    def as_array(self) -> np.ndarray:
        return points_array(self.corners)

    @property
    def area(self) -> float:
        return abs(signed_area(self.as_array()))
