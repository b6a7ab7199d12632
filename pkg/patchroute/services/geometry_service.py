"""Homography estimation, refinement, application, composition and inversion."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from patchroute.core.config import LmOptions
from patchroute.core.exceptions import DegenerateQuadError, PointAtInfinityError, SingularSystemError
from patchroute.models.geometry import Homography, Point2, check_quadruple, points_array

logger = logging.getLogger(__name__)

DEPTH_EPS = 1e-12
MAX_CONDITION = 1e12
NULL_SPACE_EPS = 1e-10
JACOBIAN_STEP = 1e-7


# ─── Application ─────────────────────────────────────────────────────────────


def project(m: np.ndarray, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Apply a 3×3 matrix to an (N, 2) array of points.

    Returns:
        Tuple of (mapped points, boolean mask of points with usable depth).
        Points at infinity are returned as NaN.
    """
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    w = m[2, 0] * xy[:, 0] + m[2, 1] * xy[:, 1] + m[2, 2]
    finite = np.abs(w) > DEPTH_EPS
    safe_w = np.where(finite, w, 1.0)
    out = np.empty_like(xy)
    out[:, 0] = (m[0, 0] * xy[:, 0] + m[0, 1] * xy[:, 1] + m[0, 2]) / safe_w
    out[:, 1] = (m[1, 0] * xy[:, 0] + m[1, 1] * xy[:, 1] + m[1, 2]) / safe_w
    out[~finite] = np.nan
    return out, finite


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Map one point; raises PointAtInfinityError when its projective depth vanishes."""
    m = h.m
    w = m[2, 0] * p.x + m[2, 1] * p.y + m[2, 2]
    if abs(w) <= DEPTH_EPS:
        raise PointAtInfinityError("Point maps to infinity", x=p.x, y=p.y, depth=float(w))
    return Point2(
        float((m[0, 0] * p.x + m[0, 1] * p.y + m[0, 2]) / w),
        float((m[1, 0] * p.x + m[1, 1] * p.y + m[1, 2]) / w),
    )


# ─── Group Operations ────────────────────────────────────────────────────────


def compose(a: Homography, b: Homography) -> Homography:
    """The transform that applies `b` first, then `a`."""
    return Homography(a.m @ b.m)


def invert(h: Homography) -> Homography:
    try:
        return Homography(np.linalg.inv(h.m))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("Homography cannot be inverted") from exc


# ─── Direct Linear Transform ─────────────────────────────────────────────────


def hartley_normalization(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Similarity that moves the centroid to the origin and the mean distance to √2.

    Returns:
        Tuple of (normalized points, 3×3 similarity matrix)
    """
    centroid = points.mean(axis=0)
    mean_dist = float(np.mean(np.linalg.norm(points - centroid, axis=1)))
    if mean_dist < 1e-12:
        raise DegenerateQuadError("Points are coincident")
    s = math.sqrt(2.0) / mean_dist
    t = np.array(
        [
            [s, 0.0, -s * centroid[0]],
            [0.0, s, -s * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    return (points - centroid) * s, t


def _dlt_rows(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    rows = np.zeros((2 * len(src), 9))
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        rows[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]
        rows[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]
    return rows


def _solve_normalized(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Solve the 8×8 system with h33 = 1; fall back to the SVD null space when h33 ≈ 0."""
    rows = _dlt_rows(src, dst)
    a, b = rows[:, :8], -rows[:, 8]
    cond = np.linalg.cond(a)
    if np.isfinite(cond) and cond < MAX_CONDITION:
        return np.append(np.linalg.solve(a, b), 1.0).reshape(3, 3)

    _, sv, vt = np.linalg.svd(rows)
    if sv[-2] < NULL_SPACE_EPS * sv[0]:
        raise SingularSystemError("DLT system is rank deficient", condition=float(cond))
    logger.debug("DLT fell back to the null-space solution", extra={"condition": float(cond)})
    return vt[-1].reshape(3, 3)


def estimate_homography_dlt(src: Sequence[Point2], dst: Sequence[Point2]) -> Homography:
    """
    Homography mapping four source corners onto four destination corners.

    Both quadruples are Hartley-normalized before the linear solve and the
    result is denormalized and scale-normalized.

    Raises:
        DegenerateQuadError: collinear triple or near-zero area
        SingularSystemError: the linear system is not solvable
    """
    src_arr, dst_arr = points_array(src), points_array(dst)
    check_quadruple(src_arr)
    check_quadruple(dst_arr)
    src_n, t_src = hartley_normalization(src_arr)
    dst_n, t_dst = hartley_normalization(dst_arr)
    h_n = _solve_normalized(src_n, dst_n)
    return Homography(np.linalg.inv(t_dst) @ h_n @ t_src)


# ─── Levenberg-Marquardt Refinement ──────────────────────────────────────────


@dataclass(frozen=True)
class LmResult:
    """Outcome of a refinement: costs[0] is the starting cost, one entry per accepted step."""

    homography: Homography
    costs: tuple[float, ...]
    iterations: int
    converged: bool


def _symmetric_residuals(m: np.ndarray, src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Forward and backward transfer residuals, or None when the model is unusable."""
    if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= DEPTH_EPS * np.abs(m).max() ** 3:
        return None
    forward, ok_f = project(m, src)
    backward, ok_b = project(np.linalg.inv(m), dst)
    if not (ok_f.all() and ok_b.all()):
        return None
    return np.concatenate([(forward - dst).ravel(), (backward - src).ravel()])


def symmetric_transfer_cost(h: Homography, src: np.ndarray, dst: np.ndarray) -> float:
    """Sum of squared forward plus backward reprojection errors, in px²."""
    r = _symmetric_residuals(h.m, np.asarray(src, dtype=np.float64), np.asarray(dst, dtype=np.float64))
    return math.inf if r is None else float(r @ r)


def levenberg_marquardt(
    h0: Homography,
    src: np.ndarray,
    dst: np.ndarray,
    opts: LmOptions,
) -> LmResult:
    """
    Minimize the symmetric transfer error starting from `h0`.

    Parameters are the nine entries of the homography expressed between the
    Hartley-normalized point sets, kept at unit Frobenius norm; residuals are
    measured in pixels. Steps are accepted only when they lower the cost.

    Raises:
        SingularSystemError: the damped normal equations could never be solved
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) < 4 or len(src) != len(dst):
        raise ValueError(f"Need at least 4 matching correspondences, got {len(src)} and {len(dst)}")

    start_cost = symmetric_transfer_cost(h0, src, dst)
    if start_cost <= opts.cost_floor:
        return LmResult(h0, (start_cost,), 0, True)

    _, t_src = hartley_normalization(src)
    _, t_dst = hartley_normalization(dst)
    t_dst_inv = np.linalg.inv(t_dst)

    def to_pixels(q: np.ndarray) -> np.ndarray:
        return t_dst_inv @ q.reshape(3, 3) @ t_src

    def residuals(q: np.ndarray) -> Optional[np.ndarray]:
        return _symmetric_residuals(to_pixels(q), src, dst)

    q = (t_dst @ h0.m @ np.linalg.inv(t_src)).reshape(-1)
    q = q / np.linalg.norm(q)
    r = residuals(q)
    if r is None:
        raise SingularSystemError("Initial homography is not usable for refinement")
    cost = float(r @ r)
    costs = [cost]
    damping = opts.initial_damping
    converged = False
    ever_solved = False
    iteration = 0

    for iteration in range(1, opts.max_iters + 1):
        jac = np.empty((r.size, 9))
        for k in range(9):
            step = np.zeros(9)
            step[k] = JACOBIAN_STEP
            r_plus, r_minus = residuals(q + step), residuals(q - step)
            if r_plus is None or r_minus is None:
                raise SingularSystemError("Jacobian evaluation left the valid domain")
            jac[:, k] = (r_plus - r_minus) / (2.0 * JACOBIAN_STEP)
        normal = jac.T @ jac
        gradient = jac.T @ r
        scaling = np.diag(np.maximum(np.diag(normal), 1e-12))

        accepted = False
        while damping <= opts.max_damping:
            try:
                delta = np.linalg.solve(normal + damping * scaling, -gradient)
            except np.linalg.LinAlgError:
                damping *= opts.damping_up
                continue
            ever_solved = True
            q_new = q + delta
            q_new = q_new / np.linalg.norm(q_new)
            r_new = residuals(q_new)
            new_cost = math.inf if r_new is None else float(r_new @ r_new)
            if new_cost < cost:
                accepted = True
                break
            damping *= opts.damping_up

        if not accepted:
            if not ever_solved:
                raise SingularSystemError("Normal equations not solvable at any damping")
            converged = True
            break

        decrease = (cost - new_cost) / cost
        q, r, cost = q_new, r_new, new_cost
        costs.append(cost)
        damping = max(damping / opts.damping_down, 1e-300)
        logger.debug("LM step accepted", extra={"iteration": iteration, "cost": cost, "damping": damping})
        if decrease < opts.tol or cost <= opts.cost_floor:
            converged = True
            break

    refined = Homography(to_pixels(q))
    if symmetric_transfer_cost(refined, src, dst) > start_cost:
        return LmResult(h0, (start_cost,), iteration, converged)
    return LmResult(refined, tuple(costs), iteration, converged)


def refine_homography_lm(
    h0: Homography,
    correspondences: Sequence[tuple[Point2, Point2]],
    opts: Optional[LmOptions] = None,
) -> Homography:
    """
    Refine a homography over N ≥ 4 (source, destination) point pairs.

    The returned homography never has a larger symmetric transfer error than `h0`.
    """
    if len(correspondences) < 4:
        raise ValueError(f"Need at least 4 correspondences, got {len(correspondences)}")
    src = points_array(p for p, _ in correspondences)
    dst = points_array(q for _, q in correspondences)
    return levenberg_marquardt(h0, src, dst, opts or LmOptions()).homography
