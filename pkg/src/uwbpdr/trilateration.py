"""2D position fixes from anchor ranges via Gauss-Newton least squares.

The solver minimizes sum_i (||p - a_i|| - r_i)^2 and is deliberately naive
about outliers: NLOS handling belongs to the reliability gate downstream, so
a biased range shows up here only as an inflated residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InsufficientGeometryError
from .world import RangeSet

MAX_ITERATIONS = 50
STEP_TOLERANCE = 1e-6
# Additive damping on the normal-equations diagonal; guards near-singular
# Jacobians without measurably moving well-conditioned solutions.
DAMPING = 1e-9
# Relative second-singular-value cutoff below which anchors are collinear.
_RANK_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PositionFix:
    """One trilateration solution.

    residual_rms is the RMS range residual at the returned point; under
    NLOS-biased ranges it grows even when the fix looks plausible, which is
    what the downstream gate exploits.
    """

    t: float
    p: np.ndarray
    residual_rms: float
    iterations: int
    converged: bool


def predicted_range(p, anchor) -> float:
    """Euclidean distance from a candidate position to one anchor."""
    p = np.asarray(p, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    return float(np.hypot(p[0] - anchor[0], p[1] - anchor[1]))


def _check_geometry(anchor_xy: np.ndarray) -> None:
    if len(anchor_xy) < 3:
        raise InsufficientGeometryError(
            f"need at least 3 ranges for a 2D fix, got {len(anchor_xy)}")
    centered = anchor_xy - anchor_xy.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] <= _RANK_TOLERANCE * max(s[0], 1.0):
        raise DegenerateGeometryError("anchors are collinear; 2D fix is unobservable")


def residuals(p: np.ndarray, anchor_xy: np.ndarray, r: np.ndarray) -> np.ndarray:
    d = np.hypot(anchor_xy[:, 0] - p[0], anchor_xy[:, 1] - p[1])
    return d - r


def trilaterate(ranges: RangeSet, anchors, initial_guess=None) -> PositionFix:
    """Gauss-Newton solve of the range equations at one epoch.

    Args:
        ranges: the epoch's measurements; anchor indices select rows of
            ``anchors``.
        anchors: (n, 2) known anchor positions, meters.
        initial_guess: starting point; defaults to the centroid of the
            participating anchors (inside the hull for typical layouts).

    Returns:
        PositionFix with converged=True when the step norm fell below
        STEP_TOLERANCE within MAX_ITERATIONS, False otherwise; the caller
        decides what to do with non-converged fixes.

    Raises:
        InsufficientGeometryError: fewer than 3 ranges.
        DegenerateGeometryError: participating anchors are collinear.
        ValueError: non-positive measured range.
    """
    anchors = np.asarray(anchors, dtype=float)
    idx = [m.anchor_index for m in ranges.ranges]
    r = np.array([m.measured_range for m in ranges.ranges], dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("measured ranges must be positive")
    anchor_xy = anchors[idx]
    _check_geometry(anchor_xy)

    if initial_guess is None:
        p = anchor_xy.mean(axis=0)
    else:
        p = np.asarray(initial_guess, dtype=float).copy()

    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        delta = np.column_stack([p[0] - anchor_xy[:, 0], p[1] - anchor_xy[:, 1]])
        dist = np.hypot(delta[:, 0], delta[:, 1])
        dist = np.maximum(dist, 1e-12)
        f = dist - r
        J = delta / dist[:, None]
        H = J.T @ J + DAMPING * np.eye(2)
        g = J.T @ f
        step = np.linalg.solve(H, g)
        p = p - step
        if float(np.hypot(step[0], step[1])) < STEP_TOLERANCE:
            converged = True
            break

    res = residuals(p, anchor_xy, r)
    rms = float(np.sqrt(np.mean(res ** 2)))
    return PositionFix(t=ranges.t, p=p, residual_rms=rms,
                       iterations=iterations, converged=converged)
