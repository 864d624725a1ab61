"""Independent reference implementations the tests check the library against.

Everything here is deliberately written with different algorithms than the
library code: orientation tests instead of Liang-Barsky clipping, grid search
instead of Gauss-Newton, plain sorted lists instead of numpy medians. Slow
and simple on purpose.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# segment vs axis-aligned rectangle, via orientation tests
# ---------------------------------------------------------------------------

def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    """c collinear with a-b and inside its bounding box."""
    return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))


def segments_cross(p1, q1, p2, q2) -> bool:
    d1 = _orient(p2, q2, p1)
    d2 = _orient(p2, q2, q1)
    d3 = _orient(p1, q1, p2)
    d4 = _orient(p1, q1, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 \
            and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(p2, q2, p1):
        return True
    if d2 == 0 and _on_segment(p2, q2, q1):
        return True
    if d3 == 0 and _on_segment(p1, q1, p2):
        return True
    if d4 == 0 and _on_segment(p1, q1, q2):
        return True
    return False


def point_in_rect(p, lo, hi) -> bool:
    return lo[0] <= p[0] <= hi[0] and lo[1] <= p[1] <= hi[1]


def segment_hits_rect(p, q, lo, hi) -> bool:
    """True when segment p-q touches the rectangle [lo, hi] anywhere."""
    if point_in_rect(p, lo, hi) or point_in_rect(q, lo, hi):
        return True
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    edges = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    return any(segments_cross(p, q, a, b) for a, b in edges)


# ---------------------------------------------------------------------------
# positioning cost and grid search
# ---------------------------------------------------------------------------

def range_cost(p, anchors, r) -> float:
    """Sum of squared range residuals at candidate position p."""
    p = np.asarray(p, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    d = np.hypot(anchors[:, 0] - p[0], anchors[:, 1] - p[1])
    return float(np.sum((d - np.asarray(r, dtype=float)) ** 2))


def _lattice_cost(anchors, r, xs, ys):
    cost = np.zeros((len(xs), len(ys)))
    for (ax, ay), rj in zip(np.asarray(anchors, dtype=float), r):
        d = np.sqrt((xs - ax)[:, None] ** 2 + (ys - ay)[None, :] ** 2)
        cost += (d - rj) ** 2
    return cost


def grid_search_cost(anchors, r, lo, hi, fine: float = 0.01,
                     coarse: float = 0.05) -> float:
    """Minimum range cost on a fine lattice over the box [lo, hi].

    A coarse pass locates the basin, then the fine lattice (aligned to the
    global fine grid) is evaluated around it. Valid whenever the cost has a
    single basin inside the box, which holds for the well-spread anchor
    layouts the tests draw.
    """
    xs = np.arange(lo[0], hi[0] + coarse / 2, coarse)
    ys = np.arange(lo[1], hi[1] + coarse / 2, coarse)
    cost = _lattice_cost(anchors, r, xs, ys)
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    cx, cy = xs[i], ys[j]

    pad = 2 * coarse
    fx0 = max(lo[0], np.floor((cx - pad) / fine) * fine)
    fy0 = max(lo[1], np.floor((cy - pad) / fine) * fine)
    xs = np.arange(fx0, min(hi[0], cx + pad) + fine / 2, fine)
    ys = np.arange(fy0, min(hi[1], cy + pad) + fine / 2, fine)
    return float(np.min(_lattice_cost(anchors, r, xs, ys)))


# ---------------------------------------------------------------------------
# robust statistics, sorted-list style
# ---------------------------------------------------------------------------

def ref_median(values) -> float:
    s = sorted(float(v) for v in values)
    if not s:
        raise ValueError("empty")
    m = len(s) // 2
    if len(s) % 2 == 1:
        return s[m]
    return (s[m - 1] + s[m]) / 2.0


def ref_thresholds(values, alpha: float = 1.5, beta: float = 3.0,
                   floor: float = 0.05) -> tuple:
    med = ref_median(values)
    mad = ref_median([abs(v - med) for v in values])
    mad = max(mad, floor)
    return med + alpha * mad, med + beta * mad


def ref_gate_replay(deltas, window_len: int = 10, alpha: float = 1.5,
                    beta: float = 3.0, floor: float = 0.05,
                    persistence_n: int = 3) -> list:
    """Step-by-step tier decisions for a delta script.

    Returns one (tier, consecutive_exceed, nlos_flag, theta1, theta2) row
    per delta; the delta joins the window before the thresholds are taken.
    """
    window: list = []
    count = 0
    rows = []
    for d in deltas:
        window.append(float(d))
        window = window[-window_len:]
        t1, t2 = ref_thresholds(window, alpha, beta, floor)
        if d > t2:
            count += 1
            tier = "high" if count >= persistence_n else "mid"
        elif d > t1:
            tier = "mid"
            count = 0
        else:
            tier = "low"
            count = 0
        rows.append((tier, count, tier == "high", t1, t2))
    return rows


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------

def scan_peaks(t, a, threshold: float, refractory: float) -> list:
    """Plain-loop peak scan mirroring the step-detector contract."""
    out = []
    last = None
    for i in range(1, len(a) - 1):
        if a[i] > a[i - 1] and a[i] >= a[i + 1] and a[i] > threshold:
            if last is None or t[i] - last >= refractory:
                out.append(i)
                last = t[i]
    return out
