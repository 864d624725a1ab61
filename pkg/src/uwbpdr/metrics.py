"""Trajectory-error metrics and their report-ready serializations.

Estimates are matched to ground truth by nearest timestamp within a caller
supplied tolerance (no spatial alignment; everything already lives in the
anchor frame). Errors are per-sample Euclidean distances, summarized as
mean/RMSE/max, an empirical CDF, per-visibility-segment stats, and quartiles
with 1.5*IQR whiskers. Quartiles interpolate linearly between closest ranks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class AlignedTrajectory:
    """Estimate/truth pairs on a common clock with visibility labels."""

    times: np.ndarray      # s
    estimates: np.ndarray  # (n, 2) m
    truths: np.ndarray     # (n, 2) m
    segments: tuple        # per-pair LOS/NLOS label

    def __post_init__(self) -> None:
        n = len(self.times)
        if not (len(self.estimates) == len(self.truths) == len(self.segments) == n):
            raise ConfigError("aligned trajectory field lengths differ")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ConfigError("aligned trajectory must be time-ordered")


@dataclass(frozen=True)
class Quartiles:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float


@dataclass(frozen=True)
class AteSummary:
    mean: float
    rmse: float
    max: float
    cdf: tuple           # ((error, cumulative fraction), ...), ends at 1.0
    per_segment: dict    # label -> (mean, rmse, max)
    quartiles: Quartiles


def align_trajectories(est_times, est_positions, gt_times, gt_positions,
                       tolerance: float, gt_segments=None) -> AlignedTrajectory:
    """Pairs each estimate with the nearest ground-truth sample.

    Estimates with no ground-truth sample within ``tolerance`` seconds are
    dropped; duplicates are impossible because estimates keep their own
    clock and only borrow the matched truth.

    Args:
        est_times: estimate timestamps, increasing.
        est_positions: (n, 2) estimated positions.
        gt_times: ground-truth timestamps, increasing.
        gt_positions: (m, 2) true positions.
        tolerance: max |t_est - t_gt| for a valid pair, s.
        gt_segments: optional per-ground-truth-sample LOS/NLOS labels;
            defaults to LOS everywhere.

    Returns:
        AlignedTrajectory over the matched pairs.
    """
    est_times = np.asarray(est_times, dtype=float)
    est_positions = np.asarray(est_positions, dtype=float)
    gt_times = np.asarray(gt_times, dtype=float)
    gt_positions = np.asarray(gt_positions, dtype=float)
    if gt_segments is None:
        gt_segments = np.full(len(gt_times), "LOS", dtype=object)
    else:
        gt_segments = np.asarray(gt_segments, dtype=object)

    right = np.searchsorted(gt_times, est_times)
    left = np.clip(right - 1, 0, len(gt_times) - 1)
    right = np.clip(right, 0, len(gt_times) - 1)
    pick_right = np.abs(gt_times[right] - est_times) < np.abs(gt_times[left] - est_times)
    nearest = np.where(pick_right, right, left)
    ok = np.abs(gt_times[nearest] - est_times) <= tolerance

    return AlignedTrajectory(times=est_times[ok],
                             estimates=est_positions[ok],
                             truths=gt_positions[nearest[ok]],
                             segments=tuple(gt_segments[nearest[ok]]))


def trajectory_errors(traj: AlignedTrajectory) -> np.ndarray:
    diff = traj.estimates - traj.truths
    return np.hypot(diff[:, 0], diff[:, 1])


def ate_rmse(traj: AlignedTrajectory) -> float:
    """Root-mean-square of the per-sample Euclidean position errors."""
    if len(traj.times) == 0:
        raise ConfigError("cannot evaluate an empty trajectory")
    return float(np.sqrt(np.mean(trajectory_errors(traj) ** 2)))


def _stats(errors: np.ndarray) -> tuple:
    return (float(np.mean(errors)),
            float(np.sqrt(np.mean(errors ** 2))),
            float(np.max(errors)))


def ate_summary(traj: AlignedTrajectory) -> AteSummary:
    """Full error summary for one run.

    The CDF holds one point per distinct error value; quartiles use linear
    interpolation between closest ranks and whiskers extend to the most
    extreme samples within 1.5*IQR of the quartiles.

    Raises:
        ConfigError: empty trajectory.
    """
    if len(traj.times) == 0:
        raise ConfigError("cannot summarize an empty trajectory")
    errors = trajectory_errors(traj)
    mean, rmse, emax = _stats(errors)

    values = np.sort(errors)
    distinct, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / len(values)
    fractions[-1] = 1.0
    cdf = tuple((float(e), float(f)) for e, f in zip(distinct, fractions))

    per_segment = {}
    labels = np.asarray(traj.segments, dtype=object)
    for label in sorted(set(traj.segments)):
        per_segment[label] = _stats(errors[labels == label])

    q1, med, q3 = (float(q) for q in np.percentile(errors, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    inside = errors[(errors >= q1 - 1.5 * iqr) & (errors <= q3 + 1.5 * iqr)]
    quartiles = Quartiles(q1=q1, median=med, q3=q3,
                          whisker_low=float(np.min(inside)),
                          whisker_high=float(np.max(inside)))
    return AteSummary(mean=mean, rmse=rmse, max=emax, cdf=cdf,
                      per_segment=per_segment, quartiles=quartiles)


def smooth_postprocess(positions, window: int) -> list:
    """Centered moving average over (t, position) pairs.

    Edge samples average over the shrunken window that fits; window=1 is the
    identity. Timestamps pass through untouched.

    Raises:
        ConfigError: window even or < 1.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigError("smoothing window must be odd and >= 1")
    n = len(positions)
    if n == 0 or window == 1:
        return [(t, np.asarray(p, dtype=float).copy()) for t, p in positions]
    times = [t for t, _ in positions]
    xy = np.stack([np.asarray(p, dtype=float) for _, p in positions])
    half = window // 2
    out = []
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out.append((times[i], xy[lo:hi].mean(axis=0)))
    return out


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def summary_to_dict(summary: AteSummary) -> dict:
    return {
        "mean": summary.mean,
        "rmse": summary.rmse,
        "max": summary.max,
        "cdf": [[e, f] for e, f in summary.cdf],
        "per_segment": {label: {"mean": s[0], "rmse": s[1], "max": s[2]}
                        for label, s in summary.per_segment.items()},
        "quartiles": {"q1": summary.quartiles.q1, "median": summary.quartiles.median,
                      "q3": summary.quartiles.q3,
                      "whisker_low": summary.quartiles.whisker_low,
                      "whisker_high": summary.quartiles.whisker_high},
    }


def summary_from_dict(doc: dict) -> AteSummary:
    q = doc["quartiles"]
    return AteSummary(
        mean=float(doc["mean"]), rmse=float(doc["rmse"]), max=float(doc["max"]),
        cdf=tuple((float(e), float(f)) for e, f in doc["cdf"]),
        per_segment={label: (float(s["mean"]), float(s["rmse"]), float(s["max"]))
                     for label, s in doc["per_segment"].items()},
        quartiles=Quartiles(q1=float(q["q1"]), median=float(q["median"]),
                            q3=float(q["q3"]), whisker_low=float(q["whisker_low"]),
                            whisker_high=float(q["whisker_high"])))


def write_summary_json(summary: AteSummary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary_to_dict(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path: str | Path) -> AteSummary:
    with open(path, encoding="utf-8") as fh:
        return summary_from_dict(json.load(fh))


def write_cdf_csv(summary: AteSummary, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["error", "cumulative_fraction"])
        for e, f in summary.cdf:
            writer.writerow([repr(e), repr(f)])


def write_box_csv(summary: AteSummary, path: str | Path) -> None:
    """Boxplot-ready row: quartiles, whiskers, and the distribution extremes."""
    q = summary.quartiles
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q1", "median", "q3", "whisker_low", "whisker_high",
                         "mean", "rmse", "max"])
        writer.writerow([repr(q.q1), repr(q.median), repr(q.q3), repr(q.whisker_low),
                         repr(q.whisker_high), repr(summary.mean), repr(summary.rmse),
                         repr(summary.max)])
