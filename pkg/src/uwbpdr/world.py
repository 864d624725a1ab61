"""Synthetic indoor-localization world.

Builds reproducible constant-speed walking trajectories through an anchored
area, labels per-anchor line-of-sight against rectangular obstruction zones,
and synthesizes the two sensor streams the estimator consumes: UWB ranges
with visibility-dependent corruption and vertical-accel / yaw-rate IMU
samples.

All randomness is derived from ``Scenario.seed`` through independent
per-stream child seeds, so regenerating one stream, or zeroing one noise
term, never perturbs the draws of another.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateTrajectoryError

GRAVITY = 9.81
# Vertical-accel bounce amplitude while walking, m/s^2. Chosen well above the
# detector threshold so clean gait produces unambiguous peaks.
GAIT_AMPLITUDE = 3.0
# Converts walk speed into gait frequency; a simulation constant, not an
# estimator parameter.
NOMINAL_STEP_LENGTH = 0.7
# Heading slew limit at waypoint corners, rad/s. Instantaneous heading steps
# would make the synthesized yaw rate singular.
TURN_RATE_LIMIT = math.pi

LOS = "LOS"
NLOS = "NLOS"

# Child-seed stream ids. Appending new streams must not renumber old ones or
# archived scenarios stop reproducing.
_STREAM_RANGES = 0
_STREAM_ACCEL = 1
_STREAM_GYRO = 2


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one noise stream of one scenario seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


@dataclass(frozen=True)
class NoiseParams:
    """Sensor corruption levels; all default to a clean world."""

    sigma_range_los: float = 0.0    # m, gaussian ranging noise under LOS
    sigma_range_nlos: float = 0.0   # m, gaussian ranging noise under NLOS
    nlos_bias_mean: float = 0.0     # m, mean of the positive exponential bias
    sigma_accel: float = 0.0        # m/s^2
    gyro_bias: float = 0.0          # rad/s, constant additive drift
    sigma_gyro: float = 0.0         # rad/s

    def __post_init__(self) -> None:
        for name in ("sigma_range_los", "sigma_range_nlos", "nlos_bias_mean",
                     "sigma_accel", "sigma_gyro"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"noise parameter {name} must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """A complete synthetic world description.

    Attributes:
        anchors: (n, 2) anchor positions in meters, n >= 3.
        waypoints: (m, 2) polyline the walker follows at constant speed.
        nlos_zones: axis-aligned rectangles ((xmin, ymin), (xmax, ymax));
            a range is NLOS when the tag-anchor segment crosses any zone.
        walk_speed: m/s.
        imu_rate: IMU sampling rate, Hz.
        uwb_rate: ranging epoch rate, Hz; must not exceed imu_rate.
        noise: corruption levels for both sensor streams.
        seed: root seed for every random draw in this scenario.
        name: label used in artifact file names.
    """

    anchors: np.ndarray
    waypoints: np.ndarray
    walk_speed: float
    imu_rate: float
    uwb_rate: float
    nlos_zones: tuple = ()
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self) -> None:
        anchors = np.asarray(self.anchors, dtype=float)
        waypoints = np.asarray(self.waypoints, dtype=float)
        if anchors.ndim != 2 or anchors.shape[1] != 2 or anchors.shape[0] < 3:
            raise ConfigError("anchors must be an (n, 2) array with n >= 3")
        if waypoints.ndim != 2 or waypoints.shape[1] != 2 or waypoints.shape[0] < 2:
            raise DegenerateTrajectoryError("waypoints must contain at least 2 points")
        zones = []
        for zone in self.nlos_zones:
            lo, hi = np.asarray(zone[0], dtype=float), np.asarray(zone[1], dtype=float)
            zones.append((np.minimum(lo, hi), np.maximum(lo, hi)))
        if self.walk_speed <= 0.0:
            raise ConfigError("walk_speed must be > 0")
        if self.imu_rate <= 0.0 or self.uwb_rate <= 0.0 or self.imu_rate < self.uwb_rate:
            raise ConfigError("rates must satisfy imu_rate >= uwb_rate > 0")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        seg = np.diff(waypoints, axis=0)
        if float(np.sum(np.hypot(seg[:, 0], seg[:, 1]))) <= 0.0:
            raise DegenerateTrajectoryError("waypoints form a polyline of zero length")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "waypoints", waypoints)
        object.__setattr__(self, "nlos_zones", tuple(zones))

    def with_seed(self, seed: int) -> "Scenario":
        zones = tuple((lo.copy(), hi.copy()) for lo, hi in self.nlos_zones)
        return Scenario(self.anchors.copy(), self.waypoints.copy(), self.walk_speed,
                        self.imu_rate, self.uwb_rate, zones, self.noise, seed, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": int(self.seed),
            "anchors": self.anchors.tolist(),
            "waypoints": self.waypoints.tolist(),
            "nlos_zones": [[lo.tolist(), hi.tolist()] for lo, hi in self.nlos_zones],
            "walk_speed": self.walk_speed,
            "imu_rate": self.imu_rate,
            "uwb_rate": self.uwb_rate,
            "noise": {
                "sigma_range_los": self.noise.sigma_range_los,
                "sigma_range_nlos": self.noise.sigma_range_nlos,
                "nlos_bias_mean": self.noise.nlos_bias_mean,
                "sigma_accel": self.noise.sigma_accel,
                "gyro_bias": self.noise.gyro_bias,
                "sigma_gyro": self.noise.sigma_gyro,
            },
        }

    @staticmethod
    def from_dict(doc: dict) -> "Scenario":
        try:
            noise = NoiseParams(**doc.get("noise", {}))
            return Scenario(
                anchors=np.asarray(doc["anchors"], dtype=float),
                waypoints=np.asarray(doc["waypoints"], dtype=float),
                walk_speed=float(doc["walk_speed"]),
                imu_rate=float(doc["imu_rate"]),
                uwb_rate=float(doc["uwb_rate"]),
                nlos_zones=tuple((z[0], z[1]) for z in doc.get("nlos_zones", [])),
                noise=noise,
                seed=int(doc.get("seed", 0)),
                name=str(doc.get("name", "scenario")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario document: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Reads a scenario JSON document (schema in the repo README)."""
    with open(path, encoding="utf-8") as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class GroundTruth:
    """Reference trajectory sampled on the IMU clock."""

    timestamps: np.ndarray  # s, strictly increasing
    positions: np.ndarray   # (n, 2) m
    headings: np.ndarray    # rad, continuous (not wrapped) for clean rates
    speeds: np.ndarray      # m/s

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        if not (len(self.positions) == len(self.headings) == len(self.speeds) == n):
            raise ConfigError("ground-truth field lengths differ")
        if n > 1 and not np.all(np.diff(self.timestamps) > 0.0):
            raise ConfigError("ground-truth timestamps must be strictly increasing")


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel_vertical: float  # m/s^2, gravity-inclusive vertical channel
    gyro_z: float          # rad/s, yaw rate


@dataclass(frozen=True)
class RangeMeasurement:
    anchor_index: int
    measured_range: float
    true_visibility: str  # LOS or NLOS; ground-truth metadata only


@dataclass(frozen=True)
class RangeSet:
    """All anchor ranges observed at one epoch."""

    t: float
    ranges: tuple


# ---------------------------------------------------------------------------
# trajectory synthesis
# ---------------------------------------------------------------------------

def build_trajectory(scenario: Scenario) -> GroundTruth:
    """Walks the scenario polyline at constant speed, sampled at imu_rate.

    Heading follows the segment tangent; at corners it slews at most
    TURN_RATE_LIMIT rad/s instead of stepping, and the stored heading stays
    continuous (unwrapped) so the synthesized yaw rate is bounded.

    Args:
        scenario: validated world description.

    Returns:
        GroundTruth sampled at 1/imu_rate from t=0 to the walk duration.

    Raises:
        DegenerateTrajectoryError: the polyline has no positive-length segment.
    """
    waypoints = scenario.waypoints
    seg_vec = np.diff(waypoints, axis=0)
    seg_len = np.hypot(seg_vec[:, 0], seg_vec[:, 1])
    keep = seg_len > 0.0
    if not np.any(keep):
        raise DegenerateTrajectoryError("waypoints form a polyline of zero length")
    # Zero-length segments contribute nothing to arc length; drop them so the
    # tangent is defined everywhere.
    starts = waypoints[:-1][keep]
    seg_vec = seg_vec[keep]
    seg_len = seg_len[keep]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])

    duration = total / scenario.walk_speed
    n = int(math.floor(duration * scenario.imu_rate + 1e-9)) + 1
    t = np.arange(n) / scenario.imu_rate
    dist = np.minimum(scenario.walk_speed * t, total)

    idx = np.minimum(np.searchsorted(cum, dist, side="right") - 1, len(seg_len) - 1)
    frac = (dist - cum[idx]) / seg_len[idx]
    positions = starts[idx] + frac[:, None] * seg_vec[idx]

    raw = np.arctan2(seg_vec[idx, 1], seg_vec[idx, 0])
    headings = np.empty(n)
    headings[0] = raw[0]
    max_step = TURN_RATE_LIMIT / scenario.imu_rate
    two_pi = 2.0 * math.pi
    for i in range(1, n):
        diff = raw[i] - headings[i - 1]
        diff = diff - two_pi * math.floor((diff + math.pi) / two_pi)
        headings[i] = headings[i - 1] + max(-max_step, min(max_step, diff))

    speeds = np.full(n, scenario.walk_speed)
    return GroundTruth(t, positions, headings, speeds)


# ---------------------------------------------------------------------------
# visibility
# ---------------------------------------------------------------------------

def _segment_intersects_aabb(p, q, lo, hi) -> bool:
    """Liang-Barsky clip of segment p->q against [lo, hi]; touching counts."""
    t0, t1 = 0.0, 1.0
    for axis in range(2):
        d = q[axis] - p[axis]
        if d == 0.0:
            if p[axis] < lo[axis] or p[axis] > hi[axis]:
                return False
        else:
            ta = (lo[axis] - p[axis]) / d
            tb = (hi[axis] - p[axis]) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
    return True


def label_visibility(scenario: Scenario, position, anchor_index: int) -> str:
    """LOS/NLOS label for one tag position and anchor.

    NLOS when the straight segment from the position to the anchor passes
    through (or touches) any obstruction rectangle.
    """
    if not 0 <= anchor_index < len(scenario.anchors):
        raise ConfigError(f"anchor_index {anchor_index} out of range")
    p = np.asarray(position, dtype=float)
    a = scenario.anchors[anchor_index]
    for lo, hi in scenario.nlos_zones:
        if _segment_intersects_aabb(p, a, lo, hi):
            return NLOS
    return LOS


def _segments_intersect_aabb(positions: np.ndarray, anchor: np.ndarray,
                             lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized Liang-Barsky: one anchor, one box, many tag positions."""
    d = anchor[None, :] - positions
    t0 = np.zeros(len(positions))
    t1 = np.ones(len(positions))
    ok = np.ones(len(positions), dtype=bool)
    for axis in range(2):
        dz = d[:, axis]
        pz = positions[:, axis]
        parallel = dz == 0.0
        ok &= ~(parallel & ((pz < lo[axis]) | (pz > hi[axis])))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[axis] - pz) / dz
            tb = (hi[axis] - pz) / dz
        enter = np.minimum(ta, tb)
        leave = np.maximum(ta, tb)
        active = ~parallel
        t0 = np.where(active, np.maximum(t0, enter), t0)
        t1 = np.where(active, np.minimum(t1, leave), t1)
    return ok & (t0 <= t1)


def visibility_matrix(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """(n_positions, n_anchors) boolean matrix, True where the pair is NLOS."""
    positions = np.asarray(positions, dtype=float)
    out = np.zeros((len(positions), len(scenario.anchors)), dtype=bool)
    for j, anchor in enumerate(scenario.anchors):
        for lo, hi in scenario.nlos_zones:
            out[:, j] |= _segments_intersect_aabb(positions, anchor, lo, hi)
    return out


def segment_labels(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Per-position segment label: NLOS when any anchor is obstructed."""
    blocked = visibility_matrix(scenario, positions)
    return np.where(blocked.any(axis=1), NLOS, LOS)


# ---------------------------------------------------------------------------
# sensor synthesis
# ---------------------------------------------------------------------------

def synthesize_ranges(scenario: Scenario, gt: GroundTruth) -> list:
    """UWB range epochs at uwb_rate along the ground-truth path.

    LOS ranges get zero-mean gaussian noise (sigma_range_los). NLOS ranges
    additionally get a strictly positive bias drawn per epoch from an
    exponential distribution with mean nlos_bias_mean, plus gaussian noise at
    sigma_range_nlos. Gaussian and exponential draws come from fixed-shape
    grids generated up front (normals first), so toggling a sigma or editing
    zones never shifts the other draws.

    Args:
        scenario: world description (anchors, zones, noise, seed).
        gt: trajectory to range against; must be nonempty.

    Returns:
        list of RangeSet, one per epoch, every anchor present in index order.
    """
    if len(gt.timestamps) == 0:
        raise ConfigError("ground truth is empty")
    rng = _stream_rng(scenario.seed, _STREAM_RANGES)
    t_end = float(gt.timestamps[-1])
    n_epochs = int(math.floor(t_end * scenario.uwb_rate + 1e-9)) + 1
    epoch_t = np.arange(n_epochs) / scenario.uwb_rate
    px = np.interp(epoch_t, gt.timestamps, gt.positions[:, 0])
    py = np.interp(epoch_t, gt.timestamps, gt.positions[:, 1])
    positions = np.column_stack([px, py])

    n_anchors = len(scenario.anchors)
    gauss = rng.standard_normal((n_epochs, n_anchors))
    expo = rng.exponential(1.0, (n_epochs, n_anchors))
    blocked = visibility_matrix(scenario, positions)

    noise = scenario.noise
    out = []
    for k in range(n_epochs):
        measurements = []
        for j in range(n_anchors):
            true_range = float(np.hypot(*(positions[k] - scenario.anchors[j])))
            vis = NLOS if blocked[k, j] else LOS
            if vis == LOS:
                measured = true_range + gauss[k, j] * noise.sigma_range_los
            else:
                measured = (true_range + expo[k, j] * noise.nlos_bias_mean
                            + gauss[k, j] * noise.sigma_range_nlos)
            measurements.append(RangeMeasurement(j, max(measured, 1e-9), vis))
        out.append(RangeSet(float(epoch_t[k]), tuple(measurements)))
    return out


def synthesize_imu(scenario: Scenario, gt: GroundTruth) -> list:
    """IMU stream on the ground-truth clock.

    Vertical accel is gravity plus a gait-periodic bounce while moving
    (amplitude GAIT_AMPLITUDE, frequency walk_speed / NOMINAL_STEP_LENGTH)
    plus gaussian noise. Yaw rate is the true heading rate plus a constant
    bias plus gaussian noise.
    """
    if len(gt.timestamps) == 0:
        raise ConfigError("ground truth is empty")
    t = gt.timestamps
    n = len(t)
    noise = scenario.noise

    rng_a = _stream_rng(scenario.seed, _STREAM_ACCEL)
    rng_g = _stream_rng(scenario.seed, _STREAM_GYRO)

    f_step = scenario.walk_speed / NOMINAL_STEP_LENGTH
    moving = gt.speeds > 0.0
    accel = (GRAVITY
             + GAIT_AMPLITUDE * np.sin(2.0 * math.pi * f_step * t) * moving
             + rng_a.standard_normal(n) * noise.sigma_accel)

    if n > 1:
        heading_rate = np.gradient(gt.headings, t)
    else:
        heading_rate = np.zeros(1)
    gyro = heading_rate + noise.gyro_bias + rng_g.standard_normal(n) * noise.sigma_gyro

    return [ImuSample(float(t[i]), float(accel[i]), float(gyro[i])) for i in range(n)]


# ---------------------------------------------------------------------------
# stream serialization
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the float64 exactly."""
    return repr(float(value))


def write_ground_truth_csv(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "heading", "speed"])
        for i in range(len(gt.timestamps)):
            writer.writerow([_fmt(gt.timestamps[i]), _fmt(gt.positions[i, 0]),
                             _fmt(gt.positions[i, 1]), _fmt(gt.headings[i]),
                             _fmt(gt.speeds[i])])


def read_ground_truth_csv(path: str | Path) -> GroundTruth:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GroundTruth(data[:, 0], data[:, 1:3], data[:, 3], data[:, 4])


def write_imu_csv(samples, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "accel_vertical", "gyro_z"])
        for s in samples:
            writer.writerow([_fmt(s.t), _fmt(s.accel_vertical), _fmt(s.gyro_z)])


def read_imu_csv(path: str | Path) -> list:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [ImuSample(float(r[0]), float(r[1]), float(r[2])) for r in data]


def write_ranges_csv(range_sets, path: str | Path) -> None:
    """One row per (epoch, anchor): t, anchor_index, range, visibility."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "anchor_index", "measured_range", "visibility"])
        for rset in range_sets:
            for m in rset.ranges:
                writer.writerow([_fmt(rset.t), m.anchor_index,
                                 _fmt(m.measured_range), m.true_visibility])


def read_ranges_csv(path: str | Path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        current_t = None
        bucket = []
        for row in reader:
            t = float(row[0])
            m = RangeMeasurement(int(row[1]), float(row[2]), row[3])
            if current_t is None or t != current_t:
                if bucket:
                    out.append(RangeSet(current_t, tuple(bucket)))
                current_t, bucket = t, [m]
            else:
                bucket.append(m)
        if bucket:
            out.append(RangeSet(current_t, tuple(bucket)))
    return out
