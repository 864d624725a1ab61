"""Adaptive measurement-covariance scaling from prediction discrepancy.

Each epoch the gate receives delta, the distance between the raw UWB fix and
the predicted next position, appends it to a sliding window, derives robust
thresholds from the window's median and MAD, and classifies the epoch into
one of three scale tiers. The measurement covariance handed to the filter is
the baseline R0 multiplied by the tier's factor, so suspected NLOS epochs are
de-weighted instead of dropped.

The current delta is appended to the window before the thresholds are
computed; tier high additionally requires persistence_n consecutive
exceedances of the upper threshold, and a single epoch at or below either
threshold resets that counter.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyWindowError

TIER_LOW = "low"
TIER_MID = "mid"
TIER_HIGH = "high"


@dataclass(frozen=True)
class GateConfig:
    """Thresholding and scaling parameters.

    mad_floor keeps the thresholds apart when the window is nearly constant;
    a zero MAD would collapse both thresholds onto the median and make every
    epoch borderline.
    """

    window_len: int = 10
    alpha: float = 1.5        # theta1 = median + alpha * MAD
    beta: float = 3.0         # theta2 = median + beta * MAD
    h_low: float = 1.0
    h_mid: float = 10.0
    h_high: float = 100.0
    persistence_n: int = 3
    mad_floor: float = 0.05   # m

    def __post_init__(self) -> None:
        if self.window_len < 2:
            raise ConfigError("window_len must be >= 2")
        if not 0.0 < self.h_low <= self.h_mid <= self.h_high:
            raise ConfigError("scale factors must satisfy 0 < h_low <= h_mid <= h_high")
        if not self.alpha < self.beta:
            raise ConfigError("alpha must be < beta")
        if self.persistence_n < 1:
            raise ConfigError("persistence_n must be >= 1")
        if self.mad_floor <= 0.0:
            raise ConfigError("mad_floor must be > 0")

    def h_for_tier(self, tier: str) -> float:
        return {TIER_LOW: self.h_low, TIER_MID: self.h_mid, TIER_HIGH: self.h_high}[tier]


class ErrorWindow:
    """Bounded queue of recent delta values."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("window capacity must be >= 1")
        self._values = deque(maxlen=capacity)

    def append(self, delta: float) -> None:
        if delta < 0.0:
            raise ValueError("delta must be >= 0")
        self._values.append(float(delta))

    def values(self) -> np.ndarray:
        return np.array(self._values)

    def __len__(self) -> int:
        return len(self._values)


@dataclass(frozen=True)
class ReliabilityDecision:
    """One epoch's gate output; consecutive_exceed feeds the next epoch."""

    delta: float
    theta1: float
    theta2: float
    tier: str
    h: float
    nlos_flag: bool
    consecutive_exceed: int


def compute_delta(z, prediction) -> float:
    """Euclidean discrepancy between the UWB fix and the predicted position."""
    z = np.asarray(z, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    return float(np.hypot(z[0] - prediction[0], z[1] - prediction[1]))


def robust_thresholds(window: ErrorWindow, config: GateConfig) -> tuple:
    """(theta1, theta2) from the window's median and floored MAD.

    Median is the middle order statistic (mean of the middle two for even
    lengths); MAD is the median absolute deviation from it, floored at
    config.mad_floor.

    Raises:
        EmptyWindowError: no deltas yet; callers treat this epoch as tier low.
    """
    if len(window) == 0:
        raise EmptyWindowError("error window is empty (warm-up)")
    values = window.values()
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    mad = max(mad, config.mad_floor)
    return med + config.alpha * mad, med + config.beta * mad


def classify(delta: float, theta1: float, theta2: float,
             consecutive_exceed_prev: int, config: GateConfig) -> ReliabilityDecision:
    """Maps one delta onto a scale tier.

    At or below theta1: low. Between the thresholds: mid. Above theta2 the
    exceedance counter increments, and only persistence_n consecutive
    exceedances earn tier high with the NLOS flag; shorter spikes stay mid
    (they still exceed theta1). Low and mid both reset the counter.
    """
    if theta1 > theta2:
        raise ValueError("theta1 must be <= theta2")
    if delta > theta2:
        count = consecutive_exceed_prev + 1
        if count >= config.persistence_n:
            tier = TIER_HIGH
        else:
            tier = TIER_MID
    elif delta > theta1:
        tier = TIER_MID
        count = 0
    else:
        tier = TIER_LOW
        count = 0
    nlos = tier == TIER_HIGH
    return ReliabilityDecision(delta=delta, theta1=theta1, theta2=theta2,
                               tier=tier, h=config.h_for_tier(tier),
                               nlos_flag=nlos, consecutive_exceed=count)


def scale_covariance(h: float, R0: np.ndarray) -> np.ndarray:
    """R_k = h * R0; positive scaling preserves symmetry and definiteness."""
    if h <= 0.0:
        raise ValueError("scale factor must be > 0")
    return h * np.asarray(R0, dtype=float)


class ReliabilityGate:
    """Stateful per-filter wrapper: window plus exceedance counter."""

    def __init__(self, config: GateConfig):
        self.config = config
        self.window = ErrorWindow(config.window_len)
        self._consecutive_exceed = 0

    def step(self, delta: float) -> ReliabilityDecision:
        """Appends delta, recomputes thresholds, classifies this epoch."""
        self.window.append(delta)
        theta1, theta2 = robust_thresholds(self.window, self.config)
        decision = classify(delta, theta1, theta2, self._consecutive_exceed, self.config)
        self._consecutive_exceed = decision.consecutive_exceed
        return decision


def write_decisions_csv(decisions, path: str | Path) -> None:
    """Audit log, one row per epoch: (t, decision fields)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "delta", "theta1", "theta2", "tier", "h", "nlos_flag"])
        for t, d in decisions:
            writer.writerow([repr(float(t)), repr(float(d.delta)), repr(float(d.theta1)),
                             repr(float(d.theta2)), d.tier, repr(float(d.h)),
                             int(d.nlos_flag)])


def read_decisions_csv(path: str | Path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out.append((float(row[0]),
                        ReliabilityDecision(delta=float(row[1]), theta1=float(row[2]),
                                            theta2=float(row[3]), tier=row[4],
                                            h=float(row[5]), nlos_flag=bool(int(row[6])),
                                            consecutive_exceed=0)))
    return out
