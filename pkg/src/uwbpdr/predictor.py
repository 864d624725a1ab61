"""Next-position prediction from recent fused positions.

Two backends produce the one-step-ahead estimate the reliability gate
compares against raw UWB fixes: a constant-velocity extrapolation and a
small feed-forward network loaded from a portable weight file.

Weight file format (JSON, the cross-trainer contract):

    {
      "format_version": 1,
      "input_dim": 20 or 22,
      "output_dim": 2,
      "uses_trend": false,
      "norm": {"mean": [...], "scale": [...]},
      "layers": [{"w": [[...], ...], "b": [...], "act": "relu"|"linear"}, ...]
    }

Features are the flattened history (x1, y1, ..., xL, yL) plus, when
uses_trend is set, two per-axis trend codes in {-1, 0, +1}. ``norm`` holds
one mean/scale entry per feature; position slots repeat the per-axis
statistics, so entries 0 and 1 double as the output de-normalization for the
predicted (x, y). Weights are row-major: w[i][j] multiplies input j of
output i. Numbers carry at least 9 significant digits.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InsufficientHistoryError, ModelFormatError

HISTORY_LEN = 10
# Least-squares slope magnitude below which an axis counts as stationary,
# meters per history step.
TREND_SLOPE_EPS = 0.01

TREND_INCREASING = "increasing"
TREND_DECREASING = "decreasing"
TREND_STATIONARY = "stationary"
_TREND_CODES = {TREND_DECREASING: -1.0, TREND_STATIONARY: 0.0, TREND_INCREASING: 1.0}

BACKEND_CONSTANT_VELOCITY = "cv"
BACKEND_STUDENT = "student"
_ACTIVATIONS = ("relu", "linear")


class PositionHistory:
    """Ring buffer of the most recent (t, position) estimates."""

    def __init__(self, capacity: int = HISTORY_LEN):
        if capacity < 2:
            raise ConfigError("history capacity must be >= 2")
        self.capacity = capacity
        self._entries = deque(maxlen=capacity)

    def push(self, t: float, p) -> None:
        p = np.asarray(p, dtype=float)
        if self._entries and t <= self._entries[-1][0]:
            raise ValueError("history timestamps must be strictly increasing")
        self._entries.append((float(t), p.copy()))

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) == self.capacity

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self._entries])

    def positions(self) -> np.ndarray:
        if not self._entries:
            return np.empty((0, 2))
        return np.stack([p for _, p in self._entries])


@dataclass(frozen=True)
class TrendSummary:
    x_trend: str
    y_trend: str

    def codes(self) -> np.ndarray:
        return np.array([_TREND_CODES[self.x_trend], _TREND_CODES[self.y_trend]])


@dataclass(frozen=True)
class StudentModel:
    """Immutable loaded weight file; see the module docstring for the format."""

    layers: tuple               # ((w, b, act), ...) with w row-major (out, in)
    norm_mean: np.ndarray
    norm_scale: np.ndarray
    input_dim: int
    output_dim: int
    uses_trend: bool
    format_version: int


def compute_trend(history: PositionHistory) -> TrendSummary:
    """Per-axis motion trend over a full history window.

    The least-squares slope against the sample index (meters per step)
    decides the label; |slope| below TREND_SLOPE_EPS reads as stationary.

    Raises:
        InsufficientHistoryError: history is not full.
    """
    if not history.full:
        raise InsufficientHistoryError(
            f"trend needs {history.capacity} entries, have {len(history)}")
    pos = history.positions()
    idx = np.arange(len(pos), dtype=float)
    idx -= idx.mean()
    denom = float(np.sum(idx * idx))
    labels = []
    for axis in range(2):
        slope = float(np.sum(idx * (pos[:, axis] - pos[:, axis].mean()))) / denom
        if abs(slope) < TREND_SLOPE_EPS:
            labels.append(TREND_STATIONARY)
        elif slope > 0.0:
            labels.append(TREND_INCREASING)
        else:
            labels.append(TREND_DECREASING)
    return TrendSummary(labels[0], labels[1])


def predict_constant_velocity(history: PositionHistory,
                              t_next: float | None = None) -> np.ndarray:
    """Linear extrapolation of the last displacement.

    The last displacement is scaled by the ratio of the upcoming interval to
    the last observed interval; with t_next omitted the intervals are assumed
    uniform and the displacement is repeated as-is.

    Raises:
        InsufficientHistoryError: fewer than 2 entries.
    """
    if len(history) < 2:
        raise InsufficientHistoryError("constant-velocity prediction needs 2 entries")
    t = history.times()
    p = history.positions()
    dt_last = t[-1] - t[-2]
    ratio = 1.0 if t_next is None else (t_next - t[-1]) / dt_last
    return p[-1] + (p[-1] - p[-2]) * ratio


def _features(model: StudentModel, history: PositionHistory,
              trend: TrendSummary | None) -> np.ndarray:
    flat = history.positions().reshape(-1)
    if model.uses_trend:
        if trend is None:
            trend = compute_trend(history)
        flat = np.concatenate([flat, trend.codes()])
    if len(flat) != model.input_dim:
        raise ModelFormatError(
            f"model expects {model.input_dim} features, history provides {len(flat)}")
    return flat


def mlp_forward(model: StudentModel, history: PositionHistory,
                trend: TrendSummary | None = None) -> np.ndarray:
    """Runs the loaded network on a full history window.

    Input features are normalized with the file's mean/scale, passed through
    each affine layer and activation, and the 2-vector output is mapped back
    to meters with the per-axis position statistics.

    Raises:
        InsufficientHistoryError: history is not full.
        ModelFormatError: feature/model dimension mismatch.
    """
    if not history.full:
        raise InsufficientHistoryError(
            f"student inference needs {history.capacity} entries, have {len(history)}")
    x = (_features(model, history, trend) - model.norm_mean) / model.norm_scale
    for w, b, act in model.layers:
        x = w @ x + b
        if act == "relu":
            x = np.maximum(x, 0.0)
    return x * model.norm_scale[:2] + model.norm_mean[:2]


def predict_next(backend: str, history: PositionHistory,
                 model: StudentModel | None = None,
                 t_next: float | None = None) -> np.ndarray:
    """Dispatches to the selected backend.

    The student backend falls back to constant velocity until the history is
    full, so a prediction exists at every filter step after the second.
    """
    if backend == BACKEND_CONSTANT_VELOCITY:
        return predict_constant_velocity(history, t_next)
    if backend == BACKEND_STUDENT:
        if model is None:
            raise ConfigError("student backend selected but no model loaded")
        if not history.full:
            return predict_constant_velocity(history, t_next)
        return mlp_forward(model, history)
    raise ConfigError(f"unknown predictor backend {backend!r}")


# ---------------------------------------------------------------------------
# weight-file loading
# ---------------------------------------------------------------------------

def model_from_dict(doc: dict) -> StudentModel:
    """Validates and freezes a parsed weight document.

    Raises:
        ModelFormatError: any structural violation; dimension-chain errors
            name the offending layer index.
    """
    try:
        version = int(doc["format_version"])
        input_dim = int(doc["input_dim"])
        output_dim = int(doc["output_dim"])
        uses_trend = bool(doc["uses_trend"])
        mean = np.asarray(doc["norm"]["mean"], dtype=float)
        scale = np.asarray(doc["norm"]["scale"], dtype=float)
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"missing or malformed field: {exc}") from exc

    if version != 1:
        raise ModelFormatError(f"unsupported format_version {version}")
    if output_dim != 2:
        raise ModelFormatError(f"output_dim must be 2, got {output_dim}")
    expected_input = 2 * HISTORY_LEN + (2 if uses_trend else 0)
    if input_dim != expected_input:
        raise ModelFormatError(
            f"input_dim {input_dim} inconsistent with uses_trend={uses_trend}; "
            f"expected {expected_input}")
    if mean.shape != (input_dim,) or scale.shape != (input_dim,):
        raise ModelFormatError("norm mean/scale must each have input_dim entries")
    if np.any(scale <= 0.0):
        raise ModelFormatError("norm scale entries must be positive")
    if not raw_layers:
        raise ModelFormatError("model has no layers")

    layers = []
    prev_dim = input_dim
    for i, layer in enumerate(raw_layers):
        try:
            w = np.asarray(layer["w"], dtype=float)
            b = np.asarray(layer["b"], dtype=float)
            act = layer["act"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"layer {i}: missing or malformed field: {exc}") from exc
        if w.ndim != 2:
            raise ModelFormatError(f"layer {i}: weight must be a 2D matrix")
        if w.shape[1] != prev_dim:
            raise ModelFormatError(
                f"layer {i}: weight shape {w.shape} expects input {w.shape[1]}, "
                f"previous layer provides {prev_dim}")
        if b.shape != (w.shape[0],):
            raise ModelFormatError(f"layer {i}: bias length {b.shape} != {w.shape[0]}")
        if act not in _ACTIVATIONS:
            raise ModelFormatError(f"layer {i}: unknown activation {act!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelFormatError(f"layer {i}: non-finite weights")
        w.setflags(write=False)
        b.setflags(write=False)
        layers.append((w, b, act))
        prev_dim = w.shape[0]
    if prev_dim != output_dim:
        raise ModelFormatError(
            f"layer {len(layers) - 1}: final width {prev_dim} != output_dim {output_dim}")

    mean.setflags(write=False)
    scale.setflags(write=False)
    return StudentModel(layers=tuple(layers), norm_mean=mean, norm_scale=scale,
                        input_dim=input_dim, output_dim=output_dim,
                        uses_trend=uses_trend, format_version=version)


def load_student_model(path: str | Path) -> StudentModel:
    """Loads and validates a weight file (format in the module docstring)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read weight file {path}: {exc}") from exc
    return model_from_dict(doc)
