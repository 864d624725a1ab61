"""Window-dataset loading for the distillation trainers.

The dataset is the delimited export of the localization harness: each row
is a sliding window of L=10 fused (x, y) positions, the next position as
the regression target, and a train/eval split label. A curved-trajectory
dataset generated from the bundled slalom scenario ships with the package;
its eval rows carry the true next position while train rows keep the
estimator's own next fix, so evaluation measures real prediction error
under realistic (noisy) supervision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DatasetError

WINDOW_LEN = 10
SPLIT_TRAIN = "train"
SPLIT_EVAL = "eval"


@dataclass(frozen=True)
class TrainingSample:
    """One supervised window: L recent positions and the next position."""

    history: np.ndarray          # (WINDOW_LEN, 2) meters
    target: np.ndarray           # (2,) meters
    split: str                   # SPLIT_TRAIN or SPLIT_EVAL
    trend: np.ndarray | None = None   # optional per-axis codes in {-1, 0, +1}

    def features(self) -> np.ndarray:
        flat = self.history.reshape(-1)
        if self.trend is not None:
            flat = np.concatenate([flat, self.trend])
        return flat


def bundled_dataset_path() -> Path:
    """Filesystem path of the packaged curved-trajectory dataset."""
    return Path(resources.files("distill_lab").joinpath("data/curved_windows.csv"))


def bundled_scenario_path() -> Path:
    """Filesystem path of the slalom scenario the dataset was generated from."""
    return Path(resources.files("distill_lab").joinpath("data/scenario_slalom.json"))


def load_window_dataset(path: str | Path) -> list[TrainingSample]:
    """Parses a harness window-export CSV into training samples.

    Raises:
        DatasetError: unreadable file, unexpected column layout, window
            length other than WINDOW_LEN, non-finite values, or an unknown
            split label.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if header is None:
        raise DatasetError(f"dataset {path} is empty")
    if len(header) < 5 or header[-3:] != ["target_x", "target_y", "split"]:
        raise DatasetError(
            f"dataset {path} must end with target_x,target_y,split columns")
    n_pos = len(header) - 3
    if n_pos % 2 != 0:
        raise DatasetError(f"dataset {path} has an odd number of position columns")
    length = n_pos // 2
    if length != WINDOW_LEN:
        raise DatasetError(
            f"dataset {path} has windows of length {length}, expected {WINDOW_LEN}")

    samples = []
    for line_no, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DatasetError(f"dataset {path} line {line_no}: wrong column count")
        split = row[-1]
        if split not in (SPLIT_TRAIN, SPLIT_EVAL):
            raise DatasetError(
                f"dataset {path} line {line_no}: unknown split {split!r}")
        try:
            values = np.array([float(v) for v in row[:-1]])
        except ValueError as exc:
            raise DatasetError(
                f"dataset {path} line {line_no}: non-numeric value: {exc}") from exc
        if not np.all(np.isfinite(values)):
            raise DatasetError(f"dataset {path} line {line_no}: non-finite value")
        history = values[:n_pos].reshape(length, 2)
        target = values[n_pos:n_pos + 2]
        samples.append(TrainingSample(history=history, target=target, split=split))
    if not samples:
        raise DatasetError(f"dataset {path} has no data rows")
    return samples


def split_arrays(samples: list[TrainingSample]):
    """Stacks samples into (X_train, T_train, X_eval, T_eval) float arrays.

    X rows are flattened histories; T rows are targets, both in meters.

    Raises:
        DatasetError: either split is empty.
    """
    train = [s for s in samples if s.split == SPLIT_TRAIN]
    evl = [s for s in samples if s.split == SPLIT_EVAL]
    if not train or not evl:
        raise DatasetError(
            f"dataset needs both splits, got {len(train)} train / {len(evl)} eval")
    x_tr = np.stack([s.features() for s in train])
    t_tr = np.stack([s.target for s in train])
    x_ev = np.stack([s.features() for s in evl])
    t_ev = np.stack([s.target for s in evl])
    return x_tr, t_tr, x_ev, t_ev
