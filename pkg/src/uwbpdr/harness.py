"""Experiment orchestration: scenarios in, artifact directories out.

Runs any subset of the four compared pipelines (raw trilateration, dead
reckoning, fixed-covariance fusion, gated adaptive fusion) over one scenario
and a list of seeds, evaluates each against ground truth, and writes
everything a report needs: trajectory/state/decision CSVs, summary JSON,
CDF/box CSVs, rendered figures, and a cross-pipeline comparison table.

Also exports sliding-window training datasets for the external trainer.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import metrics, report, world
from .ekf import (MODE_ADAPTIVE, MODE_FIXED, FilterConfig, filter_config_from_dict,
                  run_filter, write_states_csv)
from .errors import (ConfigError, DegenerateGeometryError, InsufficientGeometryError,
                     UwbPdrError)
from .gate import write_decisions_csv
from .pdr import run_pdr
from .predictor import HISTORY_LEN
from .trilateration import trilaterate
from .world import Scenario, build_trajectory, load_scenario, synthesize_imu, synthesize_ranges

log = logging.getLogger(__name__)

PIPELINE_UWB = "uwb"
PIPELINE_PDR = "pdr"
PIPELINE_EKF_FIXED = "ekf_fixed"
PIPELINE_EKF_ADAPTIVE = "ekf_adaptive"
ALL_PIPELINES = (PIPELINE_UWB, PIPELINE_PDR, PIPELINE_EKF_FIXED, PIPELINE_EKF_ADAPTIVE)

DATASET_SOURCE_FUSED = "fused"
DATASET_SOURCE_GT = "gt"

# Train fraction mirroring a 6000-of-7000 split.
DEFAULT_SPLIT_RATIO = 6.0 / 7.0
_SPLIT_STREAM = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a scenario, filter settings, pipelines, and seeds."""

    scenario: Scenario
    filter: FilterConfig = field(default_factory=FilterConfig)
    pipelines: tuple = ALL_PIPELINES
    seeds: tuple = (0,)
    output_dir: Path = Path("runs")
    smoothing_window: int | None = None
    dataset_source: str = DATASET_SOURCE_FUSED
    dataset_length: int = HISTORY_LEN
    split_ratio: float = DEFAULT_SPLIT_RATIO
    split_seed: int = 0
    figures: bool = True

    def __post_init__(self) -> None:
        if not self.pipelines:
            raise ConfigError("pipelines must be nonempty")
        for p in self.pipelines:
            if p not in ALL_PIPELINES:
                raise ConfigError(f"unknown pipeline {p!r}; choose from {ALL_PIPELINES}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.smoothing_window is not None and (
                self.smoothing_window < 1 or self.smoothing_window % 2 == 0):
            raise ConfigError("smoothing_window must be odd and >= 1")
        if self.dataset_source not in (DATASET_SOURCE_FUSED, DATASET_SOURCE_GT):
            raise ConfigError(f"unknown dataset source {self.dataset_source!r}")
        if self.dataset_length < 2:
            raise ConfigError("dataset_length must be >= 2")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        object.__setattr__(self, "pipelines", tuple(self.pipelines))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def bundled_scenario_path(name: str) -> Path:
    data_dir = resources.files("uwbpdr") / "data"
    for stem in (name, f"scenario_{name}"):
        path = data_dir / f"{stem}.json"
        if path.is_file():
            return Path(str(path))
    raise ConfigError(f"no bundled scenario named {name!r}")


def resolve_scenario(spec, base_dir: Path | None = None) -> Scenario:
    """Scenario from an inline document, a file path, or a bundled name."""
    if isinstance(spec, Scenario):
        return spec
    if isinstance(spec, dict):
        return Scenario.from_dict(spec)
    candidate = Path(spec)
    if not candidate.is_absolute() and base_dir is not None \
            and (base_dir / candidate).is_file():
        return load_scenario(base_dir / candidate)
    if candidate.is_file():
        return load_scenario(candidate)
    return load_scenario(bundled_scenario_path(str(spec)))


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Parses the experiment JSON document (schema in the repo README)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read experiment config {path}: {exc}") from exc
    if "scenario" not in doc:
        raise ConfigError("experiment config needs a 'scenario' field")
    scenario = resolve_scenario(doc["scenario"], base_dir=path.parent)
    fconfig = filter_config_from_dict(doc.get("filter", {}))
    dataset = doc.get("dataset", {})
    kwargs = dict(
        scenario=scenario,
        filter=fconfig,
        pipelines=tuple(doc.get("pipelines", ALL_PIPELINES)),
        seeds=tuple(doc.get("seeds", [scenario.seed])),
        output_dir=Path(doc.get("output_dir", "runs")),
        smoothing_window=doc.get("smoothing_window"),
        dataset_source=dataset.get("source", DATASET_SOURCE_FUSED),
        dataset_length=int(dataset.get("length", HISTORY_LEN)),
        split_ratio=float(dataset.get("split_ratio", DEFAULT_SPLIT_RATIO)),
        split_seed=int(dataset.get("split_seed", 0)),
        figures=bool(doc.get("figures", True)),
    )
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def run_uwb_pipeline(ranges, anchors):
    """Raw trilateration track: converged fixes only, warm-started."""
    times, positions = [], []
    guess = None
    for rset in ranges:
        try:
            fix = trilaterate(rset, anchors, initial_guess=guess)
        except (InsufficientGeometryError, DegenerateGeometryError):
            continue
        if fix.converged:
            times.append(fix.t)
            positions.append(fix.p)
            guess = fix.p
    return np.array(times), (np.stack(positions) if positions else np.empty((0, 2)))


def run_pdr_pipeline(imu, gt, k_weinberg: float):
    """Dead-reckoning track started from the true initial pose."""
    track = run_pdr(imu, p0=gt.positions[0], theta0=float(gt.headings[0]), K=k_weinberg)
    times = np.array([t for t, _, _ in track])
    positions = np.stack([p for _, p, _ in track])
    return times, positions


def run_ekf_pipeline(imu, ranges, gt, anchors, fconfig: FilterConfig, mode: str):
    states, decisions = run_filter(imu, ranges, anchors, fconfig, mode=mode,
                                   heading0=float(gt.headings[0]))
    times = np.array([s.t for s in states])
    positions = np.stack([s.x[:2] for s in states])
    return times, positions, states, decisions


def _synthesize(scenario: Scenario, seed: int):
    seeded = scenario.with_seed(seed)
    gt = build_trajectory(seeded)
    return seeded, gt, synthesize_imu(seeded, gt), synthesize_ranges(seeded, gt)


def align_track(times, positions, gt, scenario,
                smoothing_window: int | None = None,
                labels=None) -> metrics.AlignedTrajectory:
    """Optionally smooths one track and aligns it against ground truth."""
    if smoothing_window is not None:
        smoothed = metrics.smooth_postprocess(list(zip(times, positions)),
                                              smoothing_window)
        positions = np.stack([p for _, p in smoothed])
    if labels is None:
        labels = world.segment_labels(scenario, gt.positions)
    tolerance = 1.0 / (2.0 * scenario.imu_rate)
    return metrics.align_trajectories(times, positions, gt.timestamps,
                                      gt.positions, tolerance, labels)


def evaluate_track(times, positions, gt, scenario,
                   smoothing_window: int | None = None,
                   labels=None) -> metrics.AteSummary:
    """Aligns one track against ground truth and summarizes its errors."""
    return metrics.ate_summary(
        align_track(times, positions, gt, scenario, smoothing_window, labels))


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

def _write_trajectory_csv(times, positions, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "px", "py"])
        for t, p in zip(times, positions):
            writer.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1]))])


def read_trajectory_csv(path: str | Path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.empty(0), np.empty((0, 2))
    return data[:, 0], data[:, 1:3]


def comparison_table(summaries: dict) -> dict:
    """Cross-pipeline table: per-seed stats plus per-pipeline averages.

    Args:
        summaries: pipeline -> {seed -> AteSummary}.
    """
    table = {"pipelines": {}, "averages": {}}
    for pipeline, by_seed in summaries.items():
        rows = {str(seed): {"mean": s.mean, "rmse": s.rmse, "max": s.max}
                for seed, s in by_seed.items()}
        table["pipelines"][pipeline] = rows
        table["averages"][pipeline] = {
            key: float(np.mean([row[key] for row in rows.values()]))
            for key in ("mean", "rmse", "max")}
    return table


def run_experiment(config: ExperimentConfig) -> dict:
    """Runs every (pipeline, seed) combination and writes all artifacts.

    Artifacts land in config.output_dir: per run `<pipeline>_seed<seed>_*`
    CSV/JSON files, per-seed figures, the scenario actually used, ground
    truth, and a cross-pipeline `comparison.json`.

    Returns:
        the comparison table (also written to comparison.json).

    Raises:
        ConfigError: invalid configuration.
        InitializationFailureError and other runtime errors: propagated with
            the failing pipeline named.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    scenario = config.scenario
    world.save_scenario(scenario, out / "scenario_used.json")

    gt0 = build_trajectory(scenario)
    world.write_ground_truth_csv(gt0, out / "gt.csv")

    summaries = {p: {} for p in config.pipelines}
    for seed in config.seeds:
        seeded, gt, imu, ranges = _synthesize(scenario, seed)
        labels = world.segment_labels(seeded, gt.positions)
        tracks = {}
        errors_by_name = {}
        cdfs = {}
        for pipeline in config.pipelines:
            run_id = f"{pipeline}_seed{seed}"
            try:
                if pipeline == PIPELINE_UWB:
                    times, positions = run_uwb_pipeline(ranges, seeded.anchors)
                elif pipeline == PIPELINE_PDR:
                    times, positions = run_pdr_pipeline(imu, gt, config.filter.k_weinberg)
                else:
                    mode = MODE_FIXED if pipeline == PIPELINE_EKF_FIXED else MODE_ADAPTIVE
                    times, positions, states, decisions = run_ekf_pipeline(
                        imu, ranges, gt, seeded.anchors, config.filter, mode)
                    write_states_csv(states, decisions, out / f"{run_id}_states.csv")
                    if mode == MODE_ADAPTIVE:
                        write_decisions_csv(decisions, out / f"{run_id}_decisions.csv")
            except UwbPdrError as exc:
                raise type(exc)(f"pipeline {pipeline!r} seed {seed}: {exc}") from exc

            _write_trajectory_csv(times, positions, out / f"{run_id}_traj.csv")
            aligned = align_track(times, positions, gt, seeded,
                                  config.smoothing_window, labels)
            summary = metrics.ate_summary(aligned)
            metrics.write_summary_json(summary, out / f"{run_id}_summary.json")
            metrics.write_cdf_csv(summary, out / f"{run_id}_cdf.csv")
            metrics.write_box_csv(summary, out / f"{run_id}_box.csv")
            summaries[pipeline][seed] = summary
            tracks[pipeline] = (times, positions)
            cdfs[pipeline] = summary.cdf
            errors_by_name[pipeline] = metrics.trajectory_errors(aligned)

        if config.figures:
            report.render_trajectory_figure(out / f"seed{seed}_trajectories.png",
                                            seeded, gt, tracks)
            report.render_cdf_figure(out / f"seed{seed}_cdf.png", cdfs,
                                     title=f"{scenario.name} seed {seed}")
            report.render_box_figure(out / f"seed{seed}_box.png", errors_by_name,
                                     title=f"{scenario.name} seed {seed}")

    table = comparison_table(summaries)
    table["scenario"] = scenario.name
    table["seeds"] = list(config.seeds)
    table["smoothing_window"] = config.smoothing_window
    with open(out / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return table


# ---------------------------------------------------------------------------
# dataset export
# ---------------------------------------------------------------------------

def _fused_positions(scenario: Scenario, seed: int, fconfig: FilterConfig) -> np.ndarray:
    seeded, gt, imu, ranges = _synthesize(scenario, seed)
    _, positions, _, _ = run_ekf_pipeline(imu, ranges, gt, seeded.anchors,
                                          fconfig, MODE_ADAPTIVE)
    return positions

def _gt_epoch_positions(scenario: Scenario, seed: int) -> np.ndarray:
    seeded = scenario.with_seed(seed)
    gt = build_trajectory(seeded)
    t_end = float(gt.timestamps[-1])
    n_epochs = int(np.floor(t_end * seeded.uwb_rate + 1e-9)) + 1
    epoch_t = np.arange(n_epochs) / seeded.uwb_rate
    px = np.interp(epoch_t, gt.timestamps, gt.positions[:, 0])
    py = np.interp(epoch_t, gt.timestamps, gt.positions[:, 1])
    return np.column_stack([px, py])


def export_dataset(config: ExperimentConfig, path: str | Path | None = None) -> Path:
    """Writes sliding-window training records from every seed's trajectory.

    Each record is dataset_length consecutive positions plus the next
    position as the regression target, taken from the fused adaptive track
    or from ground truth at the ranging epochs, per config.dataset_source.
    The train/eval split is a seeded permutation at config.split_ratio.

    Returns:
        the dataset file path (default: output_dir/dataset_<source>.csv).

    Raises:
        ConfigError: no trajectory long enough to cut a single window.
    """
    L = config.dataset_length
    records = []
    for seed in config.seeds:
        if config.dataset_source == DATASET_SOURCE_FUSED:
            positions = _fused_positions(config.scenario, seed, config.filter)
        else:
            positions = _gt_epoch_positions(config.scenario, seed)
        if len(positions) < L + 1:
            log.warning("seed %d trajectory has %d points, need %d; skipped",
                        seed, len(positions), L + 1)
            continue
        for i in range(len(positions) - L):
            window = positions[i:i + L]
            target = positions[i + L]
            records.append(np.concatenate([window.reshape(-1), target]))
    if not records:
        raise ConfigError("no trajectory long enough for the requested window length")

    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.split_seed, spawn_key=(_SPLIT_STREAM,)))
    order = rng.permutation(len(records))
    n_train = int(round(config.split_ratio * len(records)))
    split = np.empty(len(records), dtype=object)
    split[order[:n_train]] = "train"
    split[order[n_train:]] = "eval"

    if path is None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        path = config.output_dir / f"dataset_{config.dataset_source}.csv"
    path = Path(path)
    header = [f"{axis}{i}" for i in range(L) for axis in ("x", "y")]
    header += ["target_x", "target_y", "split"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec, tag in zip(records, split):
            writer.writerow([repr(float(v)) for v in rec] + [tag])
    return path


def read_dataset_csv(path: str | Path):
    """Returns (histories (n, L, 2), targets (n, 2), split labels (n,))."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        L = (len(header) - 3) // 2
        histories, targets, split = [], [], []
        for row in reader:
            values = np.array([float(v) for v in row[:-1]])
            histories.append(values[:2 * L].reshape(L, 2))
            targets.append(values[2 * L:])
            split.append(row[-1])
    return np.array(histories), np.array(targets), np.array(split, dtype=object)
