"""Command-line entry point.

Subcommands:
    simulate        synthesize one scenario's ground truth and sensor streams
    run             run pipelines over seeds and write evaluation artifacts
    eval            re-evaluate trajectory CSVs in an existing run directory
    export-dataset  cut sliding-window training records from trajectories

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, metrics, report, world
from .errors import ConfigError, UwbPdrError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwbpdr",
        description="Adaptive UWB/PDR indoor-localization fusion toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write ground truth and sensor streams")
    sim.add_argument("--config", required=True,
                     help="scenario JSON path or bundled scenario name")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run", help="run pipelines and write artifacts")
    run.add_argument("--config", required=True, help="experiment JSON path")
    run.add_argument("--seed", type=int, default=None,
                     help="run this single seed instead of the configured list")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("--pipeline", default=None,
                     help="comma-separated subset of uwb,pdr,ekf_fixed,ekf_adaptive")
    run.add_argument("--smooth", type=int, default=None,
                     help="odd moving-average window applied before metrics")

    ev = sub.add_parser("eval", help="re-evaluate an existing run directory")
    ev.add_argument("--out", required=True, help="run directory holding *_traj.csv")
    ev.add_argument("--smooth", type=int, default=None,
                    help="odd moving-average window applied before metrics")

    exp = sub.add_parser("export-dataset", help="write sliding-window records")
    exp.add_argument("--config", required=True, help="experiment JSON path")
    exp.add_argument("--seed", type=int, default=None,
                     help="use this single seed instead of the configured list")
    exp.add_argument("--out", default=None, help="dataset CSV path")
    exp.add_argument("--source", choices=[harness.DATASET_SOURCE_FUSED,
                                          harness.DATASET_SOURCE_GT], default=None,
                     help="window content: fused estimates or ground truth")
    exp.add_argument("--length", type=int, default=None, help="window length L")
    return parser


def _cmd_simulate(args) -> int:
    scenario = harness.resolve_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gt = world.build_trajectory(scenario)
    imu = world.synthesize_imu(scenario, gt)
    ranges = world.synthesize_ranges(scenario, gt)
    world.save_scenario(scenario, out / "scenario_used.json")
    world.write_ground_truth_csv(gt, out / "gt.csv")
    world.write_imu_csv(imu, out / "imu.csv")
    world.write_ranges_csv(ranges, out / "ranges.csv")
    report.render_trajectory_figure(out / "world.png", scenario, gt, {})
    print(f"wrote {len(gt.timestamps)} ground-truth samples, {len(imu)} IMU samples, "
          f"{len(ranges)} range epochs to {out}")
    return EXIT_OK


def _apply_run_overrides(config: harness.ExperimentConfig, args):
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.out is not None:
        updates["output_dir"] = Path(args.out)
    if getattr(args, "pipeline", None):
        updates["pipelines"] = tuple(p.strip() for p in args.pipeline.split(",") if p.strip())
    if args.smooth is not None:
        updates["smoothing_window"] = args.smooth
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_run(args) -> int:
    config = _apply_run_overrides(harness.load_experiment_config(args.config), args)
    table = harness.run_experiment(config)
    print(f"scenario {table['scenario']}: seeds {table['seeds']}")
    for pipeline, row in table["averages"].items():
        print(f"  {pipeline:13s} mean {row['mean']:.3f}  rmse {row['rmse']:.3f}  "
              f"max {row['max']:.3f}")
    print(f"artifacts in {config.output_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    out = Path(args.out)
    scenario_path = out / "scenario_used.json"
    gt_path = out / "gt.csv"
    if not scenario_path.is_file() or not gt_path.is_file():
        raise ConfigError(f"{out} is not a run directory "
                          "(missing scenario_used.json or gt.csv)")
    scenario = world.load_scenario(scenario_path)
    gt = world.read_ground_truth_csv(gt_path)
    labels = world.segment_labels(scenario, gt.positions)
    window = args.smooth

    traj_files = sorted(out.glob("*_traj.csv"))
    if not traj_files:
        raise ConfigError(f"no *_traj.csv files in {out}")
    cdfs = {}
    errors_by_name = {}
    summaries = {}
    for path in traj_files:
        run_id = path.name[:-len("_traj.csv")]
        times, positions = harness.read_trajectory_csv(path)
        aligned = harness.align_track(times, positions, gt, scenario, window, labels)
        summary = metrics.ate_summary(aligned)
        metrics.write_summary_json(summary, out / f"{run_id}_summary.json")
        metrics.write_cdf_csv(summary, out / f"{run_id}_cdf.csv")
        metrics.write_box_csv(summary, out / f"{run_id}_box.csv")
        summaries[run_id] = summary
        cdfs[run_id] = summary.cdf
        errors_by_name[run_id] = metrics.trajectory_errors(aligned)
        print(f"  {run_id:22s} mean {summary.mean:.3f}  rmse {summary.rmse:.3f}  "
              f"max {summary.max:.3f}")

    report.render_cdf_figure(out / "eval_cdf.png", cdfs, title=scenario.name)
    report.render_box_figure(out / "eval_box.png", errors_by_name, title=scenario.name)
    by_pipeline = {}
    for run_id, summary in summaries.items():
        pipeline, _, seed = run_id.rpartition("_seed")
        by_pipeline.setdefault(pipeline, {})[seed] = summary
    table = harness.comparison_table(by_pipeline)
    table["scenario"] = scenario.name
    table["smoothing_window"] = window
    with open(out / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _cmd_export_dataset(args) -> int:
    config = harness.load_experiment_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.source is not None:
        updates["dataset_source"] = args.source
    if args.length is not None:
        updates["dataset_length"] = args.length
    if updates:
        config = dataclasses.replace(config, **updates)
    path = harness.export_dataset(config, args.out)
    histories, _, split = harness.read_dataset_csv(path)
    n_train = int(np.sum(split == "train"))
    print(f"wrote {len(histories)} records ({n_train} train, "
          f"{len(histories) - n_train} eval) to {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "run": _cmd_run,
        "eval": _cmd_eval,
        "export-dataset": _cmd_export_dataset,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UwbPdrError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
