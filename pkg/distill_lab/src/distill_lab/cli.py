"""Command-line entry point: train a teacher, distill, and export.

    distill-lab train --out runs/demo [--dataset windows.csv]
                      [--config overrides.json] [--teacher-seed 1]
                      [--student-seed 100] [--with-baseline]

Writes student_weights.json and training_log.csv into the output
directory and prints the eval RMSE of every trained model. Exit codes:
0 success, 2 configuration or dataset problem, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import bundled_dataset_path, load_window_dataset
from .errors import ConfigError, DatasetError, DivergenceError, ExportError
from .export import export_student
from .training import (DistillConfig, distill_student, eval_rmse,
                       train_base_student, train_teacher, write_training_log)


def _load_config(path: str | None) -> DistillConfig:
    if path is None:
        return DistillConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    allowed = set(DistillConfig.__dataclass_fields__)
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "bin_range" in doc and doc["bin_range"] is not None:
        doc["bin_range"] = tuple(tuple(pair) for pair in doc["bin_range"])
    return DistillConfig(**doc)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="distill-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="train teacher, distill, export")
    train.add_argument("--dataset", default=None, help="window CSV; default bundled")
    train.add_argument("--config", default=None, help="JSON config overrides")
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--teacher-seed", type=int, default=1)
    train.add_argument("--student-seed", type=int, default=100)
    train.add_argument("--with-baseline", action="store_true",
                       help="also train the non-distilled baseline student")
    args = parser.parse_args(argv)

    try:
        config = _load_config(args.config)
        dataset_path = Path(args.dataset) if args.dataset else bundled_dataset_path()
        dataset = load_window_dataset(dataset_path)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        teacher = train_teacher(dataset, config, seed=args.teacher_seed)
        print(f"teacher eval RMSE: {eval_rmse(teacher, dataset):.4f} m")
        student, logs = distill_student(dataset, teacher, config,
                                        seed=args.student_seed)
        print(f"student eval RMSE: {logs[-1].eval_rmse:.4f} m")
        if args.with_baseline:
            _, base_logs = train_base_student(dataset, config,
                                              seed=args.student_seed)
            print(f"baseline eval RMSE: {base_logs[-1].eval_rmse:.4f} m")
        write_training_log(logs, out_dir / "training_log.csv")
        export_student(student, out_dir / "student_weights.json")
    except (DatasetError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out_dir / 'student_weights.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
