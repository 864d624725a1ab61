#!/usr/bin/env python3
"""Regenerates the bundled curved-trajectory window dataset.

Drives the localization package's public CLI (export-dataset, simulate) over
the bundled slalom scenario, so this tool depends only on the CLI and the
dataset CSV contract.

Dataset design: every window holds fused (estimated) positions. Train rows
keep the fused track's next position as the target, which is realistic noisy
supervision. Eval rows get the ground-truth next position instead, so
evaluation measures true next-position error rather than agreement with the
estimator's own noise. Ground truth is noise-free and seed-independent;
record i of each per-seed block targets ranging epoch i + L.

Usage: python3 tools/make_dataset.py [seed_count]
"""

import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent
DATA = HERE.parent / "src" / "distill_lab" / "data"
WINDOW_LEN = 10


def run_cli(*args) -> None:
    subprocess.run([sys.executable, "-m", "uwbpdr.cli", *args], check=True)


def gt_epoch_positions(tmp: Path, scenario: Path, uwb_rate: float, imu_rate: float):
    """True positions at every ranging epoch, via the simulate subcommand."""
    sim_dir = tmp / "sim"
    run_cli("simulate", "--config", str(scenario), "--out", str(sim_dir))
    with open(sim_dir / "gt.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    stride = int(round(imu_rate / uwb_rate))
    return [(float(r[1]), float(r[2])) for r in rows[::stride]]


def main() -> int:
    seeds = list(range(int(sys.argv[1]) if len(sys.argv) > 1 else 9))
    scenario = DATA / "scenario_slalom.json"
    out = DATA / "curved_windows.csv"
    rates = json.loads(scenario.read_text())
    with tempfile.TemporaryDirectory() as tmp_str:
        tmp = Path(tmp_str)
        experiment = {
            "scenario": str(scenario),
            "seeds": seeds,
            "figures": False,
            "output_dir": str(tmp / "runs"),
            "dataset": {"source": "fused", "length": WINDOW_LEN},
        }
        config_path = tmp / "experiment.json"
        config_path.write_text(json.dumps(experiment))
        fused_csv = tmp / "fused.csv"
        run_cli("export-dataset", "--config", str(config_path),
                "--out", str(fused_csv))

        epochs = gt_epoch_positions(tmp, scenario,
                                    rates["uwb_rate"], rates["imu_rate"])

        with open(fused_csv, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            records = list(reader)

    per_seed, remainder = divmod(len(records), len(seeds))
    if remainder or per_seed + WINDOW_LEN > len(epochs):
        raise SystemExit(
            f"unexpected record layout: {len(records)} records, "
            f"{len(seeds)} seeds, {len(epochs)} epochs")

    n_eval = 0
    for row_index, row in enumerate(records):
        if row[-1] != "eval":
            continue
        i = row_index % per_seed
        gx, gy = epochs[i + WINDOW_LEN]
        row[-3], row[-2] = repr(gx), repr(gy)
        n_eval += 1

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(records)
    print(f"{out}: {len(records)} windows from {len(seeds)} seeds, "
          f"{n_eval} eval rows re-targeted to ground truth")
    return 0


if __name__ == "__main__":
    sys.exit(main())
