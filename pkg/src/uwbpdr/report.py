"""Figure rendering for run artifacts.

Every metric the harness writes as CSV/JSON also gets a PNG next to it so a
run directory is browsable without loading anything: a trajectory overlay
with anchors and obstruction zones, error CDFs, and an ATE boxplot. All
rendering targets files; no interactive backend is ever required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

import numpy as np

_PIPELINE_COLORS = {
    "gt": "0.3",
    "uwb": "tab:orange",
    "pdr": "tab:green",
    "ekf_fixed": "tab:red",
    "ekf_adaptive": "tab:blue",
}


def _color(name: str):
    return _PIPELINE_COLORS.get(name, None)


def render_trajectory_figure(path: str | Path, scenario, gt,
                             tracks: dict) -> None:
    """Overlay of ground truth and estimated paths in the anchor frame.

    Args:
        path: output PNG path.
        scenario: provides anchors and obstruction zones.
        gt: GroundTruth for the reference path.
        tracks: name -> (times, (n, 2) positions) estimated paths.
    """
    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    for lo, hi in scenario.nlos_zones:
        ax.add_patch(Rectangle(lo, hi[0] - lo[0], hi[1] - lo[1],
                               facecolor="0.85", edgecolor="0.6",
                               hatch="//", zorder=0, label="_zone"))
    ax.plot(gt.positions[:, 0], gt.positions[:, 1], color=_color("gt"),
            lw=2.0, label="ground truth", zorder=2)
    for name, (_, positions) in tracks.items():
        positions = np.asarray(positions)
        ax.plot(positions[:, 0], positions[:, 1], lw=1.2, alpha=0.9,
                color=_color(name), label=name, zorder=3)
    ax.scatter(scenario.anchors[:, 0], scenario.anchors[:, 1], marker="^",
               s=80, color="k", label="anchors", zorder=4)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(scenario.name)
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cdf_figure(path: str | Path, cdfs: dict, title: str = "ATE CDF") -> None:
    """Step-style error CDFs, one curve per run.

    Args:
        cdfs: name -> sequence of (error, cumulative fraction).
    """
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for name, cdf in cdfs.items():
        cdf = np.asarray(cdf, dtype=float)
        ax.step(cdf[:, 0], cdf[:, 1], where="post", label=name, color=_color(name))
    ax.set_xlabel("absolute trajectory error (m)")
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_box_figure(path: str | Path, errors_by_name: dict,
                      title: str = "ATE distribution") -> None:
    """Boxplot of per-sample errors, one box per run."""
    names = list(errors_by_name)
    data = [np.asarray(errors_by_name[n], dtype=float) for n in names]
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(names), 4.5))
    ax.boxplot(data, tick_labels=names, whis=1.5, showfliers=True)
    ax.set_ylabel("absolute trajectory error (m)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
