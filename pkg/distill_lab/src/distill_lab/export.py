"""Portable weight export for trained students.

Writes the JSON weight format the localization runtime loads: input
normalization statistics plus a list of affine layers with activations.
Only the coordinate path (trunk + coordinate head) is exported; the token
heads exist for distillation and stay behind. Floats are serialized with
Python's shortest round-trip repr, so re-exporting an unchanged model is
byte-identical and the loaded network reproduces the trainer bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .errors import ExportError
from .models import SequenceRegressor

FORMAT_VERSION = 1


def student_document(student: SequenceRegressor) -> dict:
    """Builds the weight document for a model's coordinate path.

    Raises:
        ExportError: inconsistent layer dimension chain, naming the layer.
    """
    linears = [m for m in student.trunk if isinstance(m, torch.nn.Linear)]
    linears.append(student.coord_head)
    layers = []
    prev = student.input_dim
    for i, lin in enumerate(linears):
        w = lin.weight.detach().cpu().numpy()
        b = lin.bias.detach().cpu().numpy()
        if w.shape[1] != prev:
            raise ExportError(
                f"layer {i}: weight shape {tuple(w.shape)} expects input "
                f"{w.shape[1]}, previous layer provides {prev}")
        prev = w.shape[0]
        layers.append({
            "w": [[float(v) for v in row] for row in w],
            "b": [float(v) for v in b],
            "act": "linear" if lin is student.coord_head else "relu",
        })
    if prev != 2:
        raise ExportError(f"layer {len(layers) - 1}: final width {prev} != 2")
    return {
        "format_version": FORMAT_VERSION,
        "input_dim": student.input_dim,
        "output_dim": 2,
        "uses_trend": False,
        "norm": {
            "mean": [float(v) for v in student.norm_mean],
            "scale": [float(v) for v in student.norm_scale],
        },
        "layers": layers,
    }


def export_student(student: SequenceRegressor, path: str | Path) -> Path:
    """Serializes the student's coordinate path to a weight file."""
    doc = student_document(student)
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")
    return path
