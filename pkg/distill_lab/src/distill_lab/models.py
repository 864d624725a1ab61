"""Teacher and student network definitions.

Both models share one structure: a feed-forward trunk over the normalized
flattened window, a 2-vector coordinate head, and one token head per axis
emitting a probability distribution over the coordinate-bin vocabulary.
They differ only in trunk width. All math is float64 so that an exported
student replays bit-comparably outside this package.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch
from torch import nn

TEACHER_WIDTHS = (256, 256, 128)
STUDENT_WIDTHS = (64, 64)


def _seeded_init(linear: nn.Linear, generator: torch.Generator) -> None:
    # Uniform(-a, a) with a = fan_in^-1/2 and zero bias, drawn from an
    # explicit generator so construction is reproducible by seed alone.
    a = linear.in_features ** -0.5
    with torch.no_grad():
        linear.weight.copy_(
            (torch.rand(linear.weight.shape, generator=generator) * 2 - 1) * a)
        linear.bias.zero_()


class SequenceRegressor(nn.Module):
    """Trunk + coordinate head + per-axis token heads over normalized input.

    Normalization statistics live in buffers (norm_mean, norm_scale) with
    one entry per input feature; position slots repeat the per-axis values,
    so entries 0 and 1 double as the output de-normalization. forward takes
    and returns normalized coordinates; forward_meters wraps both ends.
    """

    def __init__(self, input_dim: int, trunk_widths, vocab_bins: int, seed: int):
        super().__init__()
        self.input_dim = int(input_dim)
        self.vocab_bins = int(vocab_bins)
        self.trunk_widths = tuple(int(w) for w in trunk_widths)
        gen = torch.Generator().manual_seed(int(seed))
        layers = []
        prev = self.input_dim
        for width in self.trunk_widths:
            lin = nn.Linear(prev, width).double()
            _seeded_init(lin, gen)
            layers.extend([lin, nn.ReLU()])
            prev = width
        self.trunk = nn.Sequential(*layers)
        self.coord_head = nn.Linear(prev, 2).double()
        self.token_head_x = nn.Linear(prev, self.vocab_bins).double()
        self.token_head_y = nn.Linear(prev, self.vocab_bins).double()
        for head in (self.coord_head, self.token_head_x, self.token_head_y):
            _seeded_init(head, gen)
        self.register_buffer("norm_mean", torch.zeros(self.input_dim, dtype=torch.float64))
        self.register_buffer("norm_scale", torch.ones(self.input_dim, dtype=torch.float64))

    def set_normalization(self, mean_xy, scale_xy) -> None:
        """Installs per-axis statistics, tiled across the position slots."""
        mean_xy = np.asarray(mean_xy, dtype=float)
        scale_xy = np.asarray(scale_xy, dtype=float)
        reps = self.input_dim // 2
        with torch.no_grad():
            self.norm_mean.copy_(torch.tensor(np.tile(mean_xy, reps)))
            self.norm_scale.copy_(torch.tensor(np.tile(scale_xy, reps)))

    def normalize(self, x_meters: torch.Tensor) -> torch.Tensor:
        return (x_meters - self.norm_mean) / self.norm_scale

    def coords_to_meters(self, coords_norm: torch.Tensor) -> torch.Tensor:
        return coords_norm * self.norm_scale[:2] + self.norm_mean[:2]

    def forward(self, x_norm: torch.Tensor):
        """Returns (coords_norm, probs_x, probs_y); token rows are simplexes."""
        h = self.trunk(x_norm)
        coords = self.coord_head(h)
        probs_x = torch.softmax(self.token_head_x(h), dim=-1)
        probs_y = torch.softmax(self.token_head_y(h), dim=-1)
        return coords, probs_x, probs_y

    def forward_meters(self, x_meters: torch.Tensor):
        """Runs on meter-space windows; coordinates come back in meters."""
        coords, probs_x, probs_y = self(self.normalize(x_meters))
        return self.coords_to_meters(coords), probs_x, probs_y


class TeacherModel(SequenceRegressor):
    def __init__(self, input_dim: int, vocab_bins: int, seed: int):
        super().__init__(input_dim, TEACHER_WIDTHS, vocab_bins, seed)


class StudentNet(SequenceRegressor):
    def __init__(self, input_dim: int, vocab_bins: int, seed: int):
        super().__init__(input_dim, STUDENT_WIDTHS, vocab_bins, seed)


def parameter_hash(model: nn.Module) -> str:
    """SHA-256 over parameter names and exact float64 bytes.

    Buffers are excluded: the hash witnesses trainable state only.
    """
    digest = hashlib.sha256()
    for name, param in model.named_parameters():
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().astype(np.float64).tobytes())
    return digest.hexdigest()
