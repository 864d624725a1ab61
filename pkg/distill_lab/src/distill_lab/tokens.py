"""Coordinate-bin vocabulary: encoding, decoding, and restricted KL.

Continuous coordinates are discretized into a uniform per-axis vocabulary of
bins so that a regression model can also emit a categorical distribution per
axis. The distillation loss compares those distributions only over the
teacher's top-K bins.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

# Smallest probability granted to a student bin inside the restricted
# support; keeps the KL finite when the student assigns zero mass there.
STUDENT_PROB_FLOOR = 1e-12


def _check_range(bin_range, vocab_bins: int) -> tuple[float, float]:
    try:
        lo, hi = float(bin_range[0]), float(bin_range[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bin_range must be a (low, high) pair: {exc}") from exc
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ConfigError(f"bin_range must satisfy low < high, got ({lo}, {hi})")
    if int(vocab_bins) < 1:
        raise ConfigError(f"vocab_bins must be >= 1, got {vocab_bins}")
    return lo, hi


def bin_centers(bin_range, vocab_bins: int) -> np.ndarray:
    """Centers of vocab_bins uniform bins spanning bin_range."""
    lo, hi = _check_range(bin_range, vocab_bins)
    width = (hi - lo) / vocab_bins
    return lo + width * (np.arange(vocab_bins) + 0.5)


def encode_coordinate(value, bin_range, vocab_bins: int) -> np.ndarray:
    """Bin index of each coordinate value, clipped into the vocabulary.

    Values outside bin_range land in the first or last bin, so encoding
    never fails on slightly out-of-box data.
    """
    lo, hi = _check_range(bin_range, vocab_bins)
    width = (hi - lo) / vocab_bins
    idx = np.floor((np.asarray(value, dtype=float) - lo) / width).astype(int)
    return np.clip(idx, 0, vocab_bins - 1)


def decode_token_coordinate(p, bin_range, vocab_bins: int) -> float:
    """Argmax-bin center of a per-axis distribution, ties toward lower index."""
    p = np.asarray(p, dtype=float)
    if p.shape != (int(vocab_bins),):
        raise ConfigError(
            f"distribution length {p.shape} does not match vocab_bins {vocab_bins}")
    return float(bin_centers(bin_range, vocab_bins)[int(np.argmax(p))])


def topk_kl(p_teacher, p_student, k: int) -> float:
    """KL divergence over the teacher's K most probable bins.

    Both distributions are restricted to the support of the teacher's K
    largest entries (ties resolved toward lower indices) and renormalized
    over it; student entries are floored at STUDENT_PROB_FLOOR before
    renormalization, so zero student mass on the support is handled rather
    than an error. Returns sum(p_t * log(p_t / p_s)) over the support,
    which is always >= 0.
    """
    p_t = np.asarray(p_teacher, dtype=float)
    p_s = np.asarray(p_student, dtype=float)
    if p_t.shape != p_s.shape or p_t.ndim != 1:
        raise ConfigError(
            f"distributions must be 1-D and same length, got {p_t.shape} vs {p_s.shape}")
    if not 1 <= int(k) <= p_t.size:
        raise ConfigError(f"k must be in [1, {p_t.size}], got {k}")
    support = np.argsort(-p_t, kind="stable")[: int(k)]
    t = p_t[support]
    s = np.maximum(p_s[support], STUDENT_PROB_FLOOR)
    t = t / t.sum()
    s = s / s.sum()
    mask = t > 0.0
    return float(np.sum(t[mask] * np.log(t[mask] / s[mask])))
