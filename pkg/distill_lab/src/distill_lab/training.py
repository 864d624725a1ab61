"""Teacher training and student distillation.

The teacher is a wide regressor fit to the train split with coordinate MSE
plus cross-entropy on binned targets for its token heads; inputs are
perturbed with meter-scaled Gaussian noise during training, which keeps the
high-capacity trunk from interpolating the supervision noise. The student
is then optimized against the frozen teacher with a three-part objective:

    L_total = alpha * L_MSE + beta * L_KD + gamma * L_text

where L_MSE imitates the teacher's coordinate predictions, L_KD is the
top-K restricted KL between token distributions (per axis, averaged), and
L_text penalizes the decoded-bin coordinate against the teacher prediction.
Bin decoding is non-differentiable, so during training L_text uses a
straight-through soft-argmax: the forward value is the argmax-bin center
while the gradient flows through the probability-weighted center average.

Units: L_MSE is squared meters, matching the evaluation metric, while
L_text is computed on normalized coordinates so its scale is commensurate
with the dimensionless L_KD. Before the token heads have learned anything
their decoded coordinate can sit anywhere in the bin range, and in meters
that error (squared, over a court-sized range) dwarfs every other term
and destabilizes the shared trunk.

The ablation baseline (train_base_student) shares the student architecture
and initialization seed but trains with pure MSE against the dataset
targets, so supervision is the only difference from distillation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import tokens
from .data import SPLIT_EVAL, SPLIT_TRAIN, TrainingSample, split_arrays
from .errors import ConfigError, DatasetError, DivergenceError
from .models import StudentNet, TeacherModel

MIN_TRAIN_RECORDS = 100
# Guard against a zero-variance axis when normalizing.
SCALE_FLOOR = 1e-6
# Margin added around the data's bounding box when deriving bin_range.
BIN_RANGE_PAD = 0.5


@dataclass
class DistillConfig:
    """Loss weights, vocabulary layout, and optimization settings.

    bin_range is ((x_lo, x_hi), (y_lo, y_hi)) in meters; None derives it
    from the train split's bounding box. max_target_jump drops train rows
    whose target is implausibly far from the window's last position (a
    tracking failure, not a reachable next step). split_seed is the default
    seed for resplit_samples when a dataset needs fresh split labels.
    """

    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    top_k: int = 10
    vocab_bins: int = 64
    bin_range: tuple | None = None
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-3
    split_seed: int = 77
    teacher_epochs: int = 100
    teacher_batch_size: int = 256
    teacher_learning_rate: float = 1e-3
    teacher_noise_sigma: float = 1.2
    teacher_ce_weight: float = 0.3
    max_target_jump: float = 1.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 1 <= self.top_k <= self.vocab_bins:
            raise ConfigError(
                f"top_k must be in [1, vocab_bins={self.vocab_bins}], got {self.top_k}")
        for name in ("epochs", "batch_size", "teacher_epochs", "teacher_batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("learning_rate", "teacher_learning_rate", "max_target_jump"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.teacher_noise_sigma < 0 or self.teacher_ce_weight < 0:
            raise ConfigError("teacher_noise_sigma and teacher_ce_weight must be >= 0")
        if self.bin_range is not None:
            ranges = tuple(self.bin_range)
            if len(ranges) != 2:
                raise ConfigError("bin_range must hold one (low, high) pair per axis")
            for pair in ranges:
                lo, hi = float(pair[0]), float(pair[1])
                if hi <= lo:
                    raise ConfigError(f"bin_range pair ({lo}, {hi}) must increase")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    l_mse: float
    l_kd: float
    l_text: float
    l_total: float
    eval_rmse: float


@dataclass
class _Arrays:
    x_train: torch.Tensor        # (n, 2L) meters
    t_train: torch.Tensor        # (n, 2) meters
    x_eval: torch.Tensor
    t_eval: torch.Tensor
    mean_xy: np.ndarray
    scale_xy: np.ndarray
    bin_range: tuple
    centers_x: torch.Tensor
    centers_y: torch.Tensor
    n_dropped: int = field(default=0)


def _prepare(samples: list[TrainingSample], config: DistillConfig) -> _Arrays:
    x_tr, t_tr, x_ev, t_ev = split_arrays(samples)
    jump = np.linalg.norm(t_tr - x_tr[:, -2:], axis=1)
    keep = jump <= config.max_target_jump
    n_dropped = int((~keep).sum())
    x_tr, t_tr = x_tr[keep], t_tr[keep]
    if len(x_tr) < 2:
        raise DatasetError(
            f"max_target_jump={config.max_target_jump} left {len(x_tr)} train rows")

    mean_xy = t_tr.mean(axis=0)
    scale_xy = np.maximum(t_tr.std(axis=0), SCALE_FLOOR)
    if config.bin_range is not None:
        bin_range = tuple((float(p[0]), float(p[1])) for p in config.bin_range)
    else:
        pts = np.vstack([x_tr.reshape(-1, 2), t_tr])
        bin_range = tuple(
            (float(pts[:, a].min() - BIN_RANGE_PAD), float(pts[:, a].max() + BIN_RANGE_PAD))
            for a in range(2))
    return _Arrays(
        x_train=torch.tensor(x_tr), t_train=torch.tensor(t_tr),
        x_eval=torch.tensor(x_ev), t_eval=torch.tensor(t_ev),
        mean_xy=mean_xy, scale_xy=scale_xy,
        bin_range=bin_range,
        centers_x=torch.tensor(tokens.bin_centers(bin_range[0], config.vocab_bins)),
        centers_y=torch.tensor(tokens.bin_centers(bin_range[1], config.vocab_bins)),
        n_dropped=n_dropped)


def _check_finite(loss: torch.Tensor, what: str, epoch: int) -> None:
    if not bool(torch.isfinite(loss)):
        raise DivergenceError(f"{what} diverged at epoch {epoch}")


def _perm_generator(seed: int, epoch: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed + 777 + epoch)


def train_teacher(dataset: list[TrainingSample], config: DistillConfig | None = None,
                  seed: int = 1) -> TeacherModel:
    """Fits the wide model on the train split and freezes it.

    The objective is meter-space coordinate MSE plus teacher_ce_weight
    times the mean per-axis cross-entropy of the token heads against
    binned targets. Deterministic given (dataset, config, seed).

    Raises:
        DatasetError: fewer than MIN_TRAIN_RECORDS samples.
        DivergenceError: non-finite loss, message names the epoch.
    """
    config = config or DistillConfig()
    if len(dataset) < MIN_TRAIN_RECORDS:
        raise DatasetError(
            f"teacher training needs >= {MIN_TRAIN_RECORDS} records, got {len(dataset)}")
    arrays = _prepare(dataset, config)
    model = TeacherModel(arrays.x_train.shape[1], config.vocab_bins, seed)
    model.set_normalization(arrays.mean_xy, arrays.scale_xy)

    target_np = arrays.t_train.numpy()
    idx_x = torch.tensor(tokens.encode_coordinate(
        target_np[:, 0], arrays.bin_range[0], config.vocab_bins))
    idx_y = torch.tensor(tokens.encode_coordinate(
        target_np[:, 1], arrays.bin_range[1], config.vocab_bins))

    optimizer = torch.optim.Adam(model.parameters(), lr=config.teacher_learning_rate)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=config.teacher_epochs)
    noise_gen = torch.Generator().manual_seed(seed * 7919 + 4242)
    n = len(arrays.x_train)
    for epoch in range(1, config.teacher_epochs + 1):
        perm = torch.randperm(n, generator=_perm_generator(seed, epoch))
        for start in range(0, n, config.teacher_batch_size):
            batch = perm[start:start + config.teacher_batch_size]
            xb = arrays.x_train[batch]
            if config.teacher_noise_sigma > 0:
                xb = xb + config.teacher_noise_sigma * torch.randn(
                    xb.shape, generator=noise_gen)
            coords, probs_x, probs_y = model.forward_meters(xb)
            mse = ((coords - arrays.t_train[batch]) ** 2).sum(dim=1).mean()
            ce = 0.5 * (
                torch.nn.functional.nll_loss(torch.log(probs_x), idx_x[batch])
                + torch.nn.functional.nll_loss(torch.log(probs_y), idx_y[batch]))
            loss = mse + config.teacher_ce_weight * ce
            _check_finite(loss, "teacher training", epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        scheduler.step()

    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


def _topk_kl_rows(p_teacher: torch.Tensor, p_student: torch.Tensor,
                  k: int) -> torch.Tensor:
    """Row-wise top-K restricted KL; same semantics as tokens.topk_kl."""
    order = torch.argsort(p_teacher, dim=1, descending=True, stable=True)[:, :k]
    t = torch.gather(p_teacher, 1, order)
    s = torch.gather(p_student, 1, order).clamp_min(tokens.STUDENT_PROB_FLOOR)
    t = t / t.sum(dim=1, keepdim=True)
    s = s / s.sum(dim=1, keepdim=True)
    # Zero-mass teacher bins contribute nothing; substituting ratio 1 there
    # keeps the backward pass free of 0/0 (a one-hot teacher would otherwise
    # produce NaN gradients through xlogy).
    ratio = torch.where(t > 0, t / s, torch.ones_like(t))
    return (t * torch.log(ratio)).sum(dim=1)


def _straight_through_decode(probs: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    """Argmax-bin center in the forward pass, soft-argmax gradient."""
    soft = probs @ centers
    hard = centers[probs.argmax(dim=1)]
    return soft + (hard - soft).detach()


def _run_student(arrays: _Arrays, config: DistillConfig, seed: int, weights,
                 batch_targets, what: str):
    alpha, beta, gamma = weights
    student = StudentNet(arrays.x_train.shape[1], config.vocab_bins, seed)
    student.set_normalization(arrays.mean_xy, arrays.scale_xy)
    optimizer = torch.optim.Adam(student.parameters(), lr=config.learning_rate)
    scale_xy = torch.tensor(arrays.scale_xy)
    n = len(arrays.x_train)
    logs = []
    zero = torch.zeros(())
    for epoch in range(1, config.epochs + 1):
        perm = torch.randperm(n, generator=_perm_generator(seed, epoch))
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            xb = arrays.x_train[batch]
            target_coords, target_px, target_py = batch_targets(batch, xb)
            s_coords, s_px, s_py = student.forward_meters(xb)
            l_mse = ((s_coords - target_coords) ** 2).sum(dim=1).mean()
            if beta > 0 and target_px is not None:
                l_kd = 0.5 * (_topk_kl_rows(target_px, s_px, config.top_k)
                              + _topk_kl_rows(target_py, s_py, config.top_k)).mean()
            else:
                l_kd = zero
            if gamma > 0:
                decoded = torch.stack(
                    [_straight_through_decode(s_px, arrays.centers_x),
                     _straight_through_decode(s_py, arrays.centers_y)], dim=1)
                diff = (decoded - target_coords) / scale_xy
                l_text = (diff ** 2).sum(dim=1).mean()
            else:
                l_text = zero
            loss = alpha * l_mse + beta * l_kd + gamma * l_text
            _check_finite(loss, what, epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums += (float(l_mse.detach()), float(l_kd.detach()),
                     float(l_text.detach()))
            batches += 1
        mse_avg, kd_avg, text_avg = (float(v) for v in sums / batches)
        logs.append(EpochLog(
            epoch=epoch, l_mse=mse_avg, l_kd=kd_avg, l_text=text_avg,
            l_total=alpha * mse_avg + beta * kd_avg + gamma * text_avg,
            eval_rmse=_rmse_tensors(student, arrays.x_eval, arrays.t_eval)))
    return student, logs


def distill_student(dataset: list[TrainingSample], teacher: TeacherModel,
                    config: DistillConfig | None = None,
                    seed: int = 100):
    """Distills a student against a frozen teacher; returns (student, log).

    Per batch the teacher provides coordinate soft targets and token
    distributions; the student minimizes the composite objective described
    in the module docstring. The teacher is only read, never updated.

    Raises:
        DivergenceError: non-finite loss, message names the epoch.
    """
    config = config or DistillConfig()
    arrays = _prepare(dataset, config)

    def targets(batch, xb):
        with torch.no_grad():
            return teacher.forward_meters(xb)

    return _run_student(arrays, config, seed,
                        (config.alpha, config.beta, config.gamma),
                        targets, "distillation")


def train_base_student(dataset: list[TrainingSample],
                       config: DistillConfig | None = None,
                       seed: int = 100):
    """Ablation baseline: the same student trained on the dataset targets.

    Identical architecture, initialization seed, optimizer, and batch
    schedule as distill_student; the loss weights are fixed at (1, 0, 0),
    so only the supervision differs.
    """
    config = config or DistillConfig()
    arrays = _prepare(dataset, config)

    def targets(batch, xb):
        return arrays.t_train[batch], None, None

    return _run_student(arrays, config, seed, (1.0, 0.0, 0.0),
                        targets, "baseline training")


def _rmse_tensors(model, x: torch.Tensor, t: torch.Tensor) -> float:
    with torch.no_grad():
        coords, _, _ = model.forward_meters(x)
    return float(torch.sqrt(((coords - t) ** 2).sum(dim=1).mean()))


def eval_rmse(model, samples: list[TrainingSample]) -> float:
    """Next-position RMSE (meters) of a model over the eval split."""
    evl = [s for s in samples if s.split == SPLIT_EVAL]
    if not evl:
        raise DatasetError("dataset has no eval rows")
    x = torch.tensor(np.stack([s.features() for s in evl]))
    t = torch.tensor(np.stack([s.target for s in evl]))
    return _rmse_tensors(model, x, t)


def resplit_samples(samples: list[TrainingSample], ratio: float,
                    seed: int) -> list[TrainingSample]:
    """Reassigns split labels with a seeded permutation; round(ratio*n) train."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = round(ratio * len(samples))
    train_rows = set(order[:n_train].tolist())
    return [
        TrainingSample(history=s.history, target=s.target,
                       split=SPLIT_TRAIN if i in train_rows else SPLIT_EVAL,
                       trend=s.trend)
        for i, s in enumerate(samples)
    ]


def write_training_log(logs: list[EpochLog], path: str | Path) -> None:
    """Writes the per-epoch loss components as a delimited log."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,L_MSE,L_KD,L_text,L_total,eval_RMSE\n")
        for row in logs:
            fh.write(f"{row.epoch},{row.l_mse!r},{row.l_kd!r},{row.l_text!r},"
                     f"{row.l_total!r},{row.eval_rmse!r}\n")
