import csv

import numpy as np
import pytest
import torch

from distill_lab import tokens
from distill_lab.data import WINDOW_LEN, TrainingSample
from distill_lab.errors import ConfigError, DatasetError, DivergenceError
from distill_lab.models import StudentNet, parameter_hash
from distill_lab.training import (MIN_TRAIN_RECORDS, DistillConfig, EpochLog,
                                  _prepare, distill_student, eval_rmse,
                                  resplit_samples, train_base_student,
                                  train_teacher, write_training_log)


def make_linear_samples(n=300, noise=0.02, seed=0):
    """Constant-velocity walks with observation noise; last fifth is eval."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        start = rng.uniform(-4.0, 4.0, 2)
        velocity = rng.uniform(-0.15, 0.15, 2)
        steps = np.arange(WINDOW_LEN + 1)[:, None]
        pts = start + velocity * steps + rng.normal(0.0, noise, (WINDOW_LEN + 1, 2))
        samples.append(TrainingSample(
            history=pts[:WINDOW_LEN], target=pts[WINDOW_LEN],
            split="train" if i < int(0.8 * n) else "eval"))
    return samples


def constant_velocity_rmse(samples):
    ev = [s for s in samples if s.split == "eval"]
    pred = np.stack([2.0 * s.history[-1] - s.history[-2] for s in ev])
    err = pred - np.stack([s.target for s in ev])
    return float(np.sqrt((err ** 2).sum(axis=1).mean()))


def small_config(**overrides):
    base = dict(vocab_bins=16, top_k=8, epochs=12, batch_size=64,
                teacher_epochs=60, teacher_batch_size=64,
                teacher_noise_sigma=0.05)
    base.update(overrides)
    return DistillConfig(**base)


@pytest.fixture(scope="module")
def linear_samples():
    return make_linear_samples()


@pytest.fixture(scope="module")
def trained_teacher(linear_samples):
    return train_teacher(linear_samples, small_config(), seed=1)


class TestConfigValidation:
    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            DistillConfig(alpha=-0.1)

    def test_top_k_bounded_by_vocab(self):
        with pytest.raises(ConfigError):
            DistillConfig(top_k=65, vocab_bins=64)
        with pytest.raises(ConfigError):
            DistillConfig(top_k=0)

    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigError):
            DistillConfig(epochs=0)

    def test_bad_bin_range_rejected(self):
        with pytest.raises(ConfigError):
            DistillConfig(bin_range=((0.0, 10.0),))
        with pytest.raises(ConfigError):
            DistillConfig(bin_range=((0.0, 10.0), (5.0, 5.0)))

    def test_defaults_are_valid(self):
        config = DistillConfig()
        assert (config.alpha, config.beta, config.gamma) == (0.5, 0.3, 0.2)
        assert config.top_k == 10 and config.vocab_bins == 64


class TestTeacherTraining:
    def test_refuses_small_datasets(self):
        samples = make_linear_samples(n=MIN_TRAIN_RECORDS - 1)
        with pytest.raises(DatasetError, match=str(MIN_TRAIN_RECORDS)):
            train_teacher(samples, small_config())

    def test_beats_constant_velocity_on_linear_walks(self, linear_samples,
                                                     trained_teacher):
        cv = constant_velocity_rmse(linear_samples)
        assert eval_rmse(trained_teacher, linear_samples) < cv + 0.05

    def test_retraining_is_deterministic(self, linear_samples):
        config = small_config(teacher_epochs=8)
        a = train_teacher(linear_samples, config, seed=4)
        b = train_teacher(linear_samples, config, seed=4)
        assert parameter_hash(a) == parameter_hash(b)
        assert abs(eval_rmse(a, linear_samples)
                   - eval_rmse(b, linear_samples)) <= 1e-6

    def test_comes_back_frozen(self, trained_teacher):
        assert not trained_teacher.training
        assert all(not p.requires_grad for p in trained_teacher.parameters())

    def test_divergence_names_epoch(self, linear_samples):
        config = small_config(teacher_epochs=3, teacher_learning_rate=1e12)
        with pytest.raises(DivergenceError, match=r"epoch \d+"):
            train_teacher(linear_samples, config)


class TestDistillation:
    def test_teacher_untouched(self, linear_samples, trained_teacher):
        before = parameter_hash(trained_teacher)
        distill_student(linear_samples, trained_teacher,
                        small_config(epochs=2), seed=100)
        assert parameter_hash(trained_teacher) == before

    def test_loss_identity_every_epoch(self, linear_samples, trained_teacher):
        config = small_config(epochs=6)
        _, logs = distill_student(linear_samples, trained_teacher, config,
                                  seed=100)
        assert len(logs) == 6
        for row in logs:
            expected = (config.alpha * row.l_mse + config.beta * row.l_kd
                        + config.gamma * row.l_text)
            assert abs(row.l_total - expected) <= 1e-9

    def test_retraining_is_deterministic(self, linear_samples, trained_teacher):
        config = small_config(epochs=4)
        a, logs_a = distill_student(linear_samples, trained_teacher, config,
                                    seed=100)
        b, logs_b = distill_student(linear_samples, trained_teacher, config,
                                    seed=100)
        assert parameter_hash(a) == parameter_hash(b)
        assert abs(logs_a[-1].eval_rmse - logs_b[-1].eval_rmse) <= 1e-6

    def test_imitation_only_halves_gap_to_teacher(self, linear_samples,
                                                  trained_teacher):
        config = small_config(alpha=1.0, beta=0.0, gamma=0.0, epochs=15)
        arrays = _prepare(linear_samples, config)

        def imitation_rmse(model):
            with torch.no_grad():
                ours = model.forward_meters(arrays.x_eval)[0]
                theirs = trained_teacher.forward_meters(arrays.x_eval)[0]
            return float(torch.sqrt(((ours - theirs) ** 2).sum(dim=1).mean()))

        untrained = StudentNet(arrays.x_train.shape[1], config.vocab_bins,
                               seed=100)
        untrained.set_normalization(arrays.mean_xy, arrays.scale_xy)
        student, _ = distill_student(linear_samples, trained_teacher, config,
                                     seed=100)
        assert imitation_rmse(student) <= 0.5 * imitation_rmse(untrained)

    def test_kd_only_matches_one_hot_teacher_argmax(self):
        # Full-vocabulary support: against a one-hot teacher the restricted
        # KL then reduces to cross-entropy, which must move the argmax.
        linear_samples = make_linear_samples(n=600, seed=2)
        config = small_config(alpha=0.0, beta=1.0, gamma=0.0, epochs=60,
                              learning_rate=5e-3, top_k=8, vocab_bins=8,
                              bin_range=((-8.0, 8.0), (-8.0, 8.0)))

        class OneHotExtrapolator:
            """Stub teacher: one-hot tokens at the extrapolated position."""

            def forward_meters(self, xb):
                coords = 2.0 * xb[:, -2:] - xb[:, -4:-2]
                probs = []
                for axis in range(2):
                    idx = tokens.encode_coordinate(
                        coords[:, axis].numpy(), config.bin_range[axis],
                        config.vocab_bins)
                    p = torch.zeros((len(idx), config.vocab_bins),
                                    dtype=torch.float64)
                    p[torch.arange(len(idx)), torch.tensor(idx)] = 1.0
                    probs.append(p)
                return coords, probs[0], probs[1]

        stub = OneHotExtrapolator()
        student, _ = distill_student(linear_samples, stub, config, seed=100)
        arrays = _prepare(linear_samples, config)
        with torch.no_grad():
            _, s_px, s_py = student.forward_meters(arrays.x_eval)
        _, t_px, t_py = stub.forward_meters(arrays.x_eval)
        agree_x = (s_px.argmax(dim=1) == t_px.argmax(dim=1)).double().mean()
        agree_y = (s_py.argmax(dim=1) == t_py.argmax(dim=1)).double().mean()
        assert 0.5 * float(agree_x + agree_y) >= 0.9

    def test_divergence_names_epoch(self, linear_samples):
        class PoisonedTeacher:
            def forward_meters(self, xb):
                coords = torch.full((len(xb), 2), float("nan"),
                                    dtype=torch.float64)
                probs = torch.full((len(xb), 16), 1.0 / 16,
                                   dtype=torch.float64)
                return coords, probs, probs

        with pytest.raises(DivergenceError, match=r"epoch 1"):
            distill_student(linear_samples, PoisonedTeacher(),
                            small_config(epochs=2), seed=100)


class TestBaselineStudent:
    def test_token_losses_zero_and_total_equals_mse(self, linear_samples):
        _, logs = train_base_student(linear_samples, small_config(epochs=3),
                                     seed=100)
        for row in logs:
            assert row.l_kd == 0.0 and row.l_text == 0.0
            assert row.l_total == row.l_mse

    def test_same_seed_gives_same_init_as_distilled(self, linear_samples,
                                                    trained_teacher):
        # Both trainers must start from the identical network so that
        # supervision is the only difference between them.
        config = small_config()
        arrays = _prepare(linear_samples, config)
        init = parameter_hash(
            StudentNet(arrays.x_train.shape[1], config.vocab_bins, seed=100))
        assert init == parameter_hash(
            StudentNet(arrays.x_train.shape[1], config.vocab_bins, seed=100))


class TestPrepare:
    def test_jump_filter_drops_teleporting_targets(self, linear_samples):
        bad = TrainingSample(
            history=linear_samples[0].history,
            target=linear_samples[0].target + 50.0, split="train")
        arrays = _prepare(linear_samples + [bad], small_config())
        clean = _prepare(linear_samples, small_config())
        assert arrays.n_dropped == clean.n_dropped + 1
        assert len(arrays.x_train) == len(clean.x_train)

    def test_bin_range_covers_data_with_margin(self, linear_samples):
        arrays = _prepare(linear_samples, small_config())
        pts = arrays.x_train.numpy().reshape(-1, 2)
        for axis in range(2):
            lo, hi = arrays.bin_range[axis]
            assert lo < pts[:, axis].min() and hi > pts[:, axis].max()

    def test_explicit_bin_range_respected(self, linear_samples):
        config = small_config(bin_range=((-20.0, 20.0), (-10.0, 10.0)))
        arrays = _prepare(linear_samples, config)
        assert arrays.bin_range == ((-20.0, 20.0), (-10.0, 10.0))


class TestEvalRmse:
    def test_requires_eval_rows(self, trained_teacher):
        train_only = make_linear_samples(n=120)
        train_only = [s for s in train_only if s.split == "train"]
        with pytest.raises(DatasetError):
            eval_rmse(trained_teacher, train_only)

    def test_zero_for_perfect_predictor(self, linear_samples):
        class Oracle:
            def forward_meters(self, x):
                targets = torch.stack([
                    torch.tensor(s.target) for s in linear_samples
                    if s.split == "eval"])
                return targets, None, None

        assert eval_rmse(Oracle(), linear_samples) == 0.0


class TestResplit:
    def test_deterministic_and_ratio_respected(self, linear_samples):
        a = resplit_samples(linear_samples, 0.7, seed=5)
        b = resplit_samples(linear_samples, 0.7, seed=5)
        assert [s.split for s in a] == [s.split for s in b]
        n_train = sum(1 for s in a if s.split == "train")
        assert n_train == round(0.7 * len(linear_samples))

    def test_seed_changes_assignment(self, linear_samples):
        a = resplit_samples(linear_samples, 0.7, seed=5)
        b = resplit_samples(linear_samples, 0.7, seed=6)
        assert [s.split for s in a] != [s.split for s in b]

    def test_ratio_bounds(self, linear_samples):
        with pytest.raises(ConfigError):
            resplit_samples(linear_samples, 1.0, seed=0)


class TestTrainingLog:
    def test_round_trips_exactly(self, tmp_path):
        logs = [EpochLog(epoch=1, l_mse=0.1 + 0.2, l_kd=1e-17, l_text=3.25,
                         l_total=0.5 * 0.3, eval_rmse=0.7071067811865476),
                EpochLog(epoch=2, l_mse=2.0, l_kd=0.0, l_text=0.0,
                         l_total=1.0, eval_rmse=0.5)]
        path = tmp_path / "log.csv"
        write_training_log(logs, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "epoch,L_MSE,L_KD,L_text,L_total,eval_RMSE"
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert int(rows[0]["epoch"]) == 1
        assert float(rows[0]["L_MSE"]) == 0.1 + 0.2
        assert float(rows[0]["L_KD"]) == 1e-17
        assert float(rows[0]["eval_RMSE"]) == 0.7071067811865476

    def test_real_log_parses_as_floats(self, linear_samples, trained_teacher,
                                       tmp_path):
        _, logs = distill_student(linear_samples, trained_teacher,
                                  small_config(epochs=2), seed=100)
        path = tmp_path / "log.csv"
        write_training_log(logs, path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        for row in rows:
            total = float(row["L_total"])
            parts = (0.5 * float(row["L_MSE"]) + 0.3 * float(row["L_KD"])
                     + 0.2 * float(row["L_text"]))
            assert abs(total - parts) <= 1e-9
