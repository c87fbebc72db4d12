"""Training-loop behavior: determinism, history records, augmentation."""

import csv

import numpy as np
import pytest
import torch

from fusionnet import (
    ModelConfig,
    SliceDataset,
    TrainingConfig,
    build_model,
    foreground_dice,
    train,
    write_history_csv,
)
from fusionnet.train import _augment, _translate


def toy_dataset(n=4, size=32, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.zeros((n, size, size), dtype=np.int64)
    labels[:, 8:24, 8:24] = 1
    labels[:, 12:20, 12:20] = 3
    x = np.zeros((n, 2, size, size), dtype=np.float32)
    x[:, 0] = labels * 0.4 + rng.normal(0, 0.02, (n, size, size))
    x[:, 1] = (labels == 3) * 0.9 + rng.normal(0, 0.02, (n, size, size))
    return SliceDataset(torch.from_numpy(x), torch.from_numpy(labels))


def fresh_model(seed, **overrides):
    torch.manual_seed(seed)
    kwargs = {"n_modalities": 2, "fusion": "early", "base_channels": 4}
    kwargs.update(overrides)
    return build_model(ModelConfig(**kwargs))


class TestTrain:
    def test_identical_seeds_identical_history(self):
        ds = toy_dataset()
        tc = TrainingConfig(batch_size=2, seed=11)
        h1 = train(fresh_model(11), ds, tc, 3)
        h2 = train(fresh_model(11), ds, tc, 3)
        assert h1 == h2
        assert h1[0].train_loss == h2[0].train_loss

    def test_history_fields(self):
        ds = toy_dataset()
        tc = TrainingConfig(batch_size=4, seed=0)
        history = train(fresh_model(0), ds, tc, 2)
        assert [r.epoch for r in history] == [1, 2]
        for record in history:
            assert record.lr == tc.initial_lr  # no plateau in 2 epochs
            assert record.train_loss > 0
            assert record.val_loss > 0

    def test_empty_dataset_raises(self):
        ds = toy_dataset()
        empty = SliceDataset(ds.inputs[:0], ds.labels[:0])
        with pytest.raises(ValueError):
            train(fresh_model(0), empty, TrainingConfig(), 1)

    def test_zero_epochs_raises(self):
        with pytest.raises(ValueError):
            train(fresh_model(0), toy_dataset(), TrainingConfig(), 0)

    def test_augmentation_path_trains(self):
        ds = toy_dataset()
        tc = TrainingConfig(batch_size=4, seed=5, augmentation=True)
        history = train(fresh_model(5), ds, tc, 2)
        assert len(history) == 2
        assert all(np.isfinite(r.train_loss) for r in history)


class TestHistoryCsv:
    def test_round_trip(self, tmp_path):
        ds = toy_dataset()
        history = train(fresh_model(1), ds, TrainingConfig(batch_size=4, seed=1), 2)
        path = tmp_path / "history.csv"
        write_history_csv(history, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["epoch", "train_loss", "val_loss", "lr"]
        assert len(rows) == 3
        assert int(rows[1][0]) == 1
        assert float(rows[1][1]) == pytest.approx(history[0].train_loss, abs=1e-7)
        assert float(rows[2][3]) == history[1].lr


class TestAugmentation:
    def test_translate_moves_content(self):
        t = torch.zeros(1, 1, 8, 8)
        t[0, 0, 2, 3] = 5.0
        out = _translate(t, dy=1, dx=-2)
        assert out[0, 0, 3, 1] == 5.0
        assert out.sum() == 5.0

    def test_translate_drops_shifted_out(self):
        t = torch.ones(1, 1, 4, 4)
        out = _translate(t, dy=2, dx=0)
        assert out[0, 0, :2].sum() == 0.0
        assert out[0, 0, 2:].sum() == 8.0

    def test_augment_keeps_targets_one_hot(self):
        gen = torch.Generator().manual_seed(0)
        labels = torch.randint(0, 6, (2, 16, 16))
        from fusionnet import one_hot

        targets = one_hot(labels)
        inputs = torch.randn(2, 3, 16, 16)
        for _ in range(20):
            a_in, a_t = _augment(inputs, targets, gen)
            assert a_in.shape == inputs.shape
            assert torch.all(a_t.sum(dim=1) == 1.0)


class TestForegroundDice:
    def test_perfect_is_one(self):
        ds = toy_dataset(n=2)

        class Oracle(torch.nn.Module):
            def __init__(self, labels):
                super().__init__()
                self.labels = labels
                self.idx = 0

            def forward(self, x):
                out = torch.zeros(x.shape[0], 6, x.shape[2], x.shape[3])
                for b in range(x.shape[0]):
                    lab = self.labels[self.idx + b]
                    for c in range(6):
                        out[b, c][lab == c] = 1.0
                self.idx += x.shape[0]
                return out

        assert foreground_dice(Oracle(ds.labels), ds) == 1.0

    def test_all_background_prediction(self):
        ds = toy_dataset(n=1)

        class Background(torch.nn.Module):
            def forward(self, x):
                out = torch.zeros(x.shape[0], 6, x.shape[2], x.shape[3])
                out[:, 0] = 1.0
                return out

        assert foreground_dice(Background(), ds) == 0.0
