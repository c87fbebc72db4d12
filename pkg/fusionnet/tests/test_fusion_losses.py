"""Loss terms and the plateau learning-rate schedule."""

import math

import pytest
import torch

from fusionnet import (
    PlateauScheduler,
    cross_entropy_loss,
    one_hot,
    segmentation_loss,
    soft_dice_loss,
)


def random_distribution(shape, seed):
    gen = torch.Generator().manual_seed(seed)
    logits = torch.randn(shape, generator=gen)
    return torch.softmax(logits, dim=1)


def random_target(n, h, w, seed, n_classes=6):
    gen = torch.Generator().manual_seed(seed)
    labels = torch.randint(0, n_classes, (n, h, w), generator=gen)
    return one_hot(labels, n_classes)


class TestLosses:
    def test_perfect_prediction_near_zero(self):
        target = random_target(2, 32, 32, seed=0)
        assert segmentation_loss(target.clone(), target).item() <= 1e-3

    def test_uniform_cross_entropy_is_ln6(self):
        target = random_target(2, 16, 16, seed=1).double()
        uniform = torch.full((2, 6, 16, 16), 1.0 / 6.0, dtype=torch.float64)
        ce = cross_entropy_loss(uniform, target).item()
        assert abs(ce - math.log(6.0)) < 1e-6

    @pytest.mark.parametrize("seed", [2, 3, 4, 5])
    def test_non_negative(self, seed):
        pred = random_distribution((2, 6, 16, 16), seed)
        target = random_target(2, 16, 16, seed + 100)
        assert soft_dice_loss(pred, target).item() >= 0.0
        assert cross_entropy_loss(pred, target).item() >= 0.0
        assert segmentation_loss(pred, target).item() >= 0.0

    def test_shape_mismatch_raises(self):
        pred = random_distribution((1, 6, 16, 16), 0)
        target = random_target(1, 32, 32, 0)
        for fn in (soft_dice_loss, cross_entropy_loss, segmentation_loss):
            with pytest.raises(ValueError):
                fn(pred, target)

    def test_dice_ignores_absent_classes(self):
        # batch containing only classes 0 and 1: predicted mass on class 5
        # shows up through classes 0/1 being wrong, never through a 0/0 term
        labels = torch.zeros(1, 8, 8, dtype=torch.long)
        labels[0, :4] = 1
        target = one_hot(labels)
        pred = target.clone()
        dice_perfect = soft_dice_loss(pred, target).item()
        assert dice_perfect < 1e-5

        shifted = torch.full((1, 6, 8, 8), 1e-9)
        shifted[:, 0] = target[:, 0]
        shifted[:, 1] = target[:, 1]
        assert soft_dice_loss(shifted, target).item() == pytest.approx(dice_perfect, abs=1e-6)

    def test_one_hot_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            one_hot(torch.zeros(2, 6, 8, 8, dtype=torch.long))


class TestPlateauScheduler:
    def make(self, patience=25):
        model = torch.nn.Linear(2, 2)
        opt = torch.optim.Adam(model.parameters(), lr=1e-3)
        return PlateauScheduler(opt, patience=patience, factor=0.5)

    def test_halves_exactly_after_patience(self):
        sched = self.make()
        assert sched.step(1.0) == 1e-3
        for _ in range(24):
            assert sched.step(1.0) == 1e-3  # epochs 2..25 without improvement
        assert sched.step(1.0) == 1e-3 * 0.5

    def test_improvement_resets_counter(self):
        sched = self.make(patience=3)
        sched.step(1.0)
        sched.step(1.0)
        sched.step(1.0)
        sched.step(0.5)  # improvement wipes the two bad epochs
        assert sched.lr == 1e-3
        sched.step(0.5)
        sched.step(0.5)
        assert sched.step(0.5) == 5e-4

    def test_consecutive_halvings(self):
        sched = self.make(patience=2)
        sched.step(1.0)
        lrs = [sched.step(1.0) for _ in range(8)]
        assert lrs == [1e-3, 5e-4, 5e-4, 2.5e-4, 2.5e-4, 1.25e-4, 1.25e-4, 6.25e-5]

    def test_rejects_bad_parameters(self):
        model = torch.nn.Linear(2, 2)
        opt = torch.optim.Adam(model.parameters(), lr=1e-3)
        with pytest.raises(ValueError):
            PlateauScheduler(opt, patience=0)
        with pytest.raises(ValueError):
            PlateauScheduler(opt, factor=1.5)
