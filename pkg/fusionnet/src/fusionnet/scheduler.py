"""Reduce-on-plateau learning-rate schedule.

The rate is multiplied by a fixed factor once validation loss has failed to
improve for `patience` consecutive epochs; the plateau counter then resets.
"""

from __future__ import annotations

import torch


class PlateauScheduler:
    def __init__(
        self,
        optimizer: torch.optim.Optimizer,
        patience: int = 25,
        factor: float = 0.5,
        min_delta: float = 0.0,
    ) -> None:
        if patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.min_delta = min_delta
        self.best = float("inf")
        self.bad_epochs = 0

    @property
    def lr(self) -> float:
        return float(self.optimizer.param_groups[0]["lr"])

    def step(self, val_loss: float) -> float:
        """Record one epoch's validation loss; returns the rate now in effect."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                for group in self.optimizer.param_groups:
                    group["lr"] = group["lr"] * self.factor
                self.bad_epochs = 0
        return self.lr
