"""Training loop: Adam with L2 weight decay and plateau-halved learning rate.

Deterministic for a fixed seed: model init, shuffling, and (optional)
augmentation all draw from generators seeded by the training config.
"""

from __future__ import annotations

import csv
import os
from typing import NamedTuple

import torch
from torch.utils.data import DataLoader

from .config import TrainingConfig
from .data import SliceDataset
from .losses import segmentation_loss
from .scheduler import PlateauScheduler


class EpochRecord(NamedTuple):
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def _translate(t: torch.Tensor, dy: int, dx: int) -> torch.Tensor:
    """Zero-filled integer shift along the last two axes."""
    out = torch.zeros_like(t)
    h, w = t.shape[-2], t.shape[-1]
    src_y = slice(max(-dy, 0), h - max(dy, 0))
    src_x = slice(max(-dx, 0), w - max(dx, 0))
    dst_y = slice(max(dy, 0), h - max(-dy, 0))
    dst_x = slice(max(dx, 0), w - max(-dx, 0))
    out[..., dst_y, dst_x] = t[..., src_y, src_x]
    return out


def _augment(inputs: torch.Tensor, targets: torch.Tensor, gen: torch.Generator):
    """Horizontal flip plus a small random translation, applied to both."""
    if torch.rand((), generator=gen).item() < 0.5:
        inputs = torch.flip(inputs, dims=(-1,))
        targets = torch.flip(targets, dims=(-1,))
    dy = int(torch.randint(-5, 6, (), generator=gen))
    dx = int(torch.randint(-5, 6, (), generator=gen))
    if dy or dx:
        inputs = _translate(inputs, dy, dx)
        targets = _translate(targets, dy, dx)
        # shifted-in border pixels belong to the background class
        hole = targets.sum(dim=1) == 0
        targets[:, 0][hole] = 1.0
    return inputs, targets


def evaluate_loss(model: torch.nn.Module, dataset: SliceDataset, batch_size: int) -> float:
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for inputs, targets in loader:
            loss = segmentation_loss(model(inputs), targets)
            total += loss.item() * inputs.shape[0]
            count += inputs.shape[0]
    return total / count


def train(
    model: torch.nn.Module,
    dataset: SliceDataset,
    config: TrainingConfig,
    epochs: int,
    val_dataset: SliceDataset | None = None,
) -> list[EpochRecord]:
    """Fit `model` in place; returns one record per epoch."""
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if val_dataset is None:
        val_dataset = dataset

    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.initial_lr, weight_decay=config.l2_gamma
    )
    scheduler = PlateauScheduler(
        optimizer,
        patience=config.plateau_patience_epochs,
        factor=config.lr_decay_factor,
    )
    shuffle_gen = torch.Generator().manual_seed(config.seed)
    augment_gen = torch.Generator().manual_seed(config.seed + 1)
    loader = DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        generator=shuffle_gen,
        num_workers=0,
    )

    history: list[EpochRecord] = []
    for epoch in range(1, epochs + 1):
        model.train()
        total = 0.0
        count = 0
        for inputs, targets in loader:
            if config.augmentation:
                inputs, targets = _augment(inputs, targets, augment_gen)
            optimizer.zero_grad()
            loss = segmentation_loss(model(inputs), targets)
            loss.backward()
            optimizer.step()
            total += loss.item() * inputs.shape[0]
            count += inputs.shape[0]
        train_loss = total / count
        val_loss = evaluate_loss(model, val_dataset, config.batch_size)
        lr = scheduler.step(val_loss)
        history.append(EpochRecord(epoch, train_loss, val_loss, lr))
    return history


def foreground_dice(model: torch.nn.Module, dataset: SliceDataset) -> float:
    """Binary Dice of predicted-foreground vs true-foreground over all slices."""
    model.eval()
    intersection = 0
    pred_count = 0
    true_count = 0
    with torch.no_grad():
        for idx in range(len(dataset)):
            inputs, _ = dataset[idx]
            probs = model(inputs.unsqueeze(0))[0]
            pred_fg = probs.argmax(dim=0) >= 1
            true_fg = dataset.labels[idx] >= 1
            intersection += int((pred_fg & true_fg).sum())
            pred_count += int(pred_fg.sum())
            true_count += int(true_fg.sum())
    if pred_count + true_count == 0:
        return 1.0
    return 2.0 * intersection / (pred_count + true_count)


def write_history_csv(history: list[EpochRecord], path: str | os.PathLike[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for record in history:
            writer.writerow(
                [record.epoch, f"{record.train_loss:.8f}", f"{record.val_loss:.8f}", f"{record.lr:.8g}"]
            )
