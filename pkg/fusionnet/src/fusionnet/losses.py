"""Segmentation loss: soft Dice plus pixel-mean cross-entropy, unit weights.

Both terms consume the model's probability output (softmax already applied)
and a one-hot target of the same shape.
"""

from __future__ import annotations

import torch

DICE_SMOOTH = 1e-5
_LOG_FLOOR = 1e-12  # keeps log finite; gradients at 0-probability pixels are clipped


def one_hot(labels: torch.Tensor, n_classes: int = 6) -> torch.Tensor:
    """(N, H, W) integer labels -> (N, C, H, W) one-hot float tensor."""
    if labels.dim() != 3:
        raise ValueError(f"expected (batch, H, W) labels, got {tuple(labels.shape)}")
    return torch.nn.functional.one_hot(labels.long(), n_classes).permute(0, 3, 1, 2).float()


def _check(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"prediction {tuple(pred.shape)} vs target {tuple(target.shape)}")
    if pred.dim() != 4:
        raise ValueError(f"expected (batch, classes, H, W), got {tuple(pred.shape)}")


def soft_dice_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """1 - mean Dice over the classes present in the batch."""
    _check(pred, target)
    present = target.sum(dim=(0, 2, 3)) > 0
    p = pred[:, present]
    t = target[:, present]
    intersection = (p * t).sum(dim=(0, 2, 3))
    denominator = p.sum(dim=(0, 2, 3)) + t.sum(dim=(0, 2, 3))
    dice = (2.0 * intersection + DICE_SMOOTH) / (denominator + DICE_SMOOTH)
    return 1.0 - dice.mean()


def cross_entropy_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Pixel-mean cross-entropy of a probability prediction."""
    _check(pred, target)
    log_p = torch.log(pred.clamp_min(_LOG_FLOOR))
    return -(target * log_p).sum(dim=1).mean()


def segmentation_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return soft_dice_loss(pred, target) + cross_entropy_loss(pred, target)
