"""Slice dataset assembly from per-modality volumes.

Volumes arrive as 3D NIfTI files sharing a grid. Each modality is min-max
normalized over the whole volume, then the stack is split into axial slices.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from .losses import one_hot
from .niftiio import read_volume


def normalize_volume(volume: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant volume maps to zeros."""
    v = volume.astype(np.float32)
    lo = float(v.min())
    hi = float(v.max())
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.zeros_like(v)


class SliceDataset(Dataset):
    """Pairs of (modalities, one-hot target) 2D slices.

    inputs:  (n_slices, n_modalities, H, W) float32
    targets: (n_slices, n_classes, H, W) float32 one-hot
    labels:  (n_slices, H, W) int64, kept for Dice scoring
    """

    def __init__(self, inputs: torch.Tensor, labels: torch.Tensor, n_classes: int = 6) -> None:
        if inputs.dim() != 4:
            raise ValueError(f"expected (n, modalities, H, W) inputs, got {tuple(inputs.shape)}")
        if labels.shape != (inputs.shape[0], inputs.shape[2], inputs.shape[3]):
            raise ValueError(
                f"labels {tuple(labels.shape)} do not match inputs {tuple(inputs.shape)}"
            )
        if labels.numel() and (int(labels.max()) >= n_classes or int(labels.min()) < 0):
            raise ValueError("label values outside class range")
        self.inputs = inputs.float()
        self.labels = labels.long()
        self.targets = one_hot(self.labels, n_classes)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, idx: int) -> tuple[torch.Tensor, torch.Tensor]:
        return self.inputs[idx], self.targets[idx]


def load_slice_dataset(
    modality_paths: Sequence[str | os.PathLike[str]],
    labels_path: str | os.PathLike[str],
    n_classes: int = 6,
) -> SliceDataset:
    """Read modality volumes plus a label volume and slice along z."""
    if len(modality_paths) < 2:
        raise ValueError("need at least two modality volumes")
    volumes = []
    shape = None
    for path in modality_paths:
        vol = read_volume(path)
        if vol.data.ndim != 3:
            raise ValueError(f"{path}: expected a 3D volume")
        if shape is None:
            shape = vol.data.shape
        elif vol.data.shape != shape:
            raise ValueError(f"{path}: grid {vol.data.shape} does not match {shape}")
        volumes.append(normalize_volume(vol.data))

    labels_vol = read_volume(labels_path)
    if labels_vol.data.shape != shape:
        raise ValueError(
            f"labels grid {labels_vol.data.shape} does not match modalities {shape}"
        )
    labels = np.rint(labels_vol.data).astype(np.int64)

    # (nx, ny, nz) per modality -> slices indexed by z: (nz, n_mod, nx, ny)
    stack = np.stack(volumes, axis=0)
    inputs = np.moveaxis(stack, 3, 0)
    label_slices = np.moveaxis(labels, 2, 0)
    return SliceDataset(
        torch.from_numpy(np.ascontiguousarray(inputs)),
        torch.from_numpy(np.ascontiguousarray(label_slices)),
        n_classes,
    )
