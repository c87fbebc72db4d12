"""Volume inference: run the model slice-by-slice and export class probabilities."""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import torch

from .data import normalize_volume
from .niftiio import read_volume, write_volume


def predict_probabilities(model: torch.nn.Module, stack: np.ndarray) -> np.ndarray:
    """(n_modalities, nx, ny, nz) normalized stack -> (nx, ny, nz, n_classes)."""
    if stack.ndim != 4:
        raise ValueError(f"expected (modalities, nx, ny, nz), got {stack.shape}")
    n_mod, nx, ny, nz = stack.shape
    if nx % 16 or ny % 16:
        raise ValueError(f"in-plane dims must be divisible by 16, got {nx}x{ny}")

    # slices along z: (nz, n_mod, nx, ny)
    slices = np.moveaxis(stack, 3, 0).astype(np.float32)
    model.eval()
    with torch.no_grad():
        probs = model(torch.from_numpy(np.ascontiguousarray(slices)))
    # (nz, n_classes, nx, ny) -> (nx, ny, nz, n_classes)
    out = probs.numpy()
    return np.ascontiguousarray(np.transpose(out, (2, 3, 0, 1)))


def predict_volume(
    model: torch.nn.Module,
    modality_paths: Sequence[str | os.PathLike[str]],
    out_path: str | os.PathLike[str],
) -> np.ndarray:
    """Read modality volumes, infer, and write a 4D probability NIfTI."""
    volumes = []
    grid = None
    spacing = (1.0, 1.0, 1.0)
    origin = (0.0, 0.0, 0.0)
    for path in modality_paths:
        vol = read_volume(path)
        if vol.data.ndim != 3:
            raise ValueError(f"{path}: expected a 3D volume")
        if grid is None:
            grid = vol.data.shape
            spacing = vol.spacing
            origin = vol.origin
        elif vol.data.shape != grid:
            raise ValueError(f"{path}: grid {vol.data.shape} does not match {grid}")
        volumes.append(normalize_volume(vol.data))

    stack = np.stack(volumes, axis=0)
    probs = predict_probabilities(model, stack)
    write_volume(probs.astype(np.float32), out_path, spacing, origin)
    return probs
