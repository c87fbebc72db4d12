"""Input pipeline: trilinear resampling, center cropping, min-max normalization
and multichannel assembly for early fusion.

Ordering follows the acquisition pipeline this toolkit reproduces: resample,
then crop, then normalize per volume. Normalizing after the crop is
intentional (the crop removes bright vessels at the image border that would
otherwise dominate the intensity range).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .volume import ChannelStack, Grid3, Volume3


@dataclass(frozen=True)
class PreprocessConfig:
    target_spacing: tuple[float, float, float] = (1.0, 1.0, 3.0)
    crop_size: tuple[int, int] = (96, 96)
    normalize: bool = True

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.target_spacing):
            raise ValueError("target spacing must be positive")
        if any(c < 1 for c in self.crop_size):
            raise ValueError("crop size must be >= 1")
        object.__setattr__(self, "target_spacing", tuple(float(s) for s in self.target_spacing))
        object.__setattr__(self, "crop_size", tuple(int(c) for c in self.crop_size))

    @classmethod
    def from_json(cls, path: str | Path) -> "PreprocessConfig":
        raw = json.loads(Path(path).read_text())
        known = {k: raw[k] for k in ("target_spacing", "crop_size", "normalize") if k in raw}
        unknown = set(raw) - set(known)
        if unknown:
            raise ValueError(f"unknown preprocess config keys: {sorted(unknown)}")
        if "target_spacing" in known:
            known["target_spacing"] = tuple(known["target_spacing"])
        if "crop_size" in known:
            known["crop_size"] = tuple(known["crop_size"])
        return cls(**known)

    def to_json(self, path: str | Path) -> None:
        payload = {
            "target_spacing": list(self.target_spacing),
            "crop_size": list(self.crop_size),
            "normalize": self.normalize,
        }
        Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def resample_trilinear(v: Volume3, target_spacing: Sequence[float]) -> Volume3:
    """Resample onto a grid with the given spacing covering the same extent.

    Output dims are ceil(extent / spacing) per axis; each output voxel is the
    trilinear interpolation of the input at the output voxel's physical
    center, with out-of-extent points clamped to the nearest input voxel.
    The origin (center of voxel 0) is preserved.
    """
    target = tuple(float(s) for s in target_spacing)
    if len(target) != 3 or any(not np.isfinite(s) or s <= 0 for s in target):
        raise ValueError(f"target spacing must be 3 positive reals, got {target_spacing}")
    src = v.grid
    dims_out = tuple(
        max(1, math.ceil(n * s / t - 1e-9)) for n, s, t in zip(src.dims, src.spacing, target)
    )
    # Continuous input index of each output center: i_out * (t / s) per axis.
    axes = [np.arange(n) * (t / s) for n, t, s in zip(dims_out, target, src.spacing)]
    coords = np.meshgrid(*axes, indexing="ij")
    out = ndimage.map_coordinates(v.voxels, coords, order=1, mode="nearest")
    return Volume3(Grid3(dims_out, target, src.origin), out)


def center_crop(v: Volume3, crop: Sequence[int] | None = None) -> Volume3:
    """Crop (or zero-pad) the in-plane axes to the given size around the center.

    Cropping keeps the index window starting at floor((n - c) / 2); padding is
    symmetric with the extra voxel on the high side. The z axis is untouched,
    and the origin shifts so retained voxels keep their physical positions.
    """
    cx, cy = (int(c) for c in (crop if crop is not None else (96, 96)))
    if cx < 1 or cy < 1:
        raise ValueError("crop size must be >= 1")
    arr = v.voxels
    origin = list(v.grid.origin)
    slices = []
    pads = []
    for axis, c in ((0, cx), (1, cy)):
        n = v.grid.dims[axis]
        s = v.grid.spacing[axis]
        if n >= c:
            off = (n - c) // 2
            slices.append(slice(off, off + c))
            pads.append((0, 0))
            origin[axis] += off * s
        else:
            pad_lo = (c - n) // 2
            pads.append((pad_lo, c - n - pad_lo))
            slices.append(slice(None))
            origin[axis] -= pad_lo * s
    out = arr[slices[0], slices[1], :]
    if any(p != (0, 0) for p in pads):
        out = np.pad(out, pads + [(0, 0)], mode="constant")
    grid = Grid3((cx, cy, v.grid.dims[2]), v.grid.spacing, tuple(origin))
    return Volume3(grid, out)


def normalize_minmax(v: Volume3) -> tuple[Volume3, bool]:
    """Linearly map intensities to [0, 1] per volume.

    Returns the normalized volume and a degenerate flag; constant volumes map
    to all zeros with the flag set.
    """
    lo = float(v.voxels.min())
    hi = float(v.voxels.max())
    if hi == lo:
        return Volume3(v.grid, np.zeros(v.grid.dims)), True
    return Volume3(v.grid, (v.voxels - lo) / (hi - lo)), False


def assemble_channels(mods: Sequence[Volume3], names: Sequence[str] = ()) -> ChannelStack:
    """Stack >= 2 grid-compatible volumes channel-major, preserving order.

    Convention: anatomical channels first (T2w, ADC), perfusion maps appended.
    """
    if len(mods) < 2:
        raise ValueError("early fusion needs at least 2 modalities")
    grid = mods[0].grid
    for i, m in enumerate(mods[1:], start=1):
        if not m.grid.compatible(grid):
            raise ValueError(f"modality {i} grid is incompatible with modality 0")
    channels = np.stack([m.voxels for m in mods], axis=0)
    return ChannelStack(grid, channels, tuple(names))


def preprocess_volume(v: Volume3, config: PreprocessConfig) -> tuple[Volume3, bool]:
    """Full resample -> crop -> normalize pipeline for one volume."""
    out = resample_trilinear(v, config.target_spacing)
    out = center_crop(out, config.crop_size)
    degenerate = False
    if config.normalize:
        out, degenerate = normalize_minmax(out)
    return out, degenerate
