"""Core data model: grids, 3D volumes, 4D DCE series, label maps and lesion annotations.

All types are immutable after construction (arrays are marked non-writeable),
so they can be shared freely across threads. Voxel storage is a numpy array
indexed ``[i, j, k]`` with x fastest in memory (Fortran order when flattened).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

GRID_TOL_MM = 1e-6

# Label-map class codes (6-class segmentation convention).
LABEL_BACKGROUND = 0
LABEL_PROSTATE = 1
LESION_LABEL_CLASSES = (2, 3, 4, 5)
N_CLASSES = 6


class GsGroup(IntEnum):
    """Ordinal Gleason-score group. Ordering is meaningful."""

    NONE = 0
    GS_3_3 = 1
    GS_3_4 = 2
    GS_4_3 = 3
    GS_GE8 = 4


def gs_from_label_class(label_class: int) -> GsGroup:
    """Map a lesion label-map class (2..5) to its GsGroup code (1..4)."""
    if label_class not in LESION_LABEL_CLASSES:
        raise ValueError(f"label class {label_class} is not a lesion class")
    return GsGroup(label_class - 1)


def label_class_from_gs(gs: GsGroup | int) -> int:
    """Map a GsGroup code (1..4) to its lesion label-map class (2..5)."""
    code = int(gs)
    if not 1 <= code <= 4:
        raise ValueError(f"gs code {code} is not a lesion grade")
    return code + 1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Grid3:
    """Regular 3D voxel grid: dims, spacing (mm) and origin (mm).

    The origin is the physical center of voxel (0, 0, 0); voxel (i, j, k) is
    centered at ``origin + (i, j, k) * spacing``.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or len(spacing) != 3 or len(origin) != 3:
            raise ValueError("Grid3 needs 3 dims, 3 spacings and 3 origin coordinates")
        if any(d < 1 for d in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"all spacings must be finite and > 0, got {spacing}")
        if any(not np.isfinite(o) for o in origin):
            raise ValueError(f"origin must be finite, got {origin}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def compatible(self, other: "Grid3", tol: float = GRID_TOL_MM) -> bool:
        """Equal dims, spacing and origin within `tol` mm."""
        return (
            self.dims == other.dims
            and all(abs(a - b) <= tol for a, b in zip(self.spacing, other.spacing))
            and all(abs(a - b) <= tol for a, b in zip(self.origin, other.origin))
        )


def _check_grid_array(grid: Grid3, arr: np.ndarray, what: str) -> None:
    if arr.shape[:3] != grid.dims:
        raise ValueError(f"{what} shape {arr.shape[:3]} does not match grid dims {grid.dims}")


@dataclass(frozen=True)
class Volume3:
    """One 3D scalar volume on a grid. Values are arbitrary MR intensity."""

    grid: Grid3
    voxels: np.ndarray  # float64 [nx, ny, nz]

    def __post_init__(self) -> None:
        arr = np.array(self.voxels, dtype=np.float64, order="F")
        _check_grid_array(self.grid, arr, "voxel array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume contains non-finite voxels")
        object.__setattr__(self, "voxels", _freeze(arr))

    def ravel(self) -> np.ndarray:
        """Flat view in x-fastest order."""
        return self.voxels.ravel(order="F")


@dataclass(frozen=True)
class LabelVolume:
    """Dense class-code map: 0 background, 1 prostate, 2..5 lesion GS classes."""

    grid: Grid3
    labels: np.ndarray  # uint8 [nx, ny, nz]

    def __post_init__(self) -> None:
        arr = np.array(self.labels, order="F")
        _check_grid_array(self.grid, arr, "label array")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("labels must be integers")
        arr = arr.astype(np.uint8, copy=False)
        if arr.size and int(arr.max()) >= N_CLASSES:
            raise ValueError(f"labels must be in 0..{N_CLASSES - 1}")
        object.__setattr__(self, "labels", _freeze(arr))

    def mask(self, *classes: int) -> np.ndarray:
        return np.isin(self.labels, classes)


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-voxel probability vector over the 6 segmentation classes."""

    grid: Grid3
    probs: np.ndarray  # float64 [nx, ny, nz, 6]
    sum_tol: float = 1e-5

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=np.float64, order="F")
        if arr.ndim != 4 or arr.shape[3] != N_CLASSES:
            raise ValueError(f"probability map must have shape (nx, ny, nz, {N_CLASSES})")
        _check_grid_array(self.grid, arr, "probability array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability map contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = arr.sum(axis=3)
        if np.max(np.abs(sums - 1.0)) > self.sum_tol:
            raise ValueError(f"per-voxel probabilities must sum to 1 within {self.sum_tol}")
        object.__setattr__(self, "probs", _freeze(arr))

    @classmethod
    def from_labels(cls, labels: LabelVolume) -> "ProbabilityMap":
        """One-hot encoding of a label map (a 'perfect predictor')."""
        probs = np.zeros(labels.grid.dims + (N_CLASSES,), dtype=np.float64, order="F")
        for c in range(N_CLASSES):
            probs[..., c] = labels.labels == c
        return cls(labels.grid, probs)


@dataclass(frozen=True)
class DceSeries:
    """T >= 3 frames of one 3D volume over time, with acquisition times.

    Times are seconds when known, otherwise frame indices 0..T-1
    (``time_unit == "frame-index"``).
    """

    grid: Grid3
    frames: tuple[Volume3, ...]
    times: np.ndarray
    time_unit: str = "frame-index"

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        times = np.array(self.times, dtype=np.float64)
        if len(frames) < 3:
            raise ValueError("a DCE series needs at least 3 frames")
        if times.ndim != 1 or len(times) != len(frames):
            raise ValueError("times must have one entry per frame")
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
            raise ValueError("times must be finite and strictly increasing")
        if self.time_unit not in ("seconds", "frame-index"):
            raise ValueError(f"unknown time unit {self.time_unit!r}")
        for f in frames:
            if not f.grid.compatible(self.grid):
                raise ValueError("all frames must share the series grid")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", _freeze(times))

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def sample_matrix(self) -> np.ndarray:
        """All curves as one (n_voxels, T) matrix, voxels in x-fastest order."""
        return np.stack([f.ravel() for f in self.frames], axis=1)


@dataclass(frozen=True)
class TimeIntensityCurve:
    """One voxel's intensity samples over the series' T frames."""

    samples: np.ndarray
    times: np.ndarray

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        times = np.array(self.times, dtype=np.float64)
        if samples.ndim != 1 or times.ndim != 1 or len(samples) != len(times):
            raise ValueError("samples and times must be 1-D and equally long")
        if len(samples) < 3:
            raise ValueError("a curve needs at least 3 samples")
        if not np.all(np.isfinite(samples)) or not np.all(np.isfinite(times)):
            raise ValueError("curve values must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "samples", _freeze(samples))
        object.__setattr__(self, "times", _freeze(times))

    def __len__(self) -> int:
        return len(self.samples)


def extract_curve(series: DceSeries, index: tuple[int, int, int]) -> TimeIntensityCurve:
    """Gather one voxel's time-intensity curve from the series frames."""
    i, j, k = (int(v) for v in index)
    nx, ny, nz = series.grid.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel index {(i, j, k)} out of bounds for dims {series.grid.dims}")
    samples = np.array([f.voxels[i, j, k] for f in series.frames])
    return TimeIntensityCurve(samples=samples, times=series.times)


def is_connected_26(voxels: frozenset[tuple[int, int, int]]) -> bool:
    """True when the voxel set forms a single 26-connected component."""
    if not voxels:
        return False
    idx = np.array(sorted(voxels), dtype=np.int64)
    lo = idx.min(axis=0)
    shape = idx.max(axis=0) - lo + 1
    box = np.zeros(shape, dtype=bool)
    box[tuple((idx - lo).T)] = True
    _, n = ndimage.label(box, structure=np.ones((3, 3, 3), dtype=bool))
    return n == 1


@dataclass(frozen=True)
class LesionAnnotation:
    """A ground-truth lesion: a connected voxel region with an ordinal GS group."""

    id: int
    patient_id: str
    gs: GsGroup
    voxel_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        voxels = frozenset(tuple(int(c) for c in v) for v in self.voxel_set)
        if int(self.gs) < 1:
            raise ValueError("annotated lesions must carry a GS group >= 1")
        if not voxels:
            raise ValueError("lesion voxel set must be nonempty")
        if not is_connected_26(voxels):
            raise ValueError(f"lesion {self.id} voxel set is not 26-connected")
        object.__setattr__(self, "gs", GsGroup(int(self.gs)))
        object.__setattr__(self, "voxel_set", voxels)


@dataclass(frozen=True)
class ChannelStack:
    """Channel-major stack of grid-compatible volumes (early-fusion input)."""

    grid: Grid3
    channels: np.ndarray  # float64 [C, nx, ny, nz]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.channels, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError("channel stack must be 4-D (C, nx, ny, nz)")
        if arr.shape[1:] != self.grid.dims:
            raise ValueError(f"stack shape {arr.shape[1:]} does not match grid dims {self.grid.dims}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("channel stack contains non-finite values")
        names = tuple(self.names)
        if names and len(names) != arr.shape[0]:
            raise ValueError("one name per channel expected")
        object.__setattr__(self, "channels", _freeze(arr))
        object.__setattr__(self, "names", names)

    @property
    def n_channels(self) -> int:
        return int(self.channels.shape[0])
