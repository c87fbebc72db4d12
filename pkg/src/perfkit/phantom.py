"""Synthetic DCE exams with analytically known kinetics.

Every region follows a gamma-variate enhancement curve, the standard
first-pass bolus model. Its closed form peaks exactly at onset_time +
time_to_peak with value baseline + amplitude, so each generated exam ships
with exact per-region ground truth for the perfusion features.

Noise is additive Gaussian from numpy's Philox generator (counter-based,
platform-stable): one normal draw per (frame, voxel) consumed frame-major,
so equal seeds give bit-identical exams everywhere.

Ground-truth features are computed here with plain-Python loops over the
noiseless analytic samples, kept deliberately independent of the array
kernels in `kinetics` that they later validate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .volume import (
    DceSeries,
    Grid3,
    GsGroup,
    LabelVolume,
    LesionAnnotation,
    Volume3,
    gs_from_label_class,
    is_connected_26,
)


@dataclass(frozen=True)
class KineticParams:
    """Gamma-variate curve parameters for one region.

    The curve is baseline for t < onset_time and
    baseline + amplitude * u**shape * exp(shape * (1 - u)) afterwards,
    with u = (t - onset_time) / time_to_peak.
    """

    baseline: float
    amplitude: float
    onset_time: float
    time_to_peak: float
    shape: float = 3.0
    region_id: int = 0

    def __post_init__(self) -> None:
        if self.baseline < 0:
            raise ValueError(f"baseline must be >= 0, got {self.baseline}")
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if self.onset_time < 0:
            raise ValueError(f"onset time must be >= 0, got {self.onset_time}")
        if self.time_to_peak <= 0:
            raise ValueError(f"time to peak must be > 0, got {self.time_to_peak}")
        if self.shape <= 0:
            raise ValueError(f"shape must be > 0, got {self.shape}")

    @property
    def peak_time(self) -> float:
        return self.onset_time + self.time_to_peak

    @property
    def peak_value(self) -> float:
        return self.baseline + self.amplitude


def gamma_variate(t, params: KineticParams):
    """Curve intensity at time(s) t (seconds). Accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=np.float64)
    u = np.maximum((t_arr - params.onset_time) / params.time_to_peak, 0.0)
    value = params.baseline + params.amplitude * u**params.shape * np.exp(
        params.shape * (1.0 - u)
    )
    return float(value) if np.isscalar(t) else value


@dataclass(frozen=True)
class RegionSpec:
    """A named voxel region with one kinetic curve and one label class."""

    name: str
    label_class: int
    voxels: frozenset
    params: KineticParams

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("region name must be nonempty")
        if not 0 <= self.label_class <= 5:
            raise ValueError(f"label class must be in 0..5, got {self.label_class}")
        voxels = frozenset(tuple(int(c) for c in v) for v in self.voxels)
        if not voxels:
            raise ValueError(f"region {self.name!r} has no voxels")
        object.__setattr__(self, "voxels", voxels)


@dataclass(frozen=True)
class RegionTruth:
    """Analytic and sampled-grid ground truth for one region.

    peak_time_s / peak_value / nearest_frame come from the closed form;
    the remaining fields are the grid-quantized features of the noiseless
    sampled curve (onset by maximum second difference, chord slopes,
    percentage of enhancement).
    """

    label_class: int
    gs: int
    n_voxels: int
    peak_time_s: float
    peak_value: float
    nearest_frame: int
    onset_frame: int
    tmax_frame: int
    wash_in_slope: float
    wash_out_slope: float
    percent_enhancement: float
    degenerate: bool


@dataclass(frozen=True)
class PhantomSpec:
    """Full description of one synthetic exam."""

    grid: Grid3
    n_frames: int
    frame_interval_s: float
    regions: tuple[RegionSpec, ...] = ()
    noise_sigma: float = 0.0
    background_baseline: float = 0.0
    seed: int = 0
    patient_id: str = "phantom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.n_frames < 3:
            raise ValueError(f"need at least 3 frames, got {self.n_frames}")
        if self.frame_interval_s <= 0:
            raise ValueError(f"frame interval must be > 0, got {self.frame_interval_s}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.background_baseline < 0:
            raise ValueError("background baseline must be >= 0")
        if not self.patient_id:
            raise ValueError("patient id must be nonempty")
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ValueError("region names must be unique")
        nx, ny, nz = self.grid.dims
        seen: set[tuple[int, int, int]] = set()
        for r in self.regions:
            for i, j, k in r.voxels:
                if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
                    raise ValueError(f"region {r.name!r} voxel ({i},{j},{k}) outside grid {self.grid.dims}")
            overlap = seen & r.voxels
            if overlap:
                raise ValueError(f"region {r.name!r} overlaps an earlier region at {sorted(overlap)[0]}")
            seen |= r.voxels
            if r.label_class >= 2 and not is_connected_26(r.voxels):
                raise ValueError(f"lesion region {r.name!r} must be 26-connected")
            if r.params.peak_time >= self.n_frames * self.frame_interval_s:
                raise ValueError(
                    f"region {r.name!r} peaks at {r.params.peak_time}s, outside the "
                    f"{self.n_frames * self.frame_interval_s}s acquisition window"
                )

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_frames, dtype=np.float64) * self.frame_interval_s


@dataclass(frozen=True)
class PhantomResult:
    """Everything synth_dce produces for one exam."""

    series: DceSeries
    labels: LabelVolume
    annotations: tuple[LesionAnnotation, ...]
    truth: dict


def _sampled_truth(values: list[float], times: list[float]) -> tuple[int, int, float, float, float, bool]:
    """Grid-quantized features of a (noiseless) sampled curve.

    Plain-loop reference: argmax with first-occurrence ties, onset as the
    interior frame of maximum second difference over k in [1, min(m, T-2)],
    chord slopes, percentage of enhancement. Returns (onset, tmax, wash_in,
    wash_out, pct_enh, degenerate).
    """
    n = len(values)
    m = 0
    for i in range(1, n):
        if values[i] > values[m]:
            m = i
    degenerate = False
    if m < 2:
        onset = 0
    else:
        onset, best = 1, -math.inf
        for k in range(1, min(m, n - 2) + 1):
            accel = values[k + 1] - 2.0 * values[k] + values[k - 1]
            if accel > best:
                onset, best = k, accel
    if m == onset:
        wash_in, degenerate = 0.0, True
    else:
        wash_in = (values[m] - values[onset]) / (times[m] - times[onset])
    if m == n - 1:
        wash_out, degenerate = 0.0, True
    else:
        wash_out = (values[n - 1] - values[m]) / (times[n - 1] - times[m])
    if values[0] <= 0.0:
        pct, degenerate = 0.0, True
    else:
        pct = 100.0 * (values[m] - values[0]) / values[0]
    return onset, m, wash_in, wash_out, pct, degenerate


def region_truth(region: RegionSpec, times: np.ndarray) -> RegionTruth:
    """Ground-truth record for one region on the given frame times."""
    p = region.params
    clean = [float(gamma_variate(float(t), p)) for t in times]
    t_list = [float(t) for t in times]
    nearest = 0
    for i in range(1, len(t_list)):
        if abs(t_list[i] - p.peak_time) < abs(t_list[nearest] - p.peak_time):
            nearest = i
    onset, m, wash_in, wash_out, pct, degenerate = _sampled_truth(clean, t_list)
    return RegionTruth(
        label_class=region.label_class,
        gs=int(gs_from_label_class(region.label_class)) if region.label_class >= 2 else int(GsGroup.NONE),
        n_voxels=len(region.voxels),
        peak_time_s=p.peak_time,
        peak_value=p.peak_value,
        nearest_frame=nearest,
        onset_frame=onset,
        tmax_frame=m,
        wash_in_slope=wash_in,
        wash_out_slope=wash_out,
        percent_enhancement=pct,
        degenerate=degenerate,
    )


def synth_dce(spec: PhantomSpec) -> PhantomResult:
    """Generate the 4D exam, label map, lesion annotations and ground truth."""
    nx, ny, nz = spec.grid.dims
    times = spec.times
    t = spec.n_frames

    region_curves = [gamma_variate(times, r.params) for r in spec.regions]
    region_index = [tuple(np.array(sorted(r.voxels)).T) for r in spec.regions]

    rng = np.random.Generator(np.random.Philox(spec.seed))
    frames = []
    for f in range(t):
        frame = np.full((nx, ny, nz), spec.background_baseline, dtype=np.float64, order="F")
        for curve, idx in zip(region_curves, region_index):
            frame[idx] = curve[f]
        if spec.noise_sigma > 0:
            frame += rng.normal(0.0, spec.noise_sigma, size=(nx, ny, nz))
        frames.append(Volume3(spec.grid, frame))
    series = DceSeries(spec.grid, tuple(frames), times, time_unit="seconds")

    labels = np.zeros((nx, ny, nz), dtype=np.uint8, order="F")
    for r, idx in zip(spec.regions, region_index):
        labels[idx] = r.label_class
    label_volume = LabelVolume(spec.grid, labels)

    annotations = []
    next_id = 1
    for r in spec.regions:
        if r.label_class >= 2:
            annotations.append(
                LesionAnnotation(
                    id=next_id,
                    patient_id=spec.patient_id,
                    gs=gs_from_label_class(r.label_class),
                    voxel_set=r.voxels,
                )
            )
            next_id += 1

    truth = {r.name: region_truth(r, times) for r in spec.regions}
    return PhantomResult(series, label_volume, tuple(annotations), truth)


def box_voxels(lo: tuple[int, int, int], hi: tuple[int, int, int]) -> frozenset:
    """All voxels with lo <= (i,j,k) < hi."""
    if any(h <= l for l, h in zip(lo, hi)):
        raise ValueError(f"empty box {lo}..{hi}")
    return frozenset(
        (i, j, k)
        for i in range(lo[0], hi[0])
        for j in range(lo[1], hi[1])
        for k in range(lo[2], hi[2])
    )


def sphere_voxels(center: tuple[int, int, int], radius: float) -> frozenset:
    """Voxels whose index lies within `radius` (in voxel units) of center."""
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    r = int(math.ceil(radius))
    out = set()
    for i in range(center[0] - r, center[0] + r + 1):
        for j in range(center[1] - r, center[1] + r + 1):
            for k in range(center[2] - r, center[2] + r + 1):
                if (i - center[0]) ** 2 + (j - center[1]) ** 2 + (k - center[2]) ** 2 <= radius**2:
                    out.add((i, j, k))
    return frozenset(out)


def _parse_voxels(shape: dict) -> frozenset:
    kind = shape.get("type")
    if kind == "box":
        return box_voxels(tuple(shape["lo"]), tuple(shape["hi"]))
    if kind == "sphere":
        return sphere_voxels(tuple(shape["center"]), float(shape["radius"]))
    if kind == "voxels":
        return frozenset(tuple(v) for v in shape["voxels"])
    raise ValueError(f"unknown region shape type {kind!r}")


_SPEC_KEYS = {
    "dims", "spacing", "origin", "n_frames", "frame_interval_s", "regions",
    "noise_sigma", "background_baseline", "seed", "patient_id", "carve_overlaps",
}
_REGION_KEYS = {"name", "label_class", "shape", "params"}
_PARAM_KEYS = {"baseline", "amplitude", "onset_time", "time_to_peak", "shape", "region_id"}


def load_phantom_spec(path: str | Path) -> PhantomSpec:
    """Read a phantom description from JSON.

    Regions give their voxels as a box, a sphere, or an explicit list. With
    "carve_overlaps": true, voxels claimed by an earlier region are removed
    from later ones (layered authoring: gland first, lesions carved in would
    be the reverse, so list lesions first).
    """
    with open(path) as fh:
        raw = json.load(fh)
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown phantom spec keys: {sorted(unknown)}")
    grid = Grid3(
        dims=tuple(raw["dims"]),
        spacing=tuple(raw.get("spacing", (1.0, 1.0, 1.0))),
        origin=tuple(raw.get("origin", (0.0, 0.0, 0.0))),
    )
    carve = bool(raw.get("carve_overlaps", False))
    regions = []
    claimed: set[tuple[int, int, int]] = set()
    for entry in raw.get("regions", []):
        unknown = set(entry) - _REGION_KEYS
        if unknown:
            raise ValueError(f"unknown region keys: {sorted(unknown)}")
        unknown = set(entry["params"]) - _PARAM_KEYS
        if unknown:
            raise ValueError(f"unknown kinetic parameter keys: {sorted(unknown)}")
        voxels = _parse_voxels(entry["shape"])
        if carve:
            voxels = frozenset(voxels - claimed)
            claimed |= voxels
        regions.append(
            RegionSpec(
                name=entry["name"],
                label_class=int(entry["label_class"]),
                voxels=voxels,
                params=KineticParams(**entry["params"]),
            )
        )
    return PhantomSpec(
        grid=grid,
        n_frames=int(raw["n_frames"]),
        frame_interval_s=float(raw["frame_interval_s"]),
        regions=tuple(regions),
        noise_sigma=float(raw.get("noise_sigma", 0.0)),
        background_baseline=float(raw.get("background_baseline", 0.0)),
        seed=int(raw.get("seed", 0)),
        patient_id=str(raw.get("patient_id", "phantom")),
    )
