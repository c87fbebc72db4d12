"""Per-voxel time-intensity-curve analysis producing the five perfusion maps.

Each curve yields four scalar features (time of peak, wash-in slope, wash-out
slope, percentage of enhancement), and the series as a whole selects the single
frame with the steepest aggregate enhancement (the maximum-slope volume).

Scalar operations are the reference definitions. `compute_perfusion_maps` runs
the same arithmetic as a batched kernel over voxel chunks; outputs are placed
by precomputed voxel index, so results are bit-identical for any worker count.

Degenerate curves (constant, peak at the first or last frame, near-zero
baseline) produce 0 for the affected feature plus a flag, never an error:
clinical volumes are full of air and background voxels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .volume import DceSeries, TimeIntensityCurve, Volume3

# Chunk length for the batched kernel; fixed so chunk boundaries never depend
# on the worker count.
_CHUNK = 8192

# Baseline guard for percentage of enhancement: relative to the curve's
# magnitude, absolute for all-zero curves.
PE_EPS_REL = 1e-6
PE_EPS_ABS = 1e-12


@dataclass(frozen=True)
class CurveFeatures:
    """Scalar kinetic features of one time-intensity curve.

    `onset <= tmax` always holds; `wash_in_slope >= 0` and
    `wash_out_slope <= 0` because tmax is the curve's argmax.
    """

    onset: int
    tmax: int
    wash_in_slope: float
    wash_out_slope: float
    percent_enhancement: float
    degenerate: bool


@dataclass(frozen=True)
class PerfusionMapSet:
    """The five maps computed from one DCE series.

    tmax_map holds frame indices in [0, T-1] stored as reals;
    max_slope_volume is a verbatim copy of one original frame.
    """

    tmax_map: Volume3
    wash_in_map: Volume3
    wash_out_map: Volume3
    percent_enhancement_map: Volume3
    max_slope_volume: Volume3
    max_slope_frame_index: int
    time_unit: str
    degenerate_voxels: int


def _uniform_spacing(times: np.ndarray) -> bool:
    d = np.diff(times)
    return bool(np.all(np.abs(d - d[0]) <= 1e-9 * abs(d[0])))


def _acceleration(samples: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Discrete acceleration a[k] for interior frames k = 1..T-2.

    Uniformly spaced times use the plain second difference; non-uniform
    times (seconds from a scanner) use second divided differences.
    """
    if _uniform_spacing(times):
        return samples[..., 2:] - 2.0 * samples[..., 1:-1] + samples[..., :-2]
    d1 = np.diff(samples, axis=-1) / np.diff(times)
    return (d1[..., 1:] - d1[..., :-1]) / (times[2:] - times[:-2])


def tmax(curve: TimeIntensityCurve) -> int:
    """Frame index of the curve maximum (first occurrence on ties)."""
    return int(np.argmax(curve.samples))


def detect_onset(curve: TimeIntensityCurve) -> int:
    """Start of the wash-in: the interior frame of maximum acceleration.

    The search runs over k in [1, min(tmax, T-2)] (the onset precedes the
    peak by definition); ties break to the smallest k. A peak earlier than
    frame 2 leaves no searchable window and yields onset 0.
    """
    m = tmax(curve)
    if m < 2:
        return 0
    accel = _acceleration(curve.samples, curve.times)
    hi = min(m, len(curve) - 2)  # inclusive upper bound for k
    return int(np.argmax(accel[: hi])) + 1


def wash_in_slope(curve: TimeIntensityCurve) -> float:
    """Chord slope from onset to peak; 0 (degenerate) when they coincide."""
    slope, _ = _wash_in(curve)
    return slope


def _wash_in(curve: TimeIntensityCurve) -> tuple[float, bool]:
    o = detect_onset(curve)
    m = tmax(curve)
    if m == o:
        return 0.0, True
    return float((curve.samples[m] - curve.samples[o]) / (curve.times[m] - curve.times[o])), False


def wash_out_slope(curve: TimeIntensityCurve) -> float:
    """Chord slope from peak to the last frame; 0 (degenerate) for a late peak."""
    slope, _ = _wash_out(curve)
    return slope


def _wash_out(curve: TimeIntensityCurve) -> tuple[float, bool]:
    m = tmax(curve)
    last = len(curve) - 1
    if m == last:
        return 0.0, True
    return float((curve.samples[last] - curve.samples[m]) / (curve.times[last] - curve.times[m])), False


def percent_enhancement(curve: TimeIntensityCurve) -> float:
    """Peak enhancement relative to the first sample, in percent.

    Since the peak is the global argmax, the maximum over the wash-in window
    equals samples[tmax]. Baselines below the epsilon guard yield 0
    (degenerate) instead of a division blow-up.
    """
    value, _ = _percent_enhancement(curve)
    return value


def _percent_enhancement(curve: TimeIntensityCurve) -> tuple[float, bool]:
    s0 = curve.samples[0]
    amax = np.max(np.abs(curve.samples))
    eps = PE_EPS_ABS if amax == 0.0 else PE_EPS_REL * amax
    if s0 < eps:
        return 0.0, True
    m = tmax(curve)
    return float(100.0 * (curve.samples[m] - s0) / s0), False


def curve_features(curve: TimeIntensityCurve) -> CurveFeatures:
    """All scalar features of one curve, with the combined degenerate flag."""
    m = tmax(curve)
    o = detect_onset(curve)
    win, deg_in = _wash_in(curve)
    wout, deg_out = _wash_out(curve)
    pe, deg_pe = _percent_enhancement(curve)
    return CurveFeatures(
        onset=o,
        tmax=m,
        wash_in_slope=win,
        wash_out_slope=wout,
        percent_enhancement=pe,
        degenerate=deg_in or deg_out or deg_pe,
    )


def max_slope_frame(series: DceSeries, mask: np.ndarray | None = None) -> int:
    """Frame where the aggregate signal enhancement rate is greatest.

    Aggregation is the mean intensity curve over the mask (default: the whole
    volume). Returns the later frame of the first interval achieving the
    maximum slope, so a constant series deterministically yields frame 1.
    """
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != series.grid.dims:
            raise ValueError(f"mask shape {mask.shape} does not match grid dims {series.grid.dims}")
        if not mask.any():
            raise ValueError("mask selects no voxels")
        mean = np.array([float(f.voxels[mask].mean()) for f in series.frames])
    else:
        mean = np.array([float(f.voxels.mean()) for f in series.frames])
    slopes = np.diff(mean) / np.diff(series.times)
    return int(np.argmax(slopes)) + 1


def _features_batch(S: np.ndarray, times: np.ndarray):
    """Batched kernel: features for an (n, T) block of curves.

    Mirrors the scalar operations expression by expression so that results
    are bit-identical to per-voxel evaluation.
    """
    n, T = S.shape
    rows = np.arange(n)

    m = np.argmax(S, axis=1)

    accel = _acceleration(S, times)
    hi = np.minimum(m, T - 2)  # inclusive upper bound for k
    k = np.arange(1, T - 1)
    masked = np.where(k[None, :] <= hi[:, None], accel, -np.inf)
    onset = np.argmax(masked, axis=1) + 1
    onset = np.where(m < 2, 0, onset)

    sm = S[rows, m]
    so = S[rows, onset]
    deg_in = m == onset
    win = np.where(deg_in, 0.0, (sm - so) / np.where(deg_in, 1.0, times[m] - times[onset]))

    deg_out = m == T - 1
    wout = np.where(deg_out, 0.0, (S[:, T - 1] - sm) / np.where(deg_out, 1.0, times[T - 1] - times[m]))

    s0 = S[:, 0]
    amax = np.max(np.abs(S), axis=1)
    eps = np.where(amax == 0.0, PE_EPS_ABS, PE_EPS_REL * amax)
    deg_pe = s0 < eps
    pe = np.where(deg_pe, 0.0, 100.0 * (sm - s0) / np.where(deg_pe, 1.0, s0))

    return m, win, wout, pe, deg_in | deg_out | deg_pe


def compute_perfusion_maps(
    series: DceSeries,
    mask: np.ndarray | None = None,
    n_jobs: int = 1,
) -> PerfusionMapSet:
    """Evaluate every voxel's curve features and assemble the five maps.

    The mask only steers the maximum-slope frame selection; the per-voxel maps
    always cover the full grid. Voxels are partitioned into fixed-size chunks
    processed by up to `n_jobs` threads; each chunk writes a disjoint slice of
    the preallocated outputs, so any worker count gives identical bits.
    """
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    S = series.sample_matrix()
    times = series.times
    n = S.shape[0]

    tmax_flat = np.empty(n, dtype=np.float64)
    win_flat = np.empty(n, dtype=np.float64)
    wout_flat = np.empty(n, dtype=np.float64)
    pe_flat = np.empty(n, dtype=np.float64)
    deg_flat = np.empty(n, dtype=bool)

    def run_chunk(lo: int) -> None:
        hi = min(lo + _CHUNK, n)
        m, win, wout, pe, deg = _features_batch(S[lo:hi], times)
        tmax_flat[lo:hi] = m
        win_flat[lo:hi] = win
        wout_flat[lo:hi] = wout
        pe_flat[lo:hi] = pe
        deg_flat[lo:hi] = deg

    starts = range(0, n, _CHUNK)
    if n_jobs == 1:
        for lo in starts:
            run_chunk(lo)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run_chunk, starts))

    msf = max_slope_frame(series, mask)
    grid = series.grid

    def to_volume(flat: np.ndarray) -> Volume3:
        return Volume3(grid, flat.reshape(grid.dims, order="F"))

    return PerfusionMapSet(
        tmax_map=to_volume(tmax_flat),
        wash_in_map=to_volume(win_flat),
        wash_out_map=to_volume(wout_flat),
        percent_enhancement_map=to_volume(pe_flat),
        max_slope_volume=Volume3(grid, series.frames[msf].voxels),
        max_slope_frame_index=msf,
        time_unit=series.time_unit,
        degenerate_voxels=int(deg_flat.sum()),
    )
