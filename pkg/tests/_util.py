"""Builders shared across test modules."""

import numpy as np

from perfkit.volume import Grid3, TimeIntensityCurve, Volume3


def make_curve(samples, times=None) -> TimeIntensityCurve:
    samples = np.asarray(samples, dtype=np.float64)
    if times is None:
        times = np.arange(len(samples), dtype=np.float64)
    return TimeIntensityCurve(samples=samples, times=np.asarray(times, dtype=np.float64))


def make_volume(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> Volume3:
    arr = np.asarray(data, dtype=np.float64)
    return Volume3(Grid3(arr.shape, spacing, origin), arr)
