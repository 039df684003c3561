from __future__ import annotations

import numpy as np

from mrdensity.errors import InputError, ZeroVarianceError
from mrdensity.volume_io.types import Volume3D

MIN_STD = 1e-12


def zscore_stats(voxels: np.ndarray) -> tuple[float, float]:
    """Mean and population standard deviation, accumulated in float64."""
    x = np.asarray(voxels, dtype=np.float64)
    mean = float(x.mean())
    std = float(np.sqrt(np.mean((x - mean) ** 2)))
    return mean, std


def zscore_normalize(volume: Volume3D) -> Volume3D:
    """Per-volume z-score: (x - mean) / std with the population std.

    The result is float64 so the zero-mean / unit-std contract holds to ~1e-15.
    """
    if volume.voxels.size < 2:
        raise InputError("z-score normalization needs at least 2 voxels")
    mean, std = zscore_stats(volume.voxels)
    if not np.isfinite(std) or std <= MIN_STD:
        raise ZeroVarianceError(f"volume has zero variance (std={std:.3g}); cannot z-score normalize")
    out = (np.asarray(volume.voxels, dtype=np.float64) - mean) / std
    return volume.with_voxels(out)
