"""Density ratio, per-slice profiles and segmentation metrics."""

from mrdensity.quantify.density import (
    DensityRecord,
    SliceDensity,
    SliceProfile,
    compute_density,
    slice_density_profile,
)
from mrdensity.quantify.metrics import SegMetrics, dice, evaluate, hausdorff

__all__ = [
    "DensityRecord",
    "SegMetrics",
    "SliceDensity",
    "SliceProfile",
    "compute_density",
    "dice",
    "evaluate",
    "hausdorff",
    "slice_density_profile",
]
