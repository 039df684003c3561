from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mrdensity.errors import MaskError
from mrdensity.volume_io.types import BinaryMask3D

SIDES = ("left", "right", "whole")


@dataclass(frozen=True)
class DensityRecord:
    subject_id: str
    side: str
    density: float
    dense_voxels: int
    breast_voxels: int


def _check_pair(dense: BinaryMask3D, breast: BinaryMask3D) -> None:
    if dense.dims != breast.dims:
        raise MaskError(f"mask dims differ: dense {dense.dims} vs breast {breast.dims}")
    if not breast.voxels.any():
        raise MaskError("breast mask is empty; density is undefined")


def compute_density(
    dense: BinaryMask3D, breast: BinaryMask3D, subject_id: str = "", side: str = "whole"
) -> DensityRecord:
    """Fraction of breast voxels that are dense: sum(M_dense) / sum(M_breast).

    Dense voxels outside the breast mask are rejected rather than clipped,
    since the segmentation stage is responsible for containment.
    """
    _check_pair(dense, breast)
    if side not in SIDES:
        raise MaskError(f"side must be one of {SIDES}, got {side!r}")
    outside = int(np.count_nonzero(dense.voxels & ~breast.voxels))
    if outside:
        raise MaskError(f"{outside} dense voxels lie outside the breast mask")
    n_dense = dense.count()
    n_breast = breast.count()
    return DensityRecord(subject_id, side, n_dense / n_breast, n_dense, n_breast)


@dataclass(frozen=True)
class SliceDensity:
    index: int
    dense_voxels: int
    breast_voxels: int

    @property
    def empty(self) -> bool:
        return self.breast_voxels == 0

    @property
    def density(self) -> float | None:
        return None if self.empty else self.dense_voxels / self.breast_voxels


@dataclass(frozen=True)
class SliceProfile:
    axis: int
    per_slice: tuple[SliceDensity, ...]
    volumetric_density: float

    def densities(self) -> np.ndarray:
        """Per-slice densities with NaN for slices that contain no breast."""
        return np.array([np.nan if s.empty else s.density for s in self.per_slice])


def slice_density_profile(dense: BinaryMask3D, breast: BinaryMask3D, axis: int = 2) -> SliceProfile:
    _check_pair(dense, breast)
    if axis not in (0, 1, 2):
        raise MaskError(f"axis must be 0, 1 or 2, got {axis}")
    record = compute_density(dense, breast)
    other = tuple(a for a in range(3) if a != axis)
    d_counts = np.count_nonzero(dense.voxels, axis=other)
    b_counts = np.count_nonzero(breast.voxels, axis=other)
    per_slice = tuple(
        SliceDensity(i, int(d), int(b)) for i, (d, b) in enumerate(zip(d_counts, b_counts))
    )
    return SliceProfile(axis, per_slice, record.density)
