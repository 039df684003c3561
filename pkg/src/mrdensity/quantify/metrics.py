"""Overlap and boundary-distance metrics between binary masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from mrdensity.errors import MaskError
from mrdensity.volume_io.types import BinaryMask3D


@dataclass(frozen=True)
class SegMetrics:
    dsc: float
    hd: float

    def table_row(self) -> str:
        """DSC in percent and HD in voxels, two decimals each."""
        return f"DSC {100 * self.dsc:.2f}  HD {self.hd:.2f}"


def _check_dims(a: BinaryMask3D, b: BinaryMask3D) -> None:
    if a.dims != b.dims:
        raise MaskError(f"mask dims differ: {a.dims} vs {b.dims}")


def dice(a: BinaryMask3D, b: BinaryMask3D) -> float:
    """2|A and B| / (|A| + |B|). Two empty masks are an error, not a convention."""
    _check_dims(a, b)
    na, nb = a.count(), b.count()
    if na + nb == 0:
        raise MaskError("Dice is undefined for two empty masks")
    inter = int(np.count_nonzero(a.voxels & b.voxels))
    return 2 * inter / (na + nb)


def _directed_sq(src: np.ndarray, dst: np.ndarray, spacing: np.ndarray | None) -> float:
    """max over src voxels of the squared distance to the nearest dst voxel."""
    # nearest-feature indices from the exact Euclidean distance transform
    _, nearest = ndimage.distance_transform_edt(
        ~dst, sampling=None if spacing is None else spacing, return_indices=True
    )
    pts = np.nonzero(src)
    diff = np.stack([nearest[k][pts] - pts[k] for k in range(3)])
    if spacing is None:
        sq = np.sum(diff * diff, axis=0)
    else:
        scaled = diff * spacing[:, None]
        sq = np.sum(scaled * scaled, axis=0)
    return float(sq.max())


def hausdorff(a: BinaryMask3D, b: BinaryMask3D, spacing: Sequence[float] | None = None) -> float:
    """Symmetric Hausdorff distance between the full foreground voxel sets.

    Distances are Euclidean in voxel units unless ``spacing`` (mm per axis) is
    given. The computation is cropped to the joint bounding box, which cannot
    change any nearest-voxel distance.
    """
    _check_dims(a, b)
    if not a.voxels.any() or not b.voxels.any():
        raise MaskError("Hausdorff distance needs two non-empty masks")
    union = a.voxels | b.voxels
    box = ndimage.find_objects(union.astype(np.uint8))[0]
    va, vb = a.voxels[box], b.voxels[box]
    if np.array_equal(va, vb):
        return 0.0
    sp = None if spacing is None else np.asarray(spacing, dtype=np.float64)
    return float(np.sqrt(max(_directed_sq(va, vb, sp), _directed_sq(vb, va, sp))))


def evaluate(pred: BinaryMask3D, truth: BinaryMask3D) -> SegMetrics:
    return SegMetrics(dice(pred, truth), hausdorff(pred, truth))
