from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mrdensity.errors import InputError
from mrdensity.segmentation.backends import BackendSpec, build_backend
from mrdensity.segmentation.normalize import zscore_normalize, zscore_stats
from mrdensity.segmentation.patches import (
    DEFAULT_PATCH_SIZE,
    DEFAULT_STEPS,
    PatchPlan,
    ProbabilityVolume,
    plan_patches,
    run_sliding_window,
)
from mrdensity.volume_io.types import BinaryMask3D, Volume3D

DEFAULT_THRESHOLD = 0.5


def binarize(p: ProbabilityVolume | np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> BinaryMask3D:
    """Voxel is foreground iff its probability is >= ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise InputError(f"threshold must lie in (0, 1), got {threshold}")
    probs = p.probs if isinstance(p, ProbabilityVolume) else np.asarray(p)
    return BinaryMask3D(probs >= threshold)


@dataclass(frozen=True)
class Segmentation:
    breast: BinaryMask3D
    dense: BinaryMask3D
    plan: PatchPlan


def segment_volume(
    volume: Volume3D,
    breast_backend: BackendSpec,
    dense_backend: BackendSpec,
    threshold: float = DEFAULT_THRESHOLD,
    patch_size: int = DEFAULT_PATCH_SIZE,
    steps: Sequence[int] = DEFAULT_STEPS,
    workers: int | None = None,
) -> Segmentation:
    """Normalize, plan, run both backends, binarize, and clip dense to breast."""
    if not 0.0 < threshold < 1.0:
        raise InputError(f"threshold must lie in (0, 1), got {threshold}")
    stats = zscore_stats(volume.voxels)
    normalized = zscore_normalize(volume)
    plan = plan_patches(volume.dims, patch_size, steps)
    cache: dict = {}
    backend = build_backend(breast_backend, normalized, "breast", stats, cache)
    breast = binarize(run_sliding_window(normalized, backend, plan, workers=workers), threshold)
    backend = build_backend(dense_backend, normalized, "dense", stats, cache, breast_mask=breast)
    dense = binarize(run_sliding_window(normalized, backend, plan, workers=workers), threshold)
    return Segmentation(breast, dense & breast, plan)


def segment_subject(
    volume: Volume3D,
    breast_backend: BackendSpec,
    dense_backend: BackendSpec,
    threshold: float = DEFAULT_THRESHOLD,
    **kwargs,
) -> tuple[BinaryMask3D, BinaryMask3D]:
    seg = segment_volume(volume, breast_backend, dense_backend, threshold, **kwargs)
    return seg.breast, seg.dense


def split_laterality(mask: BinaryMask3D) -> tuple[BinaryMask3D, BinaryMask3D]:
    """Split at the midsagittal plane: x-index >= nx/2 is patient left in LPS.

    Returns ``(left, right)``.
    """
    nx = mask.dims[0]
    x = np.arange(nx).reshape(-1, 1, 1)
    is_left = 2 * x >= nx
    return BinaryMask3D(mask.voxels & is_left), BinaryMask3D(mask.voxels & ~is_left)
