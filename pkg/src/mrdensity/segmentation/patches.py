"""Patch planning and equal-weight sliding-window fusion."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from mrdensity.errors import BackendError, ComputationError, InputError
from mrdensity.volume_io.types import Volume3D

DEFAULT_PATCH_SIZE = 96
DEFAULT_STEPS = (8, 8, 3)


class Backend(Protocol):
    """Maps a patch (and its origin in the padded volume) to per-voxel probabilities."""

    def predict(self, patch: np.ndarray, origin: tuple[int, int, int]) -> np.ndarray: ...


@dataclass(frozen=True)
class PatchPlan:
    dims: tuple[int, int, int]
    patch_size: int
    steps: tuple[int, int, int]
    padded_dims: tuple[int, int, int]
    axis_origins: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
    origins: tuple[tuple[int, int, int], ...]

    def __len__(self) -> int:
        return len(self.origins)

    def coverage(self) -> np.ndarray:
        """Number of patches covering each voxel of the unpadded volume."""
        p = self.patch_size
        cov = np.zeros(self.padded_dims, dtype=np.int32)
        for ox, oy, oz in self.origins:
            cov[ox : ox + p, oy : oy + p, oz : oz + p] += 1
        nx, ny, nz = self.dims
        return cov[:nx, :ny, :nz]


def axis_origins(dim: int, patch_size: int, steps: int) -> list[int]:
    """Origins along one axis: round-half-up of i*(D-P)/(S-1), clamped and deduplicated.

    The count is raised above ``steps`` only when the requested count would
    leave voxels uncovered, which includes ``steps == 1`` on an axis longer
    than the patch.
    """
    span = dim - patch_size
    if span <= 0:
        return [0]
    # a single step (or too few) cannot cover an axis longer than the patch
    steps = max(steps, math.ceil(span / patch_size) + 1)
    out: list[int] = []
    for i in range(steps):
        # exact integer form of floor(i*span/(steps-1) + 1/2)
        o = (2 * i * span + (steps - 1)) // (2 * (steps - 1))
        o = min(max(o, 0), span)
        if not out or out[-1] != o:
            out.append(o)
    return out


def plan_patches(
    dims: Sequence[int],
    patch_size: int = DEFAULT_PATCH_SIZE,
    steps: Sequence[int] = DEFAULT_STEPS,
) -> PatchPlan:
    dims = tuple(int(d) for d in dims)
    steps = tuple(int(s) for s in steps)
    if len(dims) != 3 or min(dims) < 1:
        raise InputError(f"dims must be three positive integers, got {dims}")
    if patch_size < 1:
        raise InputError(f"patch_size must be >= 1, got {patch_size}")
    if len(steps) != 3 or min(steps) < 1:
        raise InputError(f"steps must be three integers >= 1, got {steps}")
    padded = tuple(max(d, patch_size) for d in dims)
    per_axis = tuple(axis_origins(d, patch_size, s) for d, s in zip(padded, steps))
    origins = tuple(
        (ox, oy, oz) for ox in per_axis[0] for oy in per_axis[1] for oz in per_axis[2]
    )
    return PatchPlan(dims, patch_size, steps, padded, per_axis, origins)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class ProbabilityVolume:
    probs: np.ndarray
    coverage: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.probs.shape)  # type: ignore[return-value]


def worker_count() -> int:
    cap = os.environ.get("MRDENSITY_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InputError(f"MRDENSITY_THREADS must be an integer, got {cap!r}") from None
    return n


def _check_prediction(pred, origin, shape) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != shape:
        raise BackendError(f"backend returned shape {pred.shape} for patch at {origin}, expected {shape}")
    if not np.all(np.isfinite(pred)) or pred.min() < 0.0 or pred.max() > 1.0:
        raise BackendError(f"backend returned values outside [0, 1] for patch at {origin}")
    return pred


def run_sliding_window(
    volume: Volume3D,
    backend: Backend,
    plan: PatchPlan,
    workers: int | None = None,
) -> ProbabilityVolume:
    """Predict every planned patch and average overlapping predictions per voxel.

    Patches may be predicted concurrently; accumulation happens in plan order
    in float64, so the output does not depend on the worker count. Voxels
    outside the original volume (zero padding) are dropped before returning.
    """
    if tuple(volume.dims) != plan.dims:
        raise InputError(f"plan was built for dims {plan.dims}, volume has {volume.dims}")
    p = plan.patch_size
    nx, ny, nz = plan.dims
    padded = np.zeros(plan.padded_dims, dtype=np.float64)
    padded[:nx, :ny, :nz] = volume.voxels
    padded.flags.writeable = False

    total = np.zeros(plan.padded_dims, dtype=np.float64)
    count = np.zeros(plan.padded_dims, dtype=np.int32)
    shape = (p, p, p)

    def predict(origin):
        ox, oy, oz = origin
        return backend.predict(padded[ox : ox + p, oy : oy + p, oz : oz + p], origin)

    def accumulate(origin, pred):
        pred = _check_prediction(pred, origin, shape)
        ox, oy, oz = origin
        total[ox : ox + p, oy : oy + p, oz : oz + p] += pred
        count[ox : ox + p, oy : oy + p, oz : oz + p] += 1

    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1:
        for origin in plan.origins:
            accumulate(origin, predict(origin))
    else:
        # bounded in-flight batch keeps memory at ~2*workers patches
        batch = 2 * workers
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for start in range(0, len(plan.origins), batch):
                chunk = plan.origins[start : start + batch]
                for origin, pred in zip(chunk, pool.map(predict, chunk)):
                    accumulate(origin, pred)

    total = total[:nx, :ny, :nz]
    count = count[:nx, :ny, :nz]
    if count.min() < 1:
        raise ComputationError("patch plan leaves voxels uncovered")
    probs = total / count
    return ProbabilityVolume(probs, count)
