from __future__ import annotations

import numpy as np

from mrdensity.errors import PhantomSpecError
from mrdensity.volume_io.types import LPS, BinaryMask3D, PhantomSpec, Volume3D


def breast_region(spec: PhantomSpec) -> np.ndarray:
    """Half-ellipsoid: the breast ellipsoid clipped at its chest-wall plane."""
    inside = spec.breast.inside(spec.dims)
    y = np.arange(spec.dims[1]).reshape(1, -1, 1)
    return inside & (y >= spec.breast.center[1])


def validate_spec(spec: PhantomSpec) -> None:
    if len(spec.dims) != 3 or min(spec.dims) < 1:
        raise PhantomSpecError(f"dims must be three positive integers, got {spec.dims}")
    for name, ell in (("breast", spec.breast), ("dense", spec.dense)):
        if len(ell.semi_axes) != 3 or min(ell.semi_axes) <= 0:
            raise PhantomSpecError(f"{name} semi-axes must be positive, got {ell.semi_axes}")
    if not spec.noise_sigma >= 0:
        raise PhantomSpecError(f"noise_sigma must be >= 0, got {spec.noise_sigma}")
    if spec.intensity_dense == spec.intensity_fat:
        raise PhantomSpecError("intensity_dense must differ from intensity_fat")
    (ax, ay, az), (cx, cy, cz) = spec.breast.semi_axes, spec.breast.center
    nx, ny, nz = spec.dims
    if cx - ax < 0 or cx + ax > nx - 1 or cz - az < 0 or cz + az > nz - 1 or cy < 0 or cy + ay > ny - 1:
        raise PhantomSpecError(f"dims {spec.dims} too small to contain the breast half-ellipsoid")


def generate_phantom(spec: PhantomSpec) -> tuple[Volume3D, BinaryMask3D, BinaryMask3D]:
    """Render ``spec`` into (volume, breast_truth, dense_truth).

    Voxel value = class mean + N(0, noise_sigma), drawn from a generator seeded
    with ``spec.seed``. The volume is float32 so it saves losslessly.
    """
    validate_spec(spec)
    breast = breast_region(spec)
    dense = spec.dense.inside(spec.dims)
    if not dense.any():
        raise PhantomSpecError("dense ellipsoid contains no voxel centres")
    if np.any(dense & ~breast):
        raise PhantomSpecError("dense ellipsoid is not contained in the breast half-ellipsoid")

    means = np.full(spec.dims, spec.intensity_background, dtype=np.float64)
    means[breast] = spec.intensity_fat
    means[dense] = spec.intensity_dense
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        means += rng.normal(0.0, spec.noise_sigma, size=spec.dims)
    volume = Volume3D(means.astype(np.float32), spec.spacing, LPS)
    return volume, BinaryMask3D(breast), BinaryMask3D(dense)


def analytic_dense_fraction(spec: PhantomSpec) -> float:
    """Continuous dense/breast volume ratio (ellipsoid over half-ellipsoid)."""
    return spec.dense.volume() / (0.5 * spec.breast.volume())
