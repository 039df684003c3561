"""Core volume containers.

Arrays are indexed ``[x, y, z]`` so that ``voxels.shape == dims``. On disk the
payload is written x-fastest (Fortran order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mrdensity.errors import FormatError, InputError, PhantomSpecError

LPS = "LPS"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Scalar 3D image with voxel spacing in mm."""

    voxels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: str = LPS

    def __post_init__(self) -> None:
        vox = np.asarray(self.voxels)
        if vox.ndim != 3 or min(vox.shape) < 1:
            raise InputError(f"volume must be 3D with non-empty axes, got shape {vox.shape}")
        if not np.issubdtype(vox.dtype, np.floating):
            vox = vox.astype(np.float64)
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 and np.isfinite(s) for s in spacing):
            raise InputError(f"spacing must be three positive values, got {self.spacing}")
        object.__setattr__(self, "voxels", _frozen(vox))
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)  # type: ignore[return-value]

    def with_voxels(self, voxels: np.ndarray) -> Volume3D:
        return Volume3D(voxels, self.spacing, self.orientation)


@dataclass(frozen=True, eq=False)
class BinaryMask3D:
    """Voxel mask with values in {0, 1}; stored as a boolean array."""

    voxels: np.ndarray

    def __post_init__(self) -> None:
        vox = np.asarray(self.voxels)
        if vox.ndim != 3:
            raise InputError(f"mask must be 3D, got shape {vox.shape}")
        if vox.dtype != bool:
            if not np.all((vox == 0) | (vox == 1)):
                raise FormatError("mask contains values other than 0 and 1")
            vox = vox.astype(bool)
        object.__setattr__(self, "voxels", _frozen(vox))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)  # type: ignore[return-value]

    def count(self) -> int:
        return int(np.count_nonzero(self.voxels))

    def __and__(self, other: BinaryMask3D) -> BinaryMask3D:
        return BinaryMask3D(self.voxels & other.voxels)

    def __or__(self, other: BinaryMask3D) -> BinaryMask3D:
        return BinaryMask3D(self.voxels | other.voxels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask3D):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.voxels, other.voxels))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SeriesMeta:
    slice_positions: tuple[float, ...]
    orientation_cosines: tuple[float, ...]
    pixel_spacing: tuple[float, float]
    rescale: tuple[float, float] = (1.0, 0.0)
    source_ids: tuple[str, ...] = ()
    # source orientation of the stacked array before reorientation to LPS
    axis_permutation: tuple[int, int, int] = (0, 1, 2)
    axis_flips: tuple[bool, bool, bool] = (False, False, False)


@dataclass(frozen=True)
class Ellipsoid:
    semi_axes: tuple[float, float, float]
    center: tuple[float, float, float]

    def inside(self, shape: tuple[int, int, int]) -> np.ndarray:
        """Boolean grid of voxel centres that lie within the ellipsoid."""
        gx, gy, gz = np.ogrid[: shape[0], : shape[1], : shape[2]]
        (ax, ay, az), (cx, cy, cz) = self.semi_axes, self.center
        r2 = ((gx - cx) / ax) ** 2 + ((gy - cy) / ay) ** 2 + ((gz - cz) / az) ** 2
        return r2 <= 1.0

    def volume(self) -> float:
        ax, ay, az = self.semi_axes
        return 4.0 / 3.0 * np.pi * ax * ay * az


@dataclass(frozen=True)
class PhantomSpec:
    """Synthetic breast phantom: a half-ellipsoid breast holding an ellipsoidal dense core.

    The breast is clipped at the chest-wall plane ``y = breast.center[1]`` and
    extends toward +y.
    """

    dims: tuple[int, int, int] = (64, 64, 64)
    breast: Ellipsoid = Ellipsoid((24.0, 28.0, 24.0), (32.0, 4.0, 32.0))
    dense: Ellipsoid = Ellipsoid((10.0, 10.0, 10.0), (32.0, 16.0, 32.0))
    intensity_fat: float = 100.0
    intensity_dense: float = 200.0
    intensity_background: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @classmethod
    def from_dict(cls, d: dict) -> PhantomSpec:
        d = dict(d)
        kw: dict = {}
        try:
            for key in ("breast", "dense"):
                if key in d:
                    e = d.pop(key)
                    kw[key] = Ellipsoid(
                        tuple(float(v) for v in e["semi_axes"]), tuple(float(v) for v in e["center"])
                    )
            if "dims" in d:
                kw["dims"] = tuple(int(v) for v in d.pop("dims"))
            if "spacing" in d:
                kw["spacing"] = tuple(float(v) for v in d.pop("spacing"))
            for key in ("intensity_fat", "intensity_dense", "intensity_background", "noise_sigma"):
                if key in d:
                    kw[key] = float(d.pop(key))
            if "seed" in d:
                kw["seed"] = int(d.pop("seed"))
        except (KeyError, TypeError, ValueError) as exc:
            raise PhantomSpecError(f"malformed phantom spec: {exc!r}") from exc
        if d:
            raise PhantomSpecError(f"unknown phantom spec fields: {sorted(d)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "breast": {"semi_axes": list(self.breast.semi_axes), "center": list(self.breast.center)},
            "dense": {"semi_axes": list(self.dense.semi_axes), "center": list(self.dense.center)},
            "intensity_fat": self.intensity_fat,
            "intensity_dense": self.intensity_dense,
            "intensity_background": self.intensity_background,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "spacing": list(self.spacing),
        }
