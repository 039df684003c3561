"""Volume ingestion, portable storage and synthetic phantoms."""

from mrdensity.volume_io.dicom import load_dicom_series
from mrdensity.volume_io.phantom import analytic_dense_fraction, generate_phantom
from mrdensity.volume_io.portable import (
    load_mask,
    load_portable_volume,
    load_probability_volume,
    save_mask,
    save_portable_volume,
)
from mrdensity.volume_io.types import LPS, BinaryMask3D, Ellipsoid, PhantomSpec, SeriesMeta, Volume3D

__all__ = [
    "LPS",
    "BinaryMask3D",
    "Ellipsoid",
    "PhantomSpec",
    "SeriesMeta",
    "Volume3D",
    "analytic_dense_fraction",
    "generate_phantom",
    "load_dicom_series",
    "load_mask",
    "load_portable_volume",
    "load_probability_volume",
    "save_mask",
    "save_portable_volume",
]
