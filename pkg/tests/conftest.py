from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import pytest
from pydicom.dataset import Dataset, FileMetaDataset
from pydicom.uid import ExplicitVRLittleEndian, MRImageStorage, generate_uid

from mrdensity.volume_io import BinaryMask3D, Ellipsoid, PhantomSpec

SERIES_UID = "1.2.826.0.1.3680043.8.498.1"


def write_slice(
    path: Path,
    pixels: np.ndarray,
    position: Sequence[float],
    orientation: Sequence[float] = (1, 0, 0, 0, 1, 0),
    spacing: Sequence[float] = (0.5, 0.75),
    slope: float | None = None,
    intercept: float | None = None,
    series_uid: str = SERIES_UID,
    transfer_syntax: str = ExplicitVRLittleEndian,
    omit: Sequence[str] = (),
) -> Path:
    """Write one uncompressed single-frame MR slice; ``pixels`` is (rows, cols) int16."""
    meta = FileMetaDataset()
    meta.MediaStorageSOPClassUID = MRImageStorage
    meta.MediaStorageSOPInstanceUID = generate_uid()
    meta.TransferSyntaxUID = transfer_syntax
    ds = Dataset()
    ds.file_meta = meta
    ds.SOPClassUID = MRImageStorage
    ds.SOPInstanceUID = meta.MediaStorageSOPInstanceUID
    ds.Modality = "MR"
    ds.SeriesInstanceUID = series_uid
    ds.ImagePositionPatient = [float(v) for v in position]
    ds.ImageOrientationPatient = [float(v) for v in orientation]
    ds.PixelSpacing = [float(v) for v in spacing]
    pixels = np.asarray(pixels, dtype=np.int16)
    ds.Rows, ds.Columns = pixels.shape
    ds.SamplesPerPixel = 1
    ds.PhotometricInterpretation = "MONOCHROME2"
    ds.BitsAllocated = 16
    ds.BitsStored = 16
    ds.HighBit = 15
    ds.PixelRepresentation = 1
    if slope is not None:
        ds.RescaleSlope = slope
    if intercept is not None:
        ds.RescaleIntercept = intercept
    ds.PixelData = pixels.tobytes()
    for keyword in omit:
        delattr(ds, keyword)
    ds.save_as(path, enforce_file_format=True)
    return path


def write_series(directory: Path, slices: Sequence[np.ndarray], z_positions: Sequence[float], **kwargs) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i, (pix, z) in enumerate(zip(slices, z_positions)):
        write_slice(directory / f"im{i:03d}.dcm", pix, (0.0, 0.0, float(z)), **kwargs)
    return directory


@pytest.fixture
def dicom_writer():
    return write_series


def small_phantom_spec(**kw) -> PhantomSpec:
    base = dict(
        dims=(32, 32, 24),
        breast=Ellipsoid((12.0, 14.0, 9.0), (16.0, 2.0, 12.0)),
        dense=Ellipsoid((5.0, 5.0, 4.0), (16.0, 8.0, 12.0)),
    )
    base.update(kw)
    return PhantomSpec(**base)


@pytest.fixture
def small_spec() -> PhantomSpec:
    return small_phantom_spec()


def random_mask(rng: np.random.Generator, shape=(16, 16, 16), p: float | None = None) -> BinaryMask3D:
    p = rng.uniform(0.01, 0.3) if p is None else p
    return BinaryMask3D(rng.random(shape) < p)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES: list[str] = []


def acceptance_report(number: int, title: str, ok: bool, detail: str = "") -> None:
    """Record and print one PASS/FAIL line; the lines are repeated in the session summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
