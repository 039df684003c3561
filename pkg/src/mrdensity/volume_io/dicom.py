"""Single-frame DICOM series ingestion into an LPS-oriented volume."""

from __future__ import annotations

import itertools
import logging
from pathlib import Path

import numpy as np
import pydicom
from pydicom.errors import InvalidDicomError
from pydicom.uid import ExplicitVRLittleEndian, ImplicitVRLittleEndian

from mrdensity.errors import DicomError
from mrdensity.volume_io.types import LPS, SeriesMeta, Volume3D

logger = logging.getLogger(__name__)

SUPPORTED_SYNTAXES = {ImplicitVRLittleEndian, ExplicitVRLittleEndian}

REQUIRED_TAGS = {
    "ImagePositionPatient": "(0020,0032)",
    "ImageOrientationPatient": "(0020,0037)",
    "PixelSpacing": "(0028,0030)",
    "Rows": "(0028,0010)",
    "Columns": "(0028,0011)",
    "PixelData": "(7FE0,0010)",
}

# positions closer than this along the slice normal count as duplicates (mm)
DUPLICATE_TOL = 1e-4
UNIT_NORM_TOL = 1e-3


def _read_slices(directory: Path) -> list[tuple[Path, pydicom.Dataset]]:
    slices = []
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        try:
            ds = pydicom.dcmread(path)
        except (InvalidDicomError, EOFError):
            logger.debug("skipping non-DICOM file %s", path)
            continue
        slices.append((path, ds))
    return slices


def _check_slice(path: Path, ds: pydicom.Dataset) -> None:
    syntax = getattr(getattr(ds, "file_meta", None), "TransferSyntaxUID", None)
    if syntax is None:
        raise DicomError(f"{path.name}: missing transfer syntax (0002,0010)")
    if syntax not in SUPPORTED_SYNTAXES:
        raise DicomError(f"{path.name}: unsupported transfer syntax {syntax} ({syntax.name})")
    for keyword, tag in REQUIRED_TAGS.items():
        if keyword not in ds:
            raise DicomError(f"{path.name}: missing required tag {tag} {keyword}")
    if int(getattr(ds, "NumberOfFrames", 1) or 1) > 1:
        raise DicomError(f"{path.name}: multi-frame images are not supported")
    if int(getattr(ds, "SamplesPerPixel", 1)) != 1:
        raise DicomError(f"{path.name}: only single-channel images are supported")


def _orientation(path: Path, ds: pydicom.Dataset) -> np.ndarray:
    iop = np.asarray([float(v) for v in ds.ImageOrientationPatient], dtype=np.float64)
    if iop.shape != (6,):
        raise DicomError(f"{path.name}: (0020,0037) ImageOrientationPatient needs 6 values")
    for part in (iop[:3], iop[3:]):
        if abs(np.linalg.norm(part) - 1.0) > UNIT_NORM_TOL:
            raise DicomError(
                f"{path.name}: (0020,0037) ImageOrientationPatient cosine {part.tolist()} is not unit norm"
            )
    return iop


def _canonical_axes(direction: np.ndarray) -> tuple[tuple[int, int, int], tuple[bool, bool, bool]]:
    """Permutation and flips that bring array axes closest to +x, +y, +z.

    ``direction[:, i]`` is the patient-frame unit vector of array axis ``i``.
    Returns ``perm`` with output axis ``a`` taken from array axis ``perm[a]``.
    """
    best = max(
        itertools.permutations(range(3)),
        key=lambda p: sum(abs(direction[a, p[a]]) for a in range(3)),
    )
    flips = tuple(bool(direction[a, best[a]] < 0) for a in range(3))
    return best, flips  # type: ignore[return-value]


def load_dicom_series(directory: str | Path) -> tuple[Volume3D, SeriesMeta]:
    """Read a directory of single-frame slices into an LPS volume with ascending z.

    Slices are ordered along the slice normal (row cosine x column cosine),
    stacked, then the axes are permuted and flipped so that array axes point
    toward patient left, posterior and superior. A series whose slice normal
    points toward -z therefore comes out with its slice order reversed.
    Rescale slope/intercept are applied per slice (defaults 1 and 0).
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"DICOM directory not found: {directory}")
    slices = _read_slices(directory)
    if len(slices) < 2:
        raise DicomError(f"{directory}: need at least 2 DICOM slices, found {len(slices)}")

    series_uids = {str(getattr(ds, "SeriesInstanceUID", "")) for _, ds in slices}
    if len(series_uids - {""}) > 1:
        raise DicomError(f"{directory}: files belong to {len(series_uids)} different series")

    for path, ds in slices:
        _check_slice(path, ds)

    ref_path, ref = slices[0]
    iop = _orientation(ref_path, ref)
    rows, cols = int(ref.Rows), int(ref.Columns)
    pixel_spacing = tuple(float(v) for v in ref.PixelSpacing)
    for path, ds in slices[1:]:
        if int(ds.Rows) != rows or int(ds.Columns) != cols:
            raise DicomError(
                f"{path.name}: Rows/Columns {int(ds.Rows)}x{int(ds.Columns)} differ from {rows}x{cols}"
            )
        if not np.allclose([float(v) for v in ds.PixelSpacing], pixel_spacing, rtol=0, atol=1e-6):
            raise DicomError(f"{path.name}: (0028,0030) PixelSpacing differs from the rest of the series")
        if not np.allclose(_orientation(path, ds), iop, rtol=0, atol=UNIT_NORM_TOL):
            raise DicomError(f"{path.name}: (0020,0037) ImageOrientationPatient differs across slices")

    row_dir, col_dir = iop[:3], iop[3:]
    normal = np.cross(row_dir, col_dir)
    positions = np.array([[float(v) for v in ds.ImagePositionPatient] for _, ds in slices])
    along = positions @ normal
    order = np.argsort(along, kind="stable")
    gaps = np.diff(along[order])
    if np.any(gaps < DUPLICATE_TOL):
        k = int(np.argmin(gaps))
        a, b = slices[order[k]][0].name, slices[order[k + 1]][0].name
        raise DicomError(f"duplicate slice position in {a} and {b} (0020,0032)")
    slice_spacing = float(np.median(gaps))

    # stacked[i, j, k]: i along row_dir (column index), j along col_dir (row index)
    stacked = np.empty((cols, rows, len(slices)), dtype=np.float32)
    for k, idx in enumerate(order):
        path, ds = slices[idx]
        try:
            pixels = ds.pixel_array
        except Exception as exc:
            raise DicomError(f"{path.name}: cannot decode (7FE0,0010) PixelData: {exc}") from exc
        if pixels.shape != (rows, cols):
            raise DicomError(f"{path.name}: pixel array shape {pixels.shape} != {(rows, cols)}")
        slope = float(getattr(ds, "RescaleSlope", 1.0) or 1.0)
        intercept = float(getattr(ds, "RescaleIntercept", 0.0) or 0.0)
        stacked[:, :, k] = (pixels.astype(np.float64) * slope + intercept).T

    direction = np.column_stack([row_dir, col_dir, normal])
    perm, flips = _canonical_axes(direction)
    out = np.transpose(stacked, perm)
    for axis, flip in enumerate(flips):
        if flip:
            out = np.flip(out, axis=axis)
    out = np.ascontiguousarray(out)

    src_spacing = (pixel_spacing[1], pixel_spacing[0], slice_spacing)
    spacing = tuple(src_spacing[p] for p in perm)

    # patient z of each output slice, taken at its first in-plane voxel and
    # using the actual slice positions (gaps need not be uniform)
    sorted_pos = positions[order]
    first = np.array([stacked.shape[p] - 1 if f else 0 for p, f in zip(perm, flips)])
    z_positions, out_sources = [], []
    for k in range(out.shape[2]):
        out_idx = first.copy()
        out_idx[2] = first[2] + (-k if flips[2] else k)
        src_idx = np.empty(3, dtype=np.int64)
        src_idx[list(perm)] = out_idx
        point = (
            sorted_pos[src_idx[2]]
            + row_dir * pixel_spacing[1] * src_idx[0]
            + col_dir * pixel_spacing[0] * src_idx[1]
        )
        z_positions.append(float(point[2]))
        out_sources.append(slices[order[src_idx[2]]][0].name)
    if np.ptp(gaps) > 0.01 * slice_spacing:
        logger.warning("%s: slice gaps vary from %g to %g mm", directory, gaps.min(), gaps.max())

    first_ds = slices[order[0]][1]
    meta = SeriesMeta(
        slice_positions=tuple(z_positions),
        orientation_cosines=tuple(float(v) for v in iop),
        pixel_spacing=(pixel_spacing[0], pixel_spacing[1]),
        rescale=(
            float(getattr(first_ds, "RescaleSlope", 1.0) or 1.0),
            float(getattr(first_ds, "RescaleIntercept", 0.0) or 0.0),
        ),
        source_ids=tuple(out_sources) if perm[2] == 2 else tuple(slices[i][0].name for i in order),
        axis_permutation=perm,
        axis_flips=flips,
    )
    return Volume3D(out, spacing, LPS), meta
