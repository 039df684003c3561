"""Portable volume format: a JSON header plus a raw little-endian payload.

Header fields::

    {"dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz], "orientation": "LPS",
     "dtype": "f32" | "u8", "data_file": "<name>.raw"}

``data_file`` is resolved relative to the header. Payload is x-fastest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mrdensity.errors import FormatError
from mrdensity.volume_io.types import LPS, BinaryMask3D, Volume3D

DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1")}
HEADER_FIELDS = ("dims", "spacing_mm", "orientation", "dtype", "data_file")


def _data_path_for(header: Path) -> Path:
    if header.suffix == ".json":
        return header.with_suffix(".raw")
    return header.with_name(header.name + ".raw")


def _write(header: Path, arr: np.ndarray, dtype: str, spacing, orientation: str) -> Path:
    header = Path(header)
    header.parent.mkdir(parents=True, exist_ok=True)
    data_path = _data_path_for(header)
    payload = np.asarray(arr).astype(DTYPES[dtype], copy=False).tobytes(order="F")
    data_path.write_bytes(payload)
    meta = {
        "dims": [int(n) for n in arr.shape],
        "spacing_mm": [float(s) for s in spacing],
        "orientation": orientation,
        "dtype": dtype,
        "data_file": data_path.name,
    }
    header.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return header


def read_header(header: str | Path) -> dict:
    header = Path(header)
    try:
        meta = json.loads(header.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{header}: malformed header ({exc})") from exc
    if not isinstance(meta, dict):
        raise FormatError(f"{header}: header must be a JSON object")
    missing = [f for f in HEADER_FIELDS if f not in meta]
    if missing:
        raise FormatError(f"{header}: missing header fields {missing}")
    if meta["dtype"] not in DTYPES:
        raise FormatError(f"{header}: unsupported dtype {meta['dtype']!r}")
    dims = meta["dims"]
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or not all(isinstance(n, int) and n >= 1 for n in dims)
    ):
        raise FormatError(f"{header}: dims must be three positive integers, got {dims!r}")
    spacing = meta["spacing_mm"]
    if not isinstance(spacing, list) or len(spacing) != 3:
        raise FormatError(f"{header}: spacing_mm must have three entries")
    return meta


def _read(header: str | Path, expect_dtype: str) -> tuple[np.ndarray, dict]:
    header = Path(header)
    meta = read_header(header)
    if meta["dtype"] != expect_dtype:
        raise FormatError(f"{header}: expected dtype {expect_dtype!r}, found {meta['dtype']!r}")
    data_path = header.parent / meta["data_file"]
    raw = np.fromfile(data_path, dtype=DTYPES[expect_dtype])
    n_expected = int(np.prod(meta["dims"]))
    if raw.size != n_expected or data_path.stat().st_size != n_expected * DTYPES[expect_dtype].itemsize:
        raise FormatError(
            f"{header}: header declares {n_expected} elements but {data_path.name} holds "
            f"{data_path.stat().st_size / DTYPES[expect_dtype].itemsize:g}"
        )
    return raw.reshape(meta["dims"], order="F"), meta


def save_portable_volume(volume: Volume3D, header: str | Path) -> Path:
    return _write(Path(header), volume.voxels, "f32", volume.spacing, volume.orientation)


def load_portable_volume(header: str | Path) -> Volume3D:
    arr, meta = _read(header, "f32")
    try:
        return Volume3D(arr, tuple(meta["spacing_mm"]), meta["orientation"])
    except ValueError as exc:
        raise FormatError(f"{header}: {exc}") from exc


def save_mask(mask: BinaryMask3D, header: str | Path, spacing=(1.0, 1.0, 1.0)) -> Path:
    return _write(Path(header), mask.voxels, "u8", spacing, LPS)


def load_mask(header: str | Path) -> BinaryMask3D:
    arr, _ = _read(header, "u8")
    if arr.max(initial=0) > 1:
        raise FormatError(f"{header}: non-binary value {int(arr.max())} in mask")
    return BinaryMask3D(arr.astype(bool))


def load_probability_volume(header: str | Path) -> np.ndarray:
    """Read an f32 probability map as float64, without range checks."""
    arr, _ = _read(header, "f32")
    return arr.astype(np.float64)
