"""Segmentation backends for the sliding-window harness.

Three kinds are available:

* ``fcm``    fuzzy c-means fitted on the normalized volume; the probability is
             the membership of the chosen cluster(s)
* ``oracle`` a fixed mask (e.g. phantom ground truth) returned patch by patch
* ``import`` a probability map produced elsewhere, read from a portable file
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from mrdensity.errors import BackendError, InputError
from mrdensity.segmentation.fcm import FcmModel, fcm_fit, fcm_predict_patch
from mrdensity.volume_io.portable import load_mask, load_probability_volume
from mrdensity.volume_io.types import BinaryMask3D, Volume3D

logger = logging.getLogger(__name__)

KINDS = ("fcm", "oracle", "import")
FIT_REGIONS = ("all", "breast")

# probabilities this far outside [0, 1] are clamped with a warning, beyond it rejected
IMPORT_CLAMP_TOL = 1e-3


@dataclass(frozen=True)
class BackendSpec:
    """Backend kind plus kind-specific parameters.

    ``fcm``:    clusters, m, tol, max_iter, ``fit_region`` ("all" or
                "breast"), and either ``target`` (cluster indices) or
                ``calibration`` (raw intensities; each maps to the nearest
                fitted centroid)
    ``oracle``: ``mask`` as a BinaryMask3D or a portable mask path
    ``import``: ``path`` of a portable f32 probability volume
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"unknown backend kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def parse(cls, text: str) -> BackendSpec:
        """Parse ``kind[:arg]`` (CLI form).

        ``oracle:<mask.json>``, ``import:<probs.json>``, ``fcm`` or
        ``fcm:key=value,...`` where list values use ``+`` (``target=1+2``).
        """
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        if kind == "oracle":
            if not arg:
                raise InputError("oracle backend needs a mask path: oracle:<mask.json>")
            return cls("oracle", {"mask": arg})
        if kind == "import":
            if not arg:
                raise InputError("import backend needs a probability volume path: import:<probs.json>")
            return cls("import", {"path": arg})
        if kind == "fcm":
            params: dict = {}
            for item in filter(None, (s.strip() for s in arg.split(","))):
                key, eq, value = item.partition("=")
                if not eq:
                    raise InputError(f"fcm backend option {item!r} must be key=value")
                params[key] = _parse_value(key, value)
            return cls("fcm", params)
        raise InputError(f"unknown backend kind {kind!r}; expected one of {KINDS}")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = "<in-memory mask>" if isinstance(v, BinaryMask3D) else v
        return out


def _parse_value(key: str, value: str):
    try:
        if key in ("target", "calibration"):
            conv = int if key == "target" else float
            return [conv(v) for v in value.split("+")]
        if key in ("clusters", "max_iter"):
            return int(value)
        if key in ("m", "tol"):
            return float(value)
        if key == "fit_region":
            if value not in FIT_REGIONS:
                raise InputError(f"fit_region must be one of {FIT_REGIONS}, got {value!r}")
            return value
    except ValueError as exc:
        raise InputError(f"bad value for fcm option {key}: {value!r}") from exc
    raise InputError(f"unknown fcm option {key!r}")


class ArrayBackend:
    """Serves patches cut from a fixed full-volume probability array."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        self.probs = probs

    def predict(self, patch: np.ndarray, origin: tuple[int, int, int]) -> np.ndarray:
        out = np.zeros(patch.shape, dtype=np.float64)
        src = tuple(
            slice(o, min(o + n, d)) for o, n, d in zip(origin, patch.shape, self.probs.shape)
        )
        dst = tuple(slice(0, s.stop - s.start) for s in src)
        out[dst] = self.probs[src]
        return out


class OracleBackend(ArrayBackend):
    def __init__(self, mask: BinaryMask3D):
        super().__init__(mask.voxels.astype(np.float64))


class ImportBackend(ArrayBackend):
    def __init__(self, path: str | Path):
        probs = load_probability_volume(path)
        lo, hi = float(probs.min()), float(probs.max())
        if not np.all(np.isfinite(probs)) or lo < -IMPORT_CLAMP_TOL or hi > 1 + IMPORT_CLAMP_TOL:
            raise BackendError(f"{path}: imported probabilities span [{lo:g}, {hi:g}], outside [0, 1]")
        if lo < 0 or hi > 1:
            logger.warning("%s: clamping probabilities from [%g, %g] to [0, 1]", path, lo, hi)
            probs = np.clip(probs, 0.0, 1.0)
        super().__init__(probs)


class FcmBackend:
    def __init__(self, model: FcmModel, targets: Sequence[int]):
        self.model = model
        self.targets = list(targets)

    def predict(self, patch: np.ndarray, origin: tuple[int, int, int]) -> np.ndarray:
        return fcm_predict_patch(self.model, patch, self.targets)


def fcm_targets(
    model: FcmModel,
    params: dict,
    role: str,
    intensity_stats: tuple[float, float] = (0.0, 1.0),
) -> list[int]:
    """Resolve which fitted clusters the backend reports.

    Explicit ``target`` indices win. Otherwise each ``calibration`` intensity
    (raw units, converted with ``intensity_stats`` = (mean, std) of the
    normalization) picks its nearest centroid. With neither, the breast stage
    takes every cluster but the darkest and the dense stage takes the
    brightest; this fallback is logged because tissue contrast depends on the
    sequence.
    """
    c = model.n_clusters
    if "target" in params:
        return [int(t) for t in params["target"]]
    centroids = np.asarray(model.centroids)
    if "calibration" in params:
        mean, std = intensity_stats
        picks = []
        for raw in params["calibration"]:
            z = (float(raw) - mean) / std
            idx = int(np.argmin(np.abs(centroids - z)))
            if idx not in picks:
                picks.append(idx)
        return picks
    logger.warning("fcm %s backend has no target/calibration; using the intensity-order default", role)
    return list(range(1, c)) if role == "breast" and c > 1 else [c - 1]


def build_backend(
    spec: BackendSpec,
    normalized: Volume3D,
    role: str = "dense",
    intensity_stats: tuple[float, float] = (0.0, 1.0),
    model_cache: dict | None = None,
    breast_mask: BinaryMask3D | None = None,
):
    """Instantiate the backend for one pipeline stage on a normalized volume.

    An FCM backend for the dense stage is fitted, by default, only on voxels
    inside ``breast_mask``: over the whole field of view the background
    dominates the intensity histogram and FCM spends clusters splitting it
    instead of separating fat from fibroglandular tissue.
    """
    if spec.kind == "oracle":
        mask = spec.params.get("mask")
        if mask is None:
            raise InputError("oracle backend requires a 'mask'")
        if not isinstance(mask, BinaryMask3D):
            mask = load_mask(mask)
        if mask.dims != normalized.dims:
            raise InputError(f"oracle mask dims {mask.dims} != volume dims {normalized.dims}")
        return OracleBackend(mask)
    if spec.kind == "import":
        if "path" not in spec.params:
            raise InputError("import backend requires a 'path'")
        backend = ImportBackend(spec.params["path"])
        if backend.probs.shape != normalized.dims:
            raise InputError(f"imported map dims {backend.probs.shape} != volume dims {normalized.dims}")
        return backend

    default_region = "breast" if role == "dense" and breast_mask is not None else "all"
    region = spec.params.get("fit_region", default_region)
    if region not in FIT_REGIONS:
        raise InputError(f"fit_region must be one of {FIT_REGIONS}, got {region!r}")
    if region == "breast" and breast_mask is None:
        raise InputError("fit_region=breast needs a breast mask from the preceding stage")
    fit_args = (
        int(spec.params.get("clusters", 2 if region == "breast" else 3)),
        float(spec.params.get("m", 2.0)),
        float(spec.params.get("tol", 1e-5)),
        int(spec.params.get("max_iter", 300)),
        region,
    )
    model = model_cache.get(fit_args) if model_cache is not None else None
    if model is None:
        c, m, tol, max_iter, _ = fit_args
        sample = normalized.voxels if region == "all" else normalized.voxels[breast_mask.voxels]
        model = fcm_fit(sample, c=c, m=m, tol=tol, max_iter=max_iter)
        if model_cache is not None:
            model_cache[fit_args] = model
    targets = fcm_targets(model, spec.params, role, intensity_stats)
    logger.info("fcm %s: centroids %s -> clusters %s", role, model.centroids, targets)
    return FcmBackend(model, targets)
