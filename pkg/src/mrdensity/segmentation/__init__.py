"""Patch-based segmentation harness."""

from mrdensity.segmentation.backends import (
    BackendSpec,
    FcmBackend,
    ImportBackend,
    OracleBackend,
    build_backend,
)
from mrdensity.segmentation.fcm import FcmModel, fcm_fit, fcm_predict_patch, memberships
from mrdensity.segmentation.normalize import zscore_normalize
from mrdensity.segmentation.patches import (
    DEFAULT_PATCH_SIZE,
    DEFAULT_STEPS,
    PatchPlan,
    ProbabilityVolume,
    plan_patches,
    run_sliding_window,
)
from mrdensity.segmentation.pipeline import (
    DEFAULT_THRESHOLD,
    Segmentation,
    binarize,
    segment_subject,
    segment_volume,
    split_laterality,
)

__all__ = [
    "DEFAULT_PATCH_SIZE",
    "DEFAULT_STEPS",
    "DEFAULT_THRESHOLD",
    "BackendSpec",
    "FcmBackend",
    "FcmModel",
    "ImportBackend",
    "OracleBackend",
    "PatchPlan",
    "ProbabilityVolume",
    "Segmentation",
    "binarize",
    "build_backend",
    "fcm_fit",
    "fcm_predict_patch",
    "memberships",
    "plan_patches",
    "run_sliding_window",
    "segment_subject",
    "segment_volume",
    "split_laterality",
    "zscore_normalize",
]
