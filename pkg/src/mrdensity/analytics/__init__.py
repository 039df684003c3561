"""Report parsing, cohort statistics, rank correlation and threshold classification."""

from mrdensity.analytics.classifier import (
    ThresholdClassifier,
    best_cuts,
    classify_density,
    fit_threshold_classifier,
    train_test_split,
)
from mrdensity.analytics.cohort import (
    COHORT_HEADER,
    DATASET_TAGS,
    AgeBinSummary,
    CohortRecord,
    GroupSummary,
    age_group_stats,
    cohort_summary,
    distribution_summary,
    histogram,
    read_cohort_csv,
    write_cohort_csv,
)
from mrdensity.analytics.correlation import CorrelationResult, auc_binary, kendall_tau, spearman
from mrdensity.analytics.reports import (
    DensityCategory,
    ParsedReport,
    parse_corpus,
    parse_density_category,
    read_corpus,
)

__all__ = [
    "COHORT_HEADER",
    "DATASET_TAGS",
    "AgeBinSummary",
    "CohortRecord",
    "CorrelationResult",
    "DensityCategory",
    "GroupSummary",
    "ParsedReport",
    "ThresholdClassifier",
    "age_group_stats",
    "auc_binary",
    "best_cuts",
    "classify_density",
    "cohort_summary",
    "distribution_summary",
    "fit_threshold_classifier",
    "histogram",
    "kendall_tau",
    "parse_corpus",
    "parse_density_category",
    "read_cohort_csv",
    "read_corpus",
    "spearman",
    "train_test_split",
    "write_cohort_csv",
]
