from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mrdensity.analytics.reports import DensityCategory
from mrdensity.errors import InputError, InsufficientDataError

DATASET_TAGS = ("ISPY2", "DBC-MRI", "internal", "synthetic")
COHORT_HEADER = ("subject_id", "dataset", "age", "density", "mammo_category")


@dataclass(frozen=True)
class CohortRecord:
    subject_id: str
    dataset_tag: str
    age: float
    density: float
    mammo_category: DensityCategory | None = None

    def __post_init__(self) -> None:
        if self.dataset_tag not in DATASET_TAGS:
            raise InputError(f"dataset must be one of {DATASET_TAGS}, got {self.dataset_tag!r}")
        if not (0.0 <= self.density <= 1.0):
            raise InputError(f"density must lie in [0, 1], got {self.density}")
        if not (self.age >= 0 and math.isfinite(self.age)):
            raise InputError(f"age must be a finite value >= 0, got {self.age}")


def read_cohort_csv(source: str | Path | io.TextIOBase) -> list[CohortRecord]:
    """Parse the cohort CSV; errors name the offending line number."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_cohort_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise InputError("cohort CSV is empty")
    if tuple(h.strip() for h in header) != COHORT_HEADER:
        raise InputError(f"line 1: expected header {','.join(COHORT_HEADER)}, got {','.join(header)}")
    records = []
    for row in reader:
        line = reader.line_num
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(COHORT_HEADER):
            raise InputError(f"line {line}: expected {len(COHORT_HEADER)} fields, got {len(row)}")
        sid, tag, age, density, cat = (cell.strip() for cell in row)
        try:
            records.append(
                CohortRecord(
                    sid,
                    tag,
                    float(age),
                    float(density),
                    DensityCategory.from_token(cat) if cat else None,
                )
            )
        except ValueError as exc:
            raise InputError(f"line {line}: {exc}") from exc
    if not records:
        raise InputError("cohort CSV has no records")
    return records


def write_cohort_csv(records: Iterable[CohortRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COHORT_HEADER)
        for r in records:
            w.writerow(
                [
                    r.subject_id,
                    r.dataset_tag,
                    f"{r.age:g}",
                    f"{r.density:.6f}",
                    r.mammo_category.token if r.mammo_category else "",
                ]
            )


@dataclass(frozen=True)
class GroupSummary:
    group: str
    n: int
    mean: float
    std: float


def _mean_std(values: Sequence[float], ddof: int = 0) -> tuple[float, float]:
    x = np.asarray(values, dtype=np.float64)
    std = float(x.std(ddof=ddof)) if x.size > ddof else float("nan")
    return float(x.mean()), std


def cohort_summary(
    records: Sequence[CohortRecord], ddof: int = 0, include_all: bool = False
) -> list[GroupSummary]:
    """Per-dataset n, mean and std of density (population std unless ``ddof=1``)."""
    if not records:
        raise InsufficientDataError("cohort is empty")
    groups: dict[str, list[float]] = defaultdict(list)
    for r in records:
        groups[r.dataset_tag].append(r.density)
    out = []
    for tag in sorted(groups, key=lambda t: DATASET_TAGS.index(t)):
        mean, std = _mean_std(groups[tag], ddof)
        out.append(GroupSummary(tag, len(groups[tag]), mean, std))
    if include_all:
        mean, std = _mean_std([r.density for r in records], ddof)
        out.append(GroupSummary("all", len(records), mean, std))
    return out


def _bin_index(q: float) -> int:
    r = round(q)
    # tolerate representation error right at an edge (0.57 / 0.01 = 56.999...)
    return int(r) if abs(q - r) < 1e-9 else int(math.floor(q))


def histogram(densities: Sequence[float], bin_width: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    """Counts over uniform bins covering [0, 1]; bins are [lo, hi) except the closed last one."""
    if not bin_width > 0:
        raise InputError(f"bin_width must be > 0, got {bin_width}")
    ratio = 1.0 / bin_width
    n_bins = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(math.ceil(ratio))
    edges = np.arange(n_bins + 1, dtype=np.float64) * bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    for d in densities:
        if not (0.0 <= d <= 1.0):
            raise InputError(f"density {d} outside [0, 1]")
        counts[min(_bin_index(d / bin_width), n_bins - 1)] += 1
    return edges, counts


@dataclass(frozen=True)
class AgeBinSummary:
    bin: str
    n: int
    mean: float
    std: float
    q1: float
    median: float
    q3: float


def distribution_summary(label: str, values: Sequence[float], ddof: int = 0) -> AgeBinSummary:
    x = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    mean, std = _mean_std(x, ddof)
    return AgeBinSummary(label, int(x.size), mean, std, float(q1), float(med), float(q3))


def age_group_stats(
    records: Sequence[CohortRecord], ddof: int = 0
) -> tuple[list[AgeBinSummary], int]:
    """Decade bins 20-29 .. 80-89 by floor(age/10).

    Returns the non-empty bins in age order and the number of records whose
    age fell outside [20, 90).
    """
    groups: dict[int, list[float]] = defaultdict(list)
    excluded = 0
    for r in records:
        if 20 <= r.age < 90:
            groups[int(r.age // 10)].append(r.density)
        else:
            excluded += 1
    out = [
        distribution_summary(f"{10 * d}-{10 * d + 9}", groups[d], ddof) for d in sorted(groups)
    ]
    return out, excluded
