"""Ordinal threshold classifier from MRI density to the four density categories.

With a single scalar feature, any linear margin classifier reduces to cut
points on the density axis; the three cut points are found by exhaustive
search over midpoints between adjacent distinct training densities.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mrdensity.analytics.cohort import CohortRecord
from mrdensity.analytics.reports import DensityCategory
from mrdensity.errors import InputError, InsufficientDataError

N_LEVELS = 4
MIN_PER_CATEGORY = 4


@dataclass(frozen=True)
class ThresholdClassifier:
    thresholds: tuple[float, float, float]

    def __post_init__(self) -> None:
        t = self.thresholds
        if len(t) != N_LEVELS - 1 or not (t[0] < t[1] < t[2]):
            raise InputError(f"thresholds must be three strictly ascending values, got {t}")


def classify_density(clf: ThresholdClassifier, density: float) -> DensityCategory:
    """Bucket by cut points; a density equal to a cut point goes to the denser side."""
    if not 0.0 <= density <= 1.0:
        raise InputError(f"density must lie in [0, 1], got {density}")
    return DensityCategory(bisect.bisect_right(clf.thresholds, density) + 1)


def best_cuts(densities: Sequence[float], levels: Sequence[int]) -> tuple[tuple[float, float, float], int]:
    """Cut points maximizing the number of correctly bucketed samples.

    Equivalent to trying every strictly increasing triple of candidate
    midpoints, but solved by dynamic programming over the sorted groups of
    equal density: each of the four buckets must hold at least one group.
    Ties between equally good solutions go to the earliest cut positions.
    Returns the cut points and the number of correct samples.
    """
    d = np.asarray(densities, dtype=np.float64)
    lv = np.asarray(levels, dtype=np.int64)
    values, inverse = np.unique(d, return_inverse=True)
    g = values.size
    if g < N_LEVELS:
        raise InsufficientDataError(f"need at least {N_LEVELS} distinct densities, got {g}")
    # counts[k, i]: samples of level k+1 in group i
    counts = np.zeros((N_LEVELS, g), dtype=np.int64)
    np.add.at(counts, (lv - 1, inverse), 1)
    prefix = np.concatenate([np.zeros((N_LEVELS, 1), dtype=np.int64), np.cumsum(counts, axis=1)], axis=1)

    neg = -(10**18)
    # best[k][i]: max correct with groups 0..i in buckets 0..k, bucket k ending at i
    best = np.full((N_LEVELS, g), neg, dtype=np.int64)
    start = np.zeros((N_LEVELS, g), dtype=np.int64)
    best[0] = prefix[0, 1:]
    for k in range(1, N_LEVELS):
        run_val, run_arg = neg, -1
        for i in range(k, g):
            a = i  # bucket k may start at group a, needing bucket k-1 to end at a-1
            cand = best[k - 1, a - 1] - prefix[k, a]
            if cand > run_val:
                run_val, run_arg = cand, a
            best[k, i] = run_val + prefix[k, i + 1]
            start[k, i] = run_arg
    # last bucket must end at the final group
    correct = int(best[N_LEVELS - 1, g - 1])
    ends = [g - 1]
    for k in range(N_LEVELS - 1, 0, -1):
        a = int(start[k, ends[-1]])
        ends.append(a - 1)
    ends = ends[::-1][:-1]  # end group of buckets 0..2
    cuts = tuple(float((values[e] + values[e + 1]) / 2) for e in ends)
    return cuts, correct  # type: ignore[return-value]


def train_test_split(
    records: Sequence[CohortRecord], split_ratio: float = 0.8, seed: int = 0
) -> tuple[list[CohortRecord], list[CohortRecord]]:
    """Deterministic shuffle by ``seed`` then a head/tail split."""
    if not 0.0 < split_ratio < 1.0:
        raise InputError(f"split_ratio must lie in (0, 1), got {split_ratio}")
    order = np.random.default_rng(seed).permutation(len(records))
    n_train = int(round(split_ratio * len(records)))
    return [records[i] for i in order[:n_train]], [records[i] for i in order[n_train:]]


def fit_threshold_classifier(
    records: Sequence[CohortRecord], split_ratio: float = 0.8, seed: int = 0
) -> tuple[ThresholdClassifier, float]:
    """Fit cut points on the training split; return them with held-out accuracy."""
    labelled = [r for r in records if r.mammo_category is not None]
    train, test = train_test_split(labelled, split_ratio, seed)
    counts = {c: 0 for c in DensityCategory}
    for r in train:
        counts[r.mammo_category] += 1
    short = {c.token: n for c, n in counts.items() if n < MIN_PER_CATEGORY}
    if short:
        raise InsufficientDataError(
            f"training split needs >= {MIN_PER_CATEGORY} records per category; short: {short}"
        )
    if not test:
        raise InsufficientDataError("held-out split is empty")
    cuts, _ = best_cuts([r.density for r in train], [int(r.mammo_category) for r in train])
    clf = ThresholdClassifier(cuts)
    hits = sum(classify_density(clf, r.density) == r.mammo_category for r in test)
    return clf, hits / len(test)
