"""Rank correlations and the Mann-Whitney AUC.

p-values are asymptotic: Spearman uses the Student t approximation with
n - 2 degrees of freedom, Kendall the normal approximation of tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from mrdensity.errors import InputError


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int
    method: str


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise InputError(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise InputError(f"need at least 3 paired values, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("inputs must be finite")
    for name, v in (("x", x), ("y", y)):
        if np.all(v == v[0]):
            raise InputError(f"{name} is constant; rank correlation is undefined")
    return x, y


def spearman_pvalue(rho: float, n: int) -> float:
    """Two-sided p from t = rho*sqrt((n-2)/(1-rho^2)) against Student t(n-2)."""
    if abs(rho) >= 1.0:
        return 0.0
    df = n - 2
    t2 = rho * rho * df / (1.0 - rho * rho)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return float(betainc(0.5 * df, 0.5, df / (df + t2)))


def kendall_pvalue(tau: float, n: int) -> float:
    """Two-sided p from z = 3*tau*sqrt(n(n-1)) / sqrt(2(2n+5)) (no tie correction)."""
    z = 3.0 * tau * math.sqrt(n * (n - 1)) / math.sqrt(2.0 * (2 * n + 5))
    return math.erfc(abs(z) / math.sqrt(2.0))


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson correlation of average ranks (ties share their mean rank)."""
    x, y = _paired(x, y)
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    rho = max(-1.0, min(1.0, rho))
    return CorrelationResult(rho, spearman_pvalue(rho, x.size), int(x.size), "spearman")


def _concordance(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int]:
    """(sum of sign products, x-tied pairs, y-tied pairs) over unordered pairs."""
    n = x.size
    chunk = max(1, 2**22 // n)
    s = tx = ty = 0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        sx = np.sign(x[start:stop, None] - x[None, :]).astype(np.int8)
        sy = np.sign(y[start:stop, None] - y[None, :]).astype(np.int8)
        s += int(np.sum(sx.astype(np.int64) * sy))
        tx += int(np.count_nonzero(sx == 0)) - (stop - start)
        ty += int(np.count_nonzero(sy == 0)) - (stop - start)
    # each unordered pair was visited twice; self-pairs removed above
    return s // 2, tx // 2, ty // 2


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Kendall tau-b: (C - D) / sqrt((n0 - n1)(n0 - n2))."""
    x, y = _paired(x, y)
    n = x.size
    s, ties_x, ties_y = _concordance(x, y)
    n0 = n * (n - 1) // 2
    tau = s / math.sqrt((n0 - ties_x) * (n0 - ties_y))
    tau = max(-1.0, min(1.0, tau))
    return CorrelationResult(tau, kendall_pvalue(tau, n), int(n), "kendall")


def auc_binary(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a positive outscores a negative, ties counting one half.

    Computed from average ranks; ``2*U`` is an exact integer so the result is
    the correctly rounded ratio.
    """
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    if s.shape != lab.shape or s.ndim != 1:
        raise InputError("scores and labels must be 1-D of equal length")
    if not np.all(np.isin(lab, (0, 1))):
        raise InputError("labels must be 0 or 1")
    pos = lab == 1
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUC needs both positive and negative labels")
    twice_ranks = np.rint(2 * rankdata(s, method="average")).astype(np.int64)
    twice_u = int(twice_ranks[pos].sum()) - n_pos * (n_pos + 1)
    return twice_u / (2 * n_pos * n_neg)
