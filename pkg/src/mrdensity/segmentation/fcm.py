"""Fuzzy c-means on scalar intensities.

Standard alternating updates for the objective sum_i sum_j u_ij^m (x_i - c_j)^2:

    u_ij = 1 / sum_k (|x_i - c_j| / |x_i - c_k|)^(2/(m-1))
    c_j  = sum_i u_ij^m x_i / sum_i u_ij^m
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mrdensity.errors import ComputationError, InputError

MAX_FIT_SAMPLES = 2**20


@dataclass(frozen=True)
class FcmModel:
    fuzziness_m: float = 2.0
    tol: float = 1e-5
    max_iter: int = 300
    centroids: tuple[float, ...] | None = None
    n_iter: int = 0
    converged: bool = False
    objective_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def fitted(self) -> bool:
        return self.centroids is not None

    @property
    def n_clusters(self) -> int:
        if self.centroids is None:
            raise InputError("FCM model is not fitted")
        return len(self.centroids)


def _weights(x: np.ndarray, centroids, m: float) -> tuple[list[np.ndarray], np.ndarray]:
    """Unnormalized inverse-distance weights d^(-2/(m-1)), one array per cluster.

    Samples whose total weight overflows (on, or extremely close to, a
    centroid) are recomputed from distance ratios ``d_min / d_j``; a sample
    exactly on a centroid gets all of its weight there.
    """
    cents = np.asarray(centroids, dtype=np.float64)
    ws = []
    with np.errstate(divide="ignore", over="ignore"):
        for cj in cents:
            d2 = x - cj
            d2 *= d2
            if m == 2.0:
                np.divide(1.0, d2, out=d2)
            else:
                np.power(d2, -1.0 / (m - 1.0), out=d2)
            ws.append(d2)
    total = ws[0].copy()
    for w in ws[1:]:
        total += w
    hit = np.isinf(total)
    if hit.any():
        xs = x[hit]
        dist = np.abs(xs[..., None] - cents)
        dmin = dist.min(axis=-1, keepdims=True)
        exact = dmin[..., 0] == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(exact[..., None], (dist == 0.0).astype(np.float64), (dmin / dist) ** (2.0 / (m - 1.0)))
        for j, w in enumerate(ws):
            w[hit] = rel[..., j]
        total[hit] = rel.sum(axis=-1)
    return ws, total


def memberships(x: np.ndarray, centroids: Sequence[float], m: float) -> np.ndarray:
    """Membership array of shape ``x.shape + (c,)``; each row sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    ws, total = _weights(x, centroids, m)
    return np.stack([w / total for w in ws], axis=-1)


def objective(x: np.ndarray, u: np.ndarray, centroids: np.ndarray, m: float) -> float:
    return float(np.sum((u**m) * (x[:, None] - centroids) ** 2))


def _subsample(x: np.ndarray, max_samples: int) -> np.ndarray:
    if x.size <= max_samples:
        return x
    stride = -(-x.size // max_samples)
    return x[::stride]


def _init_centroids(x: np.ndarray, c: int) -> np.ndarray:
    qs = (2 * np.arange(c) + 1) / (2 * c)
    init = np.quantile(x, qs)
    if np.unique(init).size < c:
        # heavy ties (e.g. a dominant background value) collapse quantiles
        init = np.quantile(np.unique(x), qs)
    return init


def fcm_fit(
    intensities,
    c: int = 3,
    m: float = 2.0,
    tol: float = 1e-5,
    max_iter: int = 300,
    max_samples: int = MAX_FIT_SAMPLES,
) -> FcmModel:
    """Fit ``c`` centroids to a flat intensity sample.

    Initialization is deterministic: centroids start at the evenly spaced
    quantiles (2j+1)/(2c) of the sample. Samples beyond ``max_samples`` are
    thinned with a uniform stride. Iteration stops when no centroid moves by
    ``tol`` or more, or after ``max_iter`` updates. Returned centroids are
    sorted ascending.
    """
    if c < 1:
        raise InputError(f"cluster count must be >= 1, got {c}")
    if not m > 1:
        raise InputError(f"fuzziness m must be > 1, got {m}")
    x = np.asarray(intensities, dtype=np.float64).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InputError("FCM intensities must be a non-empty sample of finite values")
    x = _subsample(x, max_samples)
    if np.unique(x).size < c:
        raise InputError(f"need at least {c} distinct intensity values to fit {c} clusters")

    centroids = _init_centroids(x, c)
    history: list[float] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        u = memberships(x, centroids, m)
        um = u**m
        weight = um.sum(axis=0)
        new = np.where(weight > 0, (um.T @ x) / np.where(weight > 0, weight, 1.0), centroids)
        history.append(objective(x, u, new, m))
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if not np.all(np.isfinite(centroids)):
            raise ComputationError("FCM diverged to non-finite centroids")
        if shift < tol:
            converged = True
            break

    return FcmModel(
        fuzziness_m=m,
        tol=tol,
        max_iter=max_iter,
        centroids=tuple(float(v) for v in np.sort(centroids)),
        n_iter=n_iter,
        converged=converged,
        objective_history=tuple(history),
    )


def fcm_predict_patch(model: FcmModel, patch, target_cluster: int | Sequence[int]) -> np.ndarray:
    """Membership of ``target_cluster`` for every voxel of ``patch``.

    A sequence of cluster indices returns the summed membership of those
    clusters (e.g. fat + dense for a whole-breast probability).
    """
    if not model.fitted:
        raise InputError("FCM model is not fitted")
    targets = [target_cluster] if np.isscalar(target_cluster) else list(target_cluster)
    c = model.n_clusters
    if not targets or any(not 0 <= int(t) < c for t in targets):
        raise InputError(f"target cluster(s) {targets} out of range for {c} clusters")
    voxels = np.asarray(getattr(patch, "voxels", patch), dtype=np.float64)
    ws, total = _weights(voxels, model.centroids, model.fuzziness_m)
    picked = sorted({int(t) for t in targets})
    num = ws[picked[0]]
    for t in picked[1:]:
        num += ws[t]
    num /= total
    return np.clip(num, 0.0, 1.0, out=num)
