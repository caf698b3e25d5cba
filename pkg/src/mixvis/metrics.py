"""Summary uncertainty metrics and outlier ranking.

The per-dimension error of a fitted mixture is the L1 distance between the
empirical CDF of the cluster samples and the mixture CDF (the order-1
Wasserstein distance). Outlyingness of a sample is its Mahalanobis distance
to the closest mixture component.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .gmm import Gmm

__all__ = [
    "EmpiricalCdf",
    "wasserstein_1d",
    "rank_outliers",
    "take_outliers",
]

# integration domain reaches this many sigmas beyond the model support,
# truncating less than 1e-14 of the mixture mass
_TAIL_SIGMAS = 8.0


class EmpiricalCdf:
    """Step CDF of a 1D sample set, evaluated by binary search."""

    __slots__ = ("values",)

    def __init__(self, samples):
        vals = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
        if vals.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        if not np.all(np.isfinite(vals)):
            raise ValueError("samples must be finite")
        vals.setflags(write=False)
        self.values = vals

    @property
    def n(self) -> int:
        return self.values.size

    def __call__(self, x):
        xs = np.asarray(x, dtype=np.float64)
        single = xs.ndim == 0
        counts = np.searchsorted(self.values, np.atleast_1d(xs), side="right")
        out = counts / self.n
        return float(out[0]) if single else out


def wasserstein_1d(ecdf: EmpiricalCdf, gmm: Gmm, base_nodes: int = 64) -> float:
    """L1 distance between the empirical and mixture CDFs.

    Integrates |F_data - F_gmm| over the union of the sample range and the
    mixture support (mu +- 8 sigma), exploiting the step structure of
    F_data: composite Simpson with at least ``base_nodes`` subintervals per
    step, scaled up on steps wider than the narrowest component.
    """
    if gmm.d != 1:
        raise ValueError(f"wasserstein_1d needs a 1D mixture, got d={gmm.d}")
    mus = gmm.means[:, 0]
    sigmas = np.sqrt(np.array([c.cov[0, 0] for c in gmm.components]))
    lo = min(float(ecdf.values[0]), float((mus - _TAIL_SIGMAS * sigmas).min()))
    hi = max(float(ecdf.values[-1]), float((mus + _TAIL_SIGMAS * sigmas).max()))
    return float(
        kernels.wasserstein_gmm_steps(
            ecdf.values,
            lo,
            hi,
            np.ascontiguousarray(gmm.weights),
            np.ascontiguousarray(mus),
            np.ascontiguousarray(sigmas),
            int(base_nodes),
            8192,
        )
    )


def outlier_scores(samples, gmm: Gmm) -> np.ndarray:
    """Mahalanobis distance of each sample to its closest component."""
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != gmm.d:
        raise ValueError(f"samples have dimension {x.shape[1]}, mixture has {gmm.d}")
    mus = np.ascontiguousarray(gmm.means)
    invs = np.ascontiguousarray(np.array([c.cov_inv for c in gmm.components]))
    out = np.empty(x.shape[0])
    kernels.min_mahalanobis2(x, mus, invs, out)
    return np.sqrt(out)


def rank_outliers(samples, gmm: Gmm) -> np.ndarray:
    """Sample indices sorted by descending outlyingness.

    Ties keep ascending sample order (stable sort on the negated score).
    """
    scores = outlier_scores(samples, gmm)
    return np.argsort(-scores, kind="stable")


def take_outliers(cluster, p: float, key=None) -> np.ndarray:
    """First ceil(p * |C|) entries of a cluster's stored outlier ranking.

    ``key`` selects among multiple rankings (one per 3D mixture); with one
    ranking stored it may be omitted.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {p}")
    if not cluster.outlier_order:
        raise ValueError(f"cluster {cluster.cluster_id} has no outlier ranking")
    if key is None:
        if len(cluster.outlier_order) != 1:
            raise ValueError("multiple outlier rankings stored, specify a key")
        order = next(iter(cluster.outlier_order.values()))
    else:
        order = cluster.outlier_order[key]
    count = math.ceil(p * cluster.sample_count)
    return order[:count]
