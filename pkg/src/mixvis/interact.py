"""Brushing to degrees of interest, DOI propagation over time, and LOD.

A brush on one dimension gives every cluster a degree of interest in
[0, 1]: the mass its 1D mixture places inside the brushed range. When the
clustering changes between timesteps, interest is carried along a sparse
row-stochastic transfer matrix whose entries are the fraction of each new
cluster's samples coming from each old cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .dataset import Clustering, Dataset
from .density import LodView
from .summary import SubsetKey, Summary

__all__ = [
    "Brush",
    "brush_doi",
    "combine_doi",
    "TransferMatrix",
    "build_transfer_matrix",
    "advance_doi",
    "save_transfer_matrices",
    "load_transfer_matrices",
    "lod_substitute",
]


@dataclass(frozen=True)
class Brush:
    """Closed value range [lo, hi] on one linear dimension."""

    dim: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError(f"brush dimension must be non-negative, got {self.dim}")
        if not self.lo <= self.hi:
            raise ValueError(f"brush range must satisfy lo <= hi, got [{self.lo}, {self.hi}]")


def brush_doi(summary: Summary, brush: Brush) -> np.ndarray:
    """Per-cluster interest: mixture mass inside the brushed range.

    The mixtures are normalized, so this is the CDF difference
    F(hi) - F(lo) -- the ratio of the brushed integrand to the total area.
    """
    key = SubsetKey((brush.dim,))
    out = np.empty(summary.cluster_count)
    for i, cl in enumerate(summary.clusters):
        gmm = cl.gmms.get(key)
        if gmm is None:
            raise KeyError(f"cluster {cl.cluster_id} stores no 1D mixture for dim {brush.dim}")
        out[i] = gmm.cdf(brush.hi) - gmm.cdf(brush.lo)
    return np.clip(out, 0.0, 1.0)


def combine_doi(dois, mode: str) -> np.ndarray:
    """Fuzzy combination of DOI vectors: "and" = min, "or" = max."""
    arrs = [np.asarray(d, dtype=np.float64) for d in dois]
    if not arrs:
        raise ValueError("need at least one DOI vector")
    n = arrs[0].shape
    if any(a.shape != n for a in arrs):
        raise ValueError("DOI vectors must share a length")
    stack = np.stack(arrs)
    if mode == "and":
        return stack.min(axis=0)
    if mode == "or":
        return stack.max(axis=0)
    raise ValueError(f"unknown combination mode {mode!r}")


class TransferMatrix:
    """Sparse (clusters at t+1) x (clusters at t) DOI propagation matrix."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        self.matrix = sparse.csr_matrix(matrix)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).reshape(-1)

    def to_triples(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        triples = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
        return [(int(r), int(c), float(v)) for r, c, v in triples]

    @classmethod
    def from_triples(cls, shape, triples) -> "TransferMatrix":
        rows = [t[0] for t in triples]
        cols = [t[1] for t in triples]
        vals = [t[2] for t in triples]
        return cls(sparse.coo_matrix((vals, (rows, cols)), shape=tuple(shape)).tocsr())


def _labels_of(c) -> np.ndarray:
    if isinstance(c, Clustering):
        return c.labels
    return np.asarray(c, dtype=np.int64)


def build_transfer_matrix(cl_t, cl_next) -> TransferMatrix:
    """Count label co-occurrences in one pass and normalize per new cluster.

    Entry (j, l) = |C_l^t intersect C_j^{t+1}| / |C_j^{t+1}|. Samples with a
    negative label at frame t (born later) contribute no mass, leaving that
    row summing below one: new matter starts out of focus.
    """
    lab_t = _labels_of(cl_t)
    lab_n = _labels_of(cl_next)
    if lab_t.shape != lab_n.shape:
        raise ValueError(
            f"clusterings cover different sample universes: {lab_t.shape} vs {lab_n.shape}"
        )
    k_t = int(lab_t.max()) + 1
    k_n = int(lab_n.max()) + 1
    valid = (lab_t >= 0) & (lab_n >= 0)
    counts = sparse.coo_matrix(
        (np.ones(int(valid.sum())), (lab_n[valid], lab_t[valid])), shape=(k_n, k_t)
    ).tocsr()
    sizes = np.bincount(lab_n[lab_n >= 0], minlength=k_n).astype(np.float64)
    sizes[sizes == 0.0] = 1.0
    scale = sparse.diags(1.0 / sizes)
    return TransferMatrix(scale @ counts)


def advance_doi(m: TransferMatrix, doi) -> np.ndarray:
    """doi' = M doi; stays in [0, 1] because rows sum to at most one."""
    vec = np.asarray(doi, dtype=np.float64)
    if vec.shape != (m.shape[1],):
        raise ValueError(f"DOI length {vec.shape} does not match matrix columns {m.shape[1]}")
    return np.clip(m.matrix @ vec, 0.0, 1.0)


def save_transfer_matrices(path, matrices) -> Path:
    """Serialize matrices as (row, col, value) triple lists, one per step."""
    doc = {
        "version": 1,
        "matrices": [
            {"shape": list(m.shape), "triples": [[r, c, v] for r, c, v in m.to_triples()]}
            for m in matrices
        ],
    }
    out = Path(path)
    out.write_text(json.dumps(doc))
    return out


def load_transfer_matrices(path) -> list[TransferMatrix]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ValueError(f"unsupported transfer matrix file version {doc.get('version')}")
    return [TransferMatrix.from_triples(m["shape"], m["triples"]) for m in doc["matrices"]]


def lod_substitute(
    summary: Summary,
    doi,
    threshold: float,
    dataset: Dataset,
    clustering: Clustering,
    bandwidth_rule: str = "silverman",
) -> LodView:
    """View source where clusters with doi >= threshold use raw-sample KDE.

    The returned view plugs into density_1d / density_2d in place of the
    summary. threshold > 1 substitutes nothing; threshold <= 0 substitutes
    every cluster.
    """
    return LodView(summary, dataset, clustering, doi, threshold, bandwidth_rule)
