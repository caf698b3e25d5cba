"""Build, serialize, and inspect per-cluster mixture summaries.

A summary holds, for every cluster: a 1D mixture per linear dimension, a 2D
mixture per dimension pair, and a 3D mixture per position/vector attribute.
Pairs that fall inside a vector attribute are marginalized from the stored
3D mixture instead of being fitted separately. 1D fits run first so their
component counts can bound the higher-dimensional searches.

On disk a summary is a gzip JSON envelope (version + sha256 checksum); all
mixture parameters are stored as 32-bit floats. The builder quantizes its
results through the same code path the loader uses, so save/load round-trips
are exact.
"""

from __future__ import annotations

import gzip
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import AttributeSpec, Clustering, Dataset
from .fitting import FitConfig, component_bounds, derive_seed, select_components
from .gmm import GaussianComponent, Gmm
from .metrics import EmpiricalCdf, rank_outliers, wasserstein_1d

__all__ = [
    "SubsetKey",
    "ClusterSummary",
    "Summary",
    "SummaryStats",
    "SummaryError",
    "SummaryFormatError",
    "SummaryVersionError",
    "build_summary",
    "save_summary",
    "load_summary",
    "summary_stats",
]

FORMAT_VERSION = 1


class SummaryError(ValueError):
    pass


class SummaryFormatError(SummaryError):
    """Corrupt payload: bad gzip/JSON, failed checksum, missing fields."""


class SummaryVersionError(SummaryError):
    """File declares a format version this reader does not understand."""


@dataclass(frozen=True, order=True)
class SubsetKey:
    """Sorted tuple of 1-3 linear dimension indices."""

    dims: tuple

    def __init__(self, dims):
        tup = tuple(int(d) for d in dims)
        if not 1 <= len(tup) <= 3:
            raise ValueError(f"subset keys cover 1-3 dimensions, got {tup}")
        if any(b <= a for a, b in zip(tup, tup[1:])):
            raise ValueError(f"subset dims must be strictly increasing, got {tup}")
        if any(d < 0 for d in tup):
            raise ValueError(f"subset dims must be non-negative, got {tup}")
        object.__setattr__(self, "dims", tup)

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)


@dataclass(frozen=True)
class ClusterSummary:
    cluster_id: int
    sample_count: int
    gmms: dict
    wasserstein: dict
    centroid: np.ndarray
    outlier_order: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ClusterSummary):
            return NotImplemented
        return (
            self.cluster_id == other.cluster_id
            and self.sample_count == other.sample_count
            and self.gmms == other.gmms
            and self.wasserstein == other.wasserstein
            and np.array_equal(self.centroid, other.centroid)
            and self.outlier_order.keys() == other.outlier_order.keys()
            and all(
                np.array_equal(v, other.outlier_order[k]) for k, v in self.outlier_order.items()
            )
        )


@dataclass(frozen=True)
class Summary:
    attributes: tuple
    n_total: int
    clusters: tuple
    build_config: FitConfig
    provenance: str = ""

    @property
    def m(self) -> int:
        return sum(a.components for a in self.attributes)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    def vector_triples(self) -> list[tuple[int, ...]]:
        out = []
        off = 0
        for a in self.attributes:
            if a.kind in ("position", "vector"):
                out.append(tuple(range(off, off + 3)))
            off += a.components
        return out

    def position_dims(self) -> tuple[int, ...]:
        off = 0
        for a in self.attributes:
            if a.kind == "position":
                return tuple(range(off, off + 3))
            off += a.components
        raise SummaryError("summary has no position attribute")

    def dim_extent(self, dim: int, n_sigma: float = 3.0) -> tuple[float, float]:
        """Envelope of the per-cluster 1D mixtures: min/max of mu +- 3 sigma."""
        key = SubsetKey((dim,))
        lo = np.inf
        hi = -np.inf
        for cl in self.clusters:
            gmm = cl.gmms.get(key)
            if gmm is None:
                continue
            for c in gmm.components:
                s = float(np.sqrt(c.cov[0, 0]))
                lo = min(lo, float(c.mean[0]) - n_sigma * s)
                hi = max(hi, float(c.mean[0]) + n_sigma * s)
        if not np.isfinite(lo):
            raise SummaryError(f"no 1D mixtures stored for dimension {dim}")
        return lo, hi

    def weights_per_cluster(self) -> np.ndarray:
        counts = np.array([cl.sample_count for cl in self.clusters], dtype=np.float64)
        return counts / self.n_total


# ---------------------------------------------------------------------------
# float32 quantization (storage precision) with stable re-regularization


def _f32(arr) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64).astype(np.float32).astype(np.float64)


def _stable_cov32(cov: np.ndarray) -> np.ndarray:
    """f32-valued covariance that survives construction unchanged.

    Construction may nudge a quantized matrix back to positive definite;
    iterate quantize -> construct until the f32 image is a fixed point so
    save/load cannot drift.
    """
    q = _f32(cov)
    for _ in range(4):
        reg = GaussianComponent(1.0, np.zeros(q.shape[0]), q).cov
        q2 = _f32(reg)
        if np.array_equal(q2, q):
            return q
        q = q2
    return q


def _quantize_gmm(gmm: Gmm) -> Gmm:
    comps = []
    for c in gmm.components:
        w = float(_f32(c.weight))
        mean = _f32(c.mean)
        cov = _stable_cov32(c.cov)
        comps.append(GaussianComponent(w, mean, cov))
    return Gmm(comps)


# ---------------------------------------------------------------------------
# build


def _bounds_or_default(one_d_counts, dims, config) -> tuple[int, int]:
    if all(d in one_d_counts for d in dims):
        return component_bounds(one_d_counts, dims, config.max_components)
    return 1, config.max_components


def build_summary(
    dataset: Dataset,
    clustering: Clustering,
    config: FitConfig | None = None,
    subset_filter=None,
    with_outliers: bool = False,
    provenance: str = "",
) -> Summary:
    """Fit all per-cluster mixtures and assemble the summary.

    ``subset_filter`` is an optional predicate on SubsetKey; keys it rejects
    are skipped. Every fit draws its seed from (config.seed, cluster, dims),
    so the (cluster x key) tasks are order-independent and the result is a
    pure function of inputs.
    """
    config = config or FitConfig()
    if clustering.n != dataset.n:
        raise SummaryError(
            f"clustering covers {clustering.n} samples, dataset has {dataset.n}"
        )

    def want(key: SubsetKey) -> bool:
        return subset_filter is None or bool(subset_filter(key))

    m = dataset.m
    triples = dataset.vector_triples()
    pair_owner = {}
    for tri in triples:
        for a in range(3):
            for b in range(a + 1, 3):
                pair_owner[(tri[a], tri[b])] = tri
    pos_dims = dataset.position_dims()

    clusters = []
    for cid, idx in enumerate(clustering.index_sets):
        xc = dataset.data[idx]
        gmms: dict[SubsetKey, Gmm] = {}
        one_d_counts: dict[int, int] = {}
        wass: dict[int, float] = {}

        for dim in range(m):
            key = SubsetKey((dim,))
            if not want(key):
                continue
            res = select_components(
                xc[:, [dim]],
                (1, config.max_components),
                config,
                seed=derive_seed(config.seed, cid, dim),
            )
            g = _quantize_gmm(res.gmm)
            gmms[key] = g
            one_d_counts[dim] = g.k
            wass[dim] = float(_f32(wasserstein_1d(EmpiricalCdf(xc[:, dim]), g)))

        for tri in triples:
            key = SubsetKey(tri)
            if not want(key):
                continue
            res = select_components(
                xc[:, list(tri)],
                _bounds_or_default(one_d_counts, tri, config),
                config,
                seed=derive_seed(config.seed, cid, *tri),
            )
            gmms[key] = _quantize_gmm(res.gmm)

        for i in range(m):
            for j in range(i + 1, m):
                key = SubsetKey((i, j))
                if not want(key):
                    continue
                tri = pair_owner.get((i, j))
                if tri is not None and SubsetKey(tri) in gmms:
                    g3 = gmms[SubsetKey(tri)]
                    local = [tri.index(i), tri.index(j)]
                    gmms[key] = _quantize_gmm(g3.marginal(local))
                else:
                    res = select_components(
                        xc[:, [i, j]],
                        _bounds_or_default(one_d_counts, (i, j), config),
                        config,
                        seed=derive_seed(config.seed, cid, i, j),
                    )
                    gmms[key] = _quantize_gmm(res.gmm)

        pos_key = SubsetKey(pos_dims)
        if pos_key in gmms:
            centroid = _f32(gmms[pos_key].mixture_mean())
        else:
            centroid = _f32(xc[:, list(pos_dims)].mean(axis=0))

        outlier_order: dict[SubsetKey, np.ndarray] = {}
        if with_outliers:
            for tri in triples:
                key = SubsetKey(tri)
                if key in gmms:
                    order = rank_outliers(xc[:, list(tri)], gmms[key])
                    outlier_order[key] = idx[order]

        clusters.append(
            ClusterSummary(
                cluster_id=cid,
                sample_count=int(idx.size),
                gmms=gmms,
                wasserstein=wass,
                centroid=centroid,
                outlier_order=outlier_order,
            )
        )

    return Summary(
        attributes=tuple(dataset.attributes),
        n_total=dataset.n,
        clusters=tuple(clusters),
        build_config=config,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# serialization


def _attr_for_triple(attributes, dims: tuple) -> str | None:
    off = 0
    for a in attributes:
        if a.components == 3 and dims == tuple(range(off, off + 3)):
            return a.name
        off += a.components
    return None


def _triple_for_attr(attributes, name: str) -> tuple:
    off = 0
    for a in attributes:
        if a.name == name:
            return tuple(range(off, off + a.components))
        off += a.components
    raise SummaryFormatError(f"unknown attribute {name!r} in mixture key")


def _key_to_str(key: SubsetKey, attributes) -> str:
    if len(key) == 3:
        name = _attr_for_triple(attributes, key.dims)
        if name is not None:
            return name
    return "|".join(str(d) for d in key.dims)


def _key_from_str(text: str, attributes) -> SubsetKey:
    if "|" in text or text.isdigit():
        return SubsetKey(int(p) for p in text.split("|"))
    return SubsetKey(_triple_for_attr(attributes, text))


def _gmm_payload(gmm: Gmm) -> dict:
    d = gmm.d
    tril = [(i, j) for i in range(d) for j in range(i + 1)]
    return {
        "weights": [float(w) for w in _f32(gmm.raw_weights)],
        "means": [[float(v) for v in _f32(c.mean)] for c in gmm.components],
        "cov_lower": [
            [float(_f32(c.cov[i, j])) for i, j in tril] for c in gmm.components
        ],
    }


def _gmm_from_payload(entry: dict, d: int) -> Gmm:
    weights = entry["weights"]
    comps = []
    for w, mean, packed in zip(weights, entry["means"], entry["cov_lower"]):
        cov = np.zeros((d, d))
        it = iter(packed)
        for i in range(d):
            for j in range(i + 1):
                cov[i, j] = cov[j, i] = next(it)
        comps.append(GaussianComponent(float(w), np.asarray(mean, dtype=np.float64), cov))
    return Gmm(comps)


def _summary_payload(summary: Summary) -> dict:
    clusters = []
    for cl in summary.clusters:
        entry = {
            "id": cl.cluster_id,
            "count": cl.sample_count,
            "centroid": [float(v) for v in _f32(cl.centroid)],
            "wasserstein": {str(dim): float(_f32(w)) for dim, w in sorted(cl.wasserstein.items())},
            "gmms": {
                _key_to_str(key, summary.attributes): _gmm_payload(g)
                for key, g in sorted(cl.gmms.items())
            },
        }
        if cl.outlier_order:
            entry["outliers"] = {
                _key_to_str(key, summary.attributes): [int(i) for i in order]
                for key, order in sorted(cl.outlier_order.items())
            }
        clusters.append(entry)
    cfg = summary.build_config
    return {
        "attributes": [
            {"name": a.name, "kind": a.kind, "components": a.components}
            for a in summary.attributes
        ],
        "n_total": summary.n_total,
        "config": {
            "max_components": cfg.max_components,
            "subsample_size": cfg.subsample_size,
            "em_max_iters": cfg.em_max_iters,
            "em_tol": cfg.em_tol,
            "tiny_cluster_threshold": cfg.tiny_cluster_threshold,
            "restarts": cfg.restarts,
            "seed": cfg.seed,
            "weight_penalty": cfg.weight_penalty,
        },
        "provenance": summary.provenance,
        "clusters": clusters,
    }


def serialize_summary(summary: Summary) -> bytes:
    payload = _summary_payload(summary)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(canonical.encode()).hexdigest()
    doc = json.dumps(
        {"version": FORMAT_VERSION, "checksum": checksum, "payload": payload},
        sort_keys=True,
        separators=(",", ":"),
    )
    return gzip.compress(doc.encode(), mtime=0)


def save_summary(summary: Summary, path) -> Path:
    out = Path(path)
    out.write_bytes(serialize_summary(summary))
    return out


def _summary_from_payload(payload: dict) -> Summary:
    attrs = tuple(
        AttributeSpec(e["name"], e["kind"], int(e["components"]))
        for e in payload["attributes"]
    )
    cfg = FitConfig(**payload["config"])
    clusters = []
    for entry in payload["clusters"]:
        gmms = {}
        for key_str, g_entry in entry["gmms"].items():
            key = _key_from_str(key_str, attrs)
            gmms[key] = _gmm_from_payload(g_entry, len(key))
        wass = {int(dim): float(w) for dim, w in entry.get("wasserstein", {}).items()}
        outliers = {
            _key_from_str(k, attrs): np.asarray(v, dtype=np.int64)
            for k, v in entry.get("outliers", {}).items()
        }
        clusters.append(
            ClusterSummary(
                cluster_id=int(entry["id"]),
                sample_count=int(entry["count"]),
                gmms=gmms,
                wasserstein=wass,
                centroid=np.asarray(entry["centroid"], dtype=np.float64),
                outlier_order=outliers,
            )
        )
    return Summary(
        attributes=attrs,
        n_total=int(payload["n_total"]),
        clusters=tuple(clusters),
        build_config=cfg,
        provenance=str(payload.get("provenance", "")),
    )


def deserialize_summary(blob: bytes) -> Summary:
    try:
        doc = json.loads(gzip.decompress(blob).decode())
    except (OSError, EOFError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SummaryFormatError(f"corrupt summary payload: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise SummaryFormatError("missing format version")
    if doc["version"] != FORMAT_VERSION:
        raise SummaryVersionError(
            f"summary format version {doc['version']} unsupported (expected {FORMAT_VERSION})"
        )
    payload = doc.get("payload")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(canonical.encode()).hexdigest()
    if checksum != doc.get("checksum"):
        raise SummaryFormatError("checksum mismatch")
    try:
        return _summary_from_payload(payload)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SummaryError):
            raise
        raise SummaryFormatError(f"malformed summary payload: {exc}") from exc


def load_summary(path) -> Summary:
    fpath = Path(path)
    if not fpath.is_file():
        raise SummaryFormatError(f"summary file missing: {fpath}")
    return deserialize_summary(fpath.read_bytes())


# ---------------------------------------------------------------------------
# stats


@dataclass(frozen=True)
class SummaryStats:
    cluster_count: int
    n_total: int
    gmm_count: int
    component_mean: float
    component_std: float
    wasserstein_mean: float
    byte_size: int

    def __str__(self):
        return (
            f"clusters {self.cluster_count} | samples {self.n_total} | "
            f"GMMs {self.gmm_count} | GMM comp. {self.component_mean:.2f} "
            f"± {self.component_std:.2f} | Wasserstein dist. "
            f"{self.wasserstein_mean:.3e} | size {self.byte_size / 1e6:.2f} MB"
        )


def summary_stats(summary: Summary) -> SummaryStats:
    """Component-count mean/std (population), mean 1D Wasserstein, file size."""
    ks = [g.k for cl in summary.clusters for g in cl.gmms.values()]
    ws = [w for cl in summary.clusters for w in cl.wasserstein.values()]
    return SummaryStats(
        cluster_count=summary.cluster_count,
        n_total=summary.n_total,
        gmm_count=len(ks),
        component_mean=float(np.mean(ks)) if ks else 0.0,
        component_std=float(np.std(ks)) if ks else 0.0,
        wasserstein_mean=float(np.mean(ws)) if ws else 0.0,
        byte_size=len(serialize_summary(summary)),
    )
