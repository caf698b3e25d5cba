"""Columnar scattered datasets: loading, validation, clustering, generation.

File format (documented in ``docs/formats.md``): a JSON manifest declaring
the sample count and attribute schema, plus one little-endian float32 binary
file per attribute component. Cluster labels are little-endian uint32.
Datasets and clusterings are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "AttributeSpec",
    "Dataset",
    "Clustering",
    "TimeSeries",
    "load_dataset",
    "save_dataset",
    "load_clustering",
    "save_clustering",
    "kmeans_cluster",
    "generate_synthetic",
    "SYNTHETIC_N",
    "SYNTHETIC_CLUSTERS",
]

SYNTHETIC_N = 100_000
SYNTHETIC_CLUSTERS = 10

_KINDS = {"position": 3, "vector": 3, "scalar": 1}


class DatasetError(ValueError):
    """Malformed manifest, column file, or label file."""


@dataclass(frozen=True)
class AttributeSpec:
    """One named attribute: a 3D position, a 3D vector, or a scalar."""

    name: str
    kind: str
    components: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DatasetError(f"unknown attribute kind {self.kind!r}")
        if self.components != _KINDS[self.kind]:
            raise DatasetError(
                f"attribute {self.name!r} of kind {self.kind!r} must have "
                f"{_KINDS[self.kind]} components, got {self.components}"
            )


class Dataset:
    """N samples over a list of attributes, concatenated to m linear dims.

    ``data`` is the (n, m) float64 matrix of all attribute components in
    declaration order; ``dim_names`` labels each linear dimension.
    """

    __slots__ = ("n", "attributes", "data", "dim_names")

    def __init__(self, attributes, data):
        attrs = tuple(attributes)
        if sum(1 for a in attrs if a.kind == "position") != 1:
            raise DatasetError("dataset must declare exactly one position attribute")
        mat = np.ascontiguousarray(data, dtype=np.float64)
        m = sum(a.components for a in attrs)
        if mat.ndim != 2 or mat.shape[1] != m:
            raise DatasetError(f"data must be (n, {m}), got {mat.shape}")
        if m < 3:
            raise DatasetError("total linear dimension must be at least 3")
        if not np.all(np.isfinite(mat)):
            bad = np.argwhere(~np.isfinite(mat))[0]
            name, comp = _dim_owner(attrs, int(bad[1]))
            raise DatasetError(
                f"non-finite value in attribute {name!r} component {comp} row {int(bad[0])}"
            )
        mat.setflags(write=False)
        self.n = mat.shape[0]
        self.attributes = attrs
        self.data = mat
        self.dim_names = tuple(_dim_names(attrs))

    @property
    def m(self) -> int:
        return self.data.shape[1]

    def attribute_dims(self, name: str) -> tuple[int, ...]:
        """Linear dimension indices covered by the named attribute."""
        off = 0
        for a in self.attributes:
            if a.name == name:
                return tuple(range(off, off + a.components))
            off += a.components
        raise KeyError(name)

    def vector_triples(self) -> list[tuple[int, ...]]:
        """Dim triples of the position and every vector attribute."""
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
        raise DatasetError("no position attribute")  # unreachable by invariant

    def column(self, dim: int) -> np.ndarray:
        return self.data[:, dim]


def _dim_owner(attrs, dim: int) -> tuple[str, int]:
    off = 0
    for a in attrs:
        if dim < off + a.components:
            return a.name, dim - off
        off += a.components
    raise IndexError(dim)


def _dim_names(attrs):
    for a in attrs:
        if a.components == 1:
            yield a.name
        else:
            for suffix in ("x", "y", "z")[: a.components]:
                yield f"{a.name}.{suffix}"


class Clustering:
    """Dense cluster labels over the samples of one dataset."""

    __slots__ = ("labels", "cluster_count", "_index_sets")

    def __init__(self, labels):
        lab = np.asarray(labels)
        if lab.ndim != 1:
            raise DatasetError(f"labels must be one-dimensional, got shape {lab.shape}")
        if lab.size == 0:
            raise DatasetError("labels must not be empty")
        if np.any(lab < 0):
            raise DatasetError("negative cluster label")
        lab = lab.astype(np.int64)
        # compact: renumber ids densely in order of first appearance value
        uniq = np.unique(lab)
        remap = np.zeros(int(uniq.max()) + 1, dtype=np.int64)
        remap[uniq] = np.arange(uniq.size)
        lab = remap[lab]
        lab.setflags(write=False)
        self.labels = lab
        self.cluster_count = int(uniq.size)
        self._index_sets = None

    @property
    def index_sets(self) -> list[np.ndarray]:
        if self._index_sets is None:
            order = np.argsort(self.labels, kind="stable")
            bounds = np.searchsorted(self.labels[order], np.arange(self.cluster_count + 1))
            sets = [order[bounds[i] : bounds[i + 1]] for i in range(self.cluster_count)]
            for s in sets:
                s.setflags(write=False)
            self._index_sets = sets
        return self._index_sets

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.cluster_count)


@dataclass(frozen=True)
class TimeSeries:
    """Ordered (Dataset, Clustering) frames sharing one attribute schema."""

    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise DatasetError("time series needs at least one frame")
        schema = frames[0][0].attributes
        for t, (ds, cl) in enumerate(frames):
            if ds.attributes != schema:
                raise DatasetError(f"frame {t} does not share the attribute schema")
            if cl.n != ds.n:
                raise DatasetError(f"frame {t} clustering does not match its dataset")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)


# ---------------------------------------------------------------------------
# manifest + binary column I/O


def load_dataset(manifest_path) -> Dataset:
    """Load a dataset from a JSON manifest plus float32 column files."""
    path = Path(manifest_path)
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest is not valid JSON: {exc}") from exc
    try:
        n = int(manifest["n"])
        declared = manifest["attributes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"manifest missing required fields: {exc}") from exc

    attrs = []
    columns = []
    for entry in declared:
        spec = AttributeSpec(str(entry["name"]), str(entry["kind"]), int(entry["components"]))
        files = entry["files"]
        if len(files) != spec.components:
            raise DatasetError(
                f"attribute {spec.name!r} declares {spec.components} components "
                f"but {len(files)} files"
            )
        attrs.append(spec)
        for comp, fname in enumerate(files):
            fpath = path.parent / fname
            if not fpath.is_file():
                raise DatasetError(f"column file missing: {fpath}")
            raw = np.fromfile(fpath, dtype="<f4")
            if raw.size != n:
                raise DatasetError(
                    f"column {fname!r} of attribute {spec.name!r} has {raw.size} "
                    f"values, expected n={n}"
                )
            col = raw.astype(np.float64)
            if not np.all(np.isfinite(col)):
                row = int(np.argwhere(~np.isfinite(col))[0][0])
                raise DatasetError(
                    f"non-finite value in attribute {spec.name!r} component {comp} row {row}"
                )
            columns.append(col)
    data = np.column_stack(columns) if columns else np.empty((n, 0))
    return Dataset(attrs, data)


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write manifest + column files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    off = 0
    for a in dataset.attributes:
        files = []
        for comp in range(a.components):
            fname = f"{a.name}_{comp}.f32" if a.components > 1 else f"{a.name}.f32"
            dataset.data[:, off + comp].astype("<f4").tofile(out / fname)
            files.append(fname)
        off += a.components
        entries.append(
            {"name": a.name, "kind": a.kind, "components": a.components, "files": files}
        )
    manifest = {"n": dataset.n, "attributes": entries}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_clustering(path, dataset: Dataset) -> Clustering:
    """Load little-endian uint32 labels and compact them."""
    fpath = Path(path)
    if not fpath.is_file():
        raise DatasetError(f"label file missing: {fpath}")
    raw = np.fromfile(fpath, dtype="<u4")
    if raw.size != dataset.n:
        raise DatasetError(f"label file has {raw.size} entries, expected n={dataset.n}")
    return Clustering(raw)


def save_clustering(clustering: Clustering, path) -> Path:
    fpath = Path(path)
    clustering.labels.astype("<u4").tofile(fpath)
    return fpath


# ---------------------------------------------------------------------------
# k-means (Lloyd's algorithm, k-means++ seeding, deterministic per seed)


def _kmeanspp_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # ||x - c||^2 over components; chunked to bound memory
    n = x.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    c2 = (centers**2).sum(axis=1)
    for start in range(0, n, 65536):
        sl = slice(start, min(start + 65536, n))
        d = (x[sl] ** 2).sum(axis=1)[:, None] - 2.0 * x[sl] @ centers.T + c2[None, :]
        labels[sl] = np.argmin(d, axis=1)
        dist[sl] = d[np.arange(d.shape[0]), labels[sl]]
    return labels, np.maximum(dist, 0.0)


def _kmeans_run(x: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations; returns labels and the per-iteration objective."""
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_seeds(x, k, rng)
    labels, dist = _assign(x, centers)
    objectives = [float(dist.sum())]
    for _ in range(100):
        counts = np.bincount(labels, minlength=k)
        for j in np.nonzero(counts == 0)[0]:
            far = int(np.argmax(dist))
            centers[j] = x[far]
            labels[far] = j
            dist[far] = 0.0
            counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        centers = sums / np.bincount(labels, minlength=k)[:, None]
        new_labels, dist = _assign(x, centers)
        objectives.append(float(dist.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, objectives


def kmeans_cluster(dataset: Dataset, k: int, feature_dims=None, seed: int = 0) -> Clustering:
    """Lloyd's k-means over selected linear dimensions.

    Deterministic for a fixed seed; converges when no label changes or after
    100 iterations. Empty clusters are reseeded at the point farthest from
    its assigned center.
    """
    if feature_dims is None:
        feature_dims = list(dataset.position_dims())
    feature_dims = list(feature_dims)
    if any(d < 0 or d >= dataset.m for d in feature_dims):
        raise DatasetError(f"feature dims {feature_dims} out of range for m={dataset.m}")
    if not 1 <= k <= dataset.n:
        raise DatasetError(f"k={k} must be in [1, n={dataset.n}]")
    x = np.ascontiguousarray(dataset.data[:, feature_dims])
    labels, _ = _kmeans_run(x, k, seed)
    return Clustering(labels)


# ---------------------------------------------------------------------------
# synthetic benchmark dataset: 10 clusters x 10,000 points, 9 dimensions


def generate_synthetic(seed: int) -> tuple[Dataset, Clustering]:
    """100,000 points in 10 clusters over 9 dims (3 position + 6 scalars).

    Spatial dims are per-cluster Gaussian with exactly 10% of each cluster
    replaced by uniform box noise. The six scalars exercise fitting from
    easy to hard: Gaussian, uniform, shifted exponential, bimodal pair,
    linear function of the Gaussian dim plus noise, and constant-plus-jitter.
    Pure function of the seed.
    """
    rng = np.random.default_rng(seed)
    per = SYNTHETIC_N // SYNTHETIC_CLUSTERS
    n_noise = per // 10
    n_core = per - n_noise

    blocks = []
    for _ in range(SYNTHETIC_CLUSTERS):
        center = rng.uniform(0.0, 10.0, size=3)
        sigma = rng.uniform(0.3, 0.8, size=3)
        core = center + sigma * rng.standard_normal((n_core, 3))
        noise = rng.uniform(center - 2.5, center + 2.5, size=(n_noise, 3))
        pos = np.vstack([core, noise])

        g_mu = rng.uniform(-2.0, 2.0)
        g_sd = rng.uniform(0.3, 1.0)
        gauss = g_mu + g_sd * rng.standard_normal(per)

        u_lo = rng.uniform(-2.0, 0.0)
        u_w = rng.uniform(1.0, 2.0)
        uniform = rng.uniform(u_lo, u_lo + u_w, size=per)

        e_scale = rng.uniform(1.2, 2.0)
        e_off = rng.uniform(-1.0, 1.0)
        expo = e_off + rng.exponential(e_scale, size=per)

        b_mid = rng.uniform(-1.0, 1.0)
        b_gap = rng.uniform(1.5, 2.5)
        b_sd = rng.uniform(0.2, 0.4)
        side = rng.random(per) < 0.5
        bimodal = b_mid + np.where(side, b_gap, -b_gap) + b_sd * rng.standard_normal(per)

        c_a = rng.uniform(0.5, 1.5)
        c_b = rng.uniform(-1.0, 1.0)
        corr = c_a * gauss + c_b + rng.uniform(0.1, 0.3) * rng.standard_normal(per)

        k_val = rng.uniform(-1.0, 1.0)
        const = k_val + 1e-3 * rng.standard_normal(per)

        blocks.append(np.column_stack([pos, gauss, uniform, expo, bimodal, corr, const]))

    data = np.vstack(blocks)
    labels = np.repeat(np.arange(SYNTHETIC_CLUSTERS), per)
    attrs = [
        AttributeSpec("position", "position", 3),
        AttributeSpec("gauss", "scalar", 1),
        AttributeSpec("uniform", "scalar", 1),
        AttributeSpec("expo", "scalar", 1),
        AttributeSpec("bimodal", "scalar", 1),
        AttributeSpec("corr", "scalar", 1),
        AttributeSpec("const", "scalar", 1),
    ]
    return Dataset(attrs, data), Clustering(labels)
