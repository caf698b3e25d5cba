"""Density grids from summaries: 1D curves, 2D heatmaps, PCP panels,
time histograms, and the density-to-opacity tone mapping.

Every grid value is a plain mixture density: cluster contributions are
weighted by |C|/N and the cluster's degree of interest, so grids are linear
in both. 2D accumulation truncates each Gaussian at 3 Mahalanobis units
(about 1.1% of its mass in 2D), mirroring the quad footprints used for
splatting.

Grids can be computed from a :class:`mixvis.summary.Summary` directly or
from a view source that substitutes raw-sample KDE for brushed clusters
(see :func:`mixvis.interact.lod_substitute`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .summary import SubsetKey, Summary

__all__ = [
    "DensityGrid",
    "ToneMapParams",
    "tone_map",
    "density_1d",
    "density_2d",
    "pcp_density",
    "pcp_image",
    "time_histogram",
    "SummaryView",
    "LodView",
]

TRUNCATION_SIGMAS = 3.0


@dataclass(frozen=True)
class DensityGrid:
    """Raw (pre-tone-map) density samples over a regular 1D or 2D grid.

    1D: ``values[i]`` at ``extent[0] + i * (hi-lo)/(res-1)`` (endpoints
    included). 2D: ``values[row, col]`` at cell centers, row = second dim.
    """

    dims: tuple
    extent: tuple
    resolution: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise ValueError("density values must be finite and non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ToneMapParams:
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def tone_map(density, params: ToneMapParams):
    """Opacity in [0, 1) from density treated as optical depth: 1 - exp(-gamma * rho)."""
    rho = np.asarray(density, dtype=np.float64)
    if np.any(rho < 0.0):
        raise ValueError("density must be non-negative")
    out = -np.expm1(-params.gamma * rho)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# view sources


class SummaryView:
    """Evaluates per-cluster densities straight from the stored mixtures."""

    def __init__(self, summary: Summary):
        self.summary = summary

    @property
    def n_total(self) -> int:
        return self.summary.n_total

    @property
    def cluster_count(self) -> int:
        return self.summary.cluster_count

    @property
    def attributes(self):
        return self.summary.attributes

    def dim_extent(self, dim: int) -> tuple[float, float]:
        return self.summary.dim_extent(dim)

    def cluster_size(self, cid: int) -> int:
        return self.summary.clusters[cid].sample_count

    def _gmm(self, cid: int, dims: tuple):
        key = SubsetKey(dims)
        gmm = self.summary.clusters[cid].gmms.get(key)
        if gmm is None:
            raise KeyError(f"cluster {cid} stores no mixture for dims {dims}")
        return gmm

    def eval_1d(self, cid: int, dim: int, xs: np.ndarray, out: np.ndarray, amp: float):
        gmm = self._gmm(cid, (dim,))
        weights = np.ascontiguousarray(gmm.weights * amp)
        means = np.ascontiguousarray(gmm.means[:, 0])
        variances = np.ascontiguousarray([c.cov[0, 0] for c in gmm.components])
        kernels.eval_gmm1d(xs, weights, means, variances, out)

    def accum_2d(self, cid: int, dims: tuple, buf: np.ndarray, grid: tuple, amp: float):
        x0, dx, y0, dy = grid
        ny, nx = buf.shape
        gmm = self._gmm(cid, dims)
        k = gmm.k
        amps = np.empty(k)
        mxs = np.empty(k)
        mys = np.empty(k)
        ia = np.empty(k)
        ib = np.empty(k)
        ic = np.empty(k)
        ix0 = np.empty(k, dtype=np.int64)
        ix1 = np.empty(k, dtype=np.int64)
        iy0 = np.empty(k, dtype=np.int64)
        iy1 = np.empty(k, dtype=np.int64)
        for j, c in enumerate(gmm.components):
            amps[j] = amp * c.weight * math.exp(-0.5 * (c.log_det + 2.0 * math.log(2.0 * math.pi)))
            mxs[j], mys[j] = c.mean
            ia[j] = c.cov_inv[0, 0]
            ib[j] = c.cov_inv[0, 1]
            ic[j] = c.cov_inv[1, 1]
            hx = TRUNCATION_SIGMAS * math.sqrt(c.cov[0, 0])
            hy = TRUNCATION_SIGMAS * math.sqrt(c.cov[1, 1])
            ix0[j] = max(0, int(math.floor((mxs[j] - hx - x0) / dx - 0.5)))
            ix1[j] = min(nx, int(math.ceil((mxs[j] + hx - x0) / dx + 0.5)))
            iy0[j] = max(0, int(math.floor((mys[j] - hy - y0) / dy - 0.5)))
            iy1[j] = min(ny, int(math.ceil((mys[j] + hy - y0) / dy + 0.5)))
        kernels.accum_gauss2d(
            buf, x0, dx, y0, dy, amps, mxs, mys, ia, ib, ic, ix0, ix1, iy0, iy1,
            TRUNCATION_SIGMAS**2,
        )

    def pcp_cluster(self, cid: int, dims: tuple):
        """Normalized per-component params (means in [0,1] units) for a panel."""
        a, b = dims
        i, j = (a, b) if a < b else (b, a)
        gmm = self._gmm(cid, (i, j))
        la, lb = (0, 1) if a < b else (1, 0)
        lo_a, hi_a = self.dim_extent(a)
        lo_b, hi_b = self.dim_extent(b)
        da = hi_a - lo_a or 1.0
        db = hi_b - lo_b or 1.0
        k = gmm.k
        w = np.ascontiguousarray(gmm.weights)
        mi = np.empty(k)
        mj = np.empty(k)
        cii = np.empty(k)
        cij = np.empty(k)
        cjj = np.empty(k)
        for jj, c in enumerate(gmm.components):
            mi[jj] = (c.mean[la] - lo_a) / da
            mj[jj] = (c.mean[lb] - lo_b) / db
            cii[jj] = c.cov[la, la] / (da * da)
            cij[jj] = c.cov[la, lb] / (da * db)
            cjj[jj] = c.cov[lb, lb] / (db * db)
        return w, mi, mj, cii, cij, cjj


def _silverman_factor(n: int, d: int) -> float:
    return (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))


class LodView(SummaryView):
    """SummaryView with brushed clusters swapped for raw-sample KDE.

    Clusters whose degree of interest reaches ``threshold`` evaluate a
    Gaussian-kernel density over their raw samples (Silverman bandwidth per
    dimension) instead of the stored mixture.
    """

    def __init__(self, summary, dataset, clustering, doi, threshold, bandwidth_rule="silverman"):
        super().__init__(summary)
        if dataset is None or clustering is None:
            raise ValueError("LOD substitution needs the raw dataset and clustering")
        if clustering.n != dataset.n:
            raise ValueError("clustering does not match dataset")
        if bandwidth_rule != "silverman":
            raise ValueError(f"unknown bandwidth rule {bandwidth_rule!r}")
        doi = np.asarray(doi, dtype=np.float64)
        if doi.shape != (summary.cluster_count,):
            raise ValueError("doi length must equal the cluster count")
        self.dataset = dataset
        self.clustering = clustering
        self.substituted = frozenset(int(c) for c in np.nonzero(doi >= threshold)[0])

    def _cluster_samples(self, cid: int) -> np.ndarray:
        return self.dataset.data[self.clustering.index_sets[cid]]

    def _bandwidth(self, samples: np.ndarray, d_view: int) -> np.ndarray:
        std = samples.std(axis=0)
        std = np.where(std > 0.0, std, 1e-6 * np.maximum(np.abs(samples.mean(axis=0)), 1.0))
        return _silverman_factor(samples.shape[0], d_view) * std

    def eval_1d(self, cid, dim, xs, out, amp):
        if cid not in self.substituted:
            super().eval_1d(cid, dim, xs, out, amp)
            return
        col = np.ascontiguousarray(self._cluster_samples(cid)[:, dim])
        h = float(self._bandwidth(col[:, None], 1)[0])
        kernels.kde_accum_1d(out, xs, col, h, amp)

    def accum_2d(self, cid, dims, buf, grid, amp):
        if cid not in self.substituted:
            super().accum_2d(cid, dims, buf, grid, amp)
            return
        x0, dx, y0, dy = grid
        ny, nx = buf.shape
        pts = self._cluster_samples(cid)[:, list(dims)]
        hx, hy = self._bandwidth(pts, 2)
        kernels.kde_accum_2d(
            buf, x0, dx, nx, y0, dy, ny,
            np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
            float(hx), float(hy), amp, 6.0,
        )


def _as_view(source) -> SummaryView:
    if isinstance(source, SummaryView):
        return source
    if isinstance(source, Summary):
        return SummaryView(source)
    raise TypeError(f"cannot evaluate densities from {type(source).__name__}")


def _doi_or_ones(doi, count: int) -> np.ndarray:
    if doi is None:
        return np.ones(count)
    arr = np.asarray(doi, dtype=np.float64)
    if arr.shape != (count,):
        raise ValueError(f"doi must have one entry per cluster ({count}), got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# grid builders


def _density_1d_at(view: SummaryView, dim: int, xs: np.ndarray, doi) -> np.ndarray:
    weights = _doi_or_ones(doi, view.cluster_count)
    out = np.zeros_like(xs)
    for cid in range(view.cluster_count):
        amp = view.cluster_size(cid) / view.n_total * weights[cid]
        if amp > 0.0:
            view.eval_1d(cid, dim, xs, out, amp)
    return out


def density_1d(source, dim: int, extent=None, resolution: int = 512, doi=None) -> DensityGrid:
    """Cluster-weighted 1D density curve sampled at ``resolution`` points."""
    view = _as_view(source)
    if not 0 <= dim < sum(a.components for a in view.attributes):
        raise ValueError(f"dimension {dim} out of range")
    lo, hi = extent if extent is not None else view.dim_extent(dim)
    if not hi > lo:
        raise ValueError(f"invalid extent {(lo, hi)}")
    xs = np.linspace(lo, hi, resolution)
    values = _density_1d_at(view, dim, xs, doi)
    return DensityGrid((dim,), ((lo, hi),), (resolution,), values)


def density_2d(source, dims, extent=None, resolution=(200, 200), doi=None) -> DensityGrid:
    """Cluster-weighted 2D density heatmap over cell centers.

    Per-Gaussian contributions are truncated at 3 Mahalanobis units; the
    missing mass is exp(-4.5) per Gaussian.
    """
    view = _as_view(source)
    i, j = int(dims[0]), int(dims[1])
    m = sum(a.components for a in view.attributes)
    if not (0 <= i < j < m):
        raise ValueError(f"need dims i < j within 0..{m - 1}, got {dims}")
    if extent is None:
        extent = (view.dim_extent(i), view.dim_extent(j))
    (xlo, xhi), (ylo, yhi) = extent
    nx, ny = int(resolution[0]), int(resolution[1])
    if not (xhi > xlo and yhi > ylo and nx > 0 and ny > 0):
        raise ValueError("invalid extent or resolution")
    dx = (xhi - xlo) / nx
    dy = (yhi - ylo) / ny
    weights = _doi_or_ones(doi, view.cluster_count)
    buf = np.zeros((ny, nx))
    for cid in range(view.cluster_count):
        amp = view.cluster_size(cid) / view.n_total * weights[cid]
        if amp > 0.0:
            view.accum_2d(cid, (i, j), buf, (xlo, dx, ylo, dy), amp)
    return DensityGrid((i, j), ((xlo, xhi), (ylo, yhi)), (nx, ny), buf)


def pcp_density(gmm2, u: float, y):
    """Density of the axis interpolant (1-u) X_i + u X_j of a 2D mixture.

    Per component the interpolant is a 1D Gaussian with mean
    (1-u) mu_i + u mu_j and variance
    (1-u)^2 S_ii + 2 u (1-u) S_ij + u^2 S_jj.
    """
    if gmm2.d != 2:
        raise ValueError(f"pcp_density needs a 2D mixture, got d={gmm2.d}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter must be in [0, 1], got {u}")
    ys = np.asarray(y, dtype=np.float64)
    single = ys.ndim == 0
    ys = np.atleast_1d(ys).astype(np.float64)
    out = np.zeros_like(ys)
    a = 1.0 - u
    for c in gmm2.components:
        mean = a * c.mean[0] + u * c.mean[1]
        var = a * a * c.cov[0, 0] + 2.0 * u * a * c.cov[0, 1] + u * u * c.cov[1, 1]
        out += c.weight / math.sqrt(2.0 * math.pi * var) * np.exp(
            -0.5 * (ys - mean) ** 2 / var
        )
    return float(out[0]) if single else out


def pcp_image(source, axis_order, resolution=(800, 300), doi=None):
    """Density panels for each adjacent axis pair, plus the assembled image.

    Each axis is normalized to its data extent, so panel values are
    densities of the normalized interpolant: the u=0 column equals the
    axis's 1D density curve times the axis width. Rows run bottom-up
    (row 0 = extent low end).
    """
    axes = [int(a) for a in axis_order]
    if len(axes) < 2:
        raise ValueError("parallel coordinates need at least two axes")
    view = _as_view(source)
    weights = _doi_or_ones(doi, view.cluster_count)
    total_w, height = int(resolution[0]), int(resolution[1])
    npanels = len(axes) - 1
    base = total_w // npanels
    widths = [base + (1 if p < total_w % npanels else 0) for p in range(npanels)]
    if any(w < 2 for w in widths):
        raise ValueError("resolution too small for the number of panels")
    ys = np.linspace(0.0, 1.0, height)
    panels = []
    for p in range(npanels):
        a, b = axes[p], axes[p + 1]
        us = np.linspace(0.0, 1.0, widths[p])
        buf = np.zeros((height, widths[p]))
        for cid in range(view.cluster_count):
            amp = view.cluster_size(cid) / view.n_total * weights[cid]
            if amp <= 0.0:
                continue
            w, mi, mj, cii, cij, cjj = view.pcp_cluster(cid, (a, b))
            kernels.pcp_accum(buf, us, ys, w, mi, mj, cii, cij, cjj, amp)
        panels.append(
            DensityGrid((a, b), (view.dim_extent(a), view.dim_extent(b)), (widths[p], height), buf)
        )
    image = np.concatenate([p.values for p in panels], axis=1)
    return panels, image


def time_histogram(summaries, dim: int, bins: int, extent=None, doi_per_t=None) -> np.ndarray:
    """T x bins matrix: per-timestep 1D densities integrated per bin.

    Bin mass = density at the bin center times the bin width (midpoint
    rule), so rows of an in-range distribution sum to about one.
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("need at least one summary")
    schema = summaries[0].attributes
    for t, s in enumerate(summaries):
        if s.attributes != schema:
            raise ValueError(f"summary {t} does not share the attribute schema")
    if doi_per_t is not None and len(doi_per_t) != len(summaries):
        raise ValueError("doi_per_t must have one entry per timestep")
    if extent is None:
        lows, highs = zip(*(s.dim_extent(dim) for s in summaries))
        extent = (min(lows), max(highs))
    lo, hi = extent
    width = (hi - lo) / bins
    centers = lo + (np.arange(bins) + 0.5) * width
    out = np.empty((len(summaries), bins))
    for t, s in enumerate(summaries):
        doi = None if doi_per_t is None else doi_per_t[t]
        view = _as_view(s)
        out[t] = _density_1d_at(view, dim, centers, doi) * width
    return out
