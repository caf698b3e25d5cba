import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixvis import (
    GaussianComponent,
    Gmm,
    SubsetKey,
    ToneMapParams,
    density_1d,
    density_2d,
    pcp_density,
    pcp_image,
    time_histogram,
    tone_map,
)

from conftest import manual_summary, random_gmm


def summary_with_1d(gmms_1d, counts, dim=3):
    """Manual summary holding 1D mixtures under linear dim 3."""
    rng = np.random.default_rng(99)
    pos = [random_gmm(rng, 3, 1) for _ in gmms_1d]
    extra = [{SubsetKey((dim,)): g} for g in gmms_1d]
    return manual_summary(pos, color_gmms=gmms_1d, counts=counts)


class TestToneMap:
    def test_zero(self):
        assert tone_map(0.0, ToneMapParams(2.0)) == 0.0

    def test_half(self):
        gamma = 1.7
        assert tone_map(math.log(2.0) / gamma, ToneMapParams(gamma)) == pytest.approx(0.5)

    def test_compositing_identity(self):
        rng = np.random.default_rng(0)
        params = ToneMapParams(0.9)
        for rho in rng.uniform(0.0, 5.0, 50):
            for k in (2, 3, 7):
                a = tone_map(rho, params)
                repeated = 1.0 - (1.0 - a) ** k
                assert repeated == pytest.approx(tone_map(k * rho, params), abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            tone_map(-0.1, ToneMapParams(1.0))

    def test_gamma_validated(self):
        with pytest.raises(ValueError):
            ToneMapParams(0.0)

    @settings(max_examples=60, deadline=None)
    @given(rho=st.floats(0.0, 1e6), drho=st.floats(0.0, 1e6))
    def test_monotone_bounded(self, rho, drho):
        params = ToneMapParams(0.37)
        a = tone_map(rho, params)
        assert 0.0 <= a <= 1.0
        if params.gamma * rho < 36.0:  # below float64 saturation of 1-exp(-x)
            assert a < 1.0
        assert tone_map(rho + drho, params) >= a


class TestDensity1d:
    def test_single_cluster_standard_normal(self):
        gmm = Gmm([GaussianComponent(1.0, [0.0], [[1.0]])])
        summary = summary_with_1d([gmm], counts=[100])
        grid = density_1d(summary, 3, extent=(-1.0, 1.0), resolution=3)
        assert grid.values[1] == pytest.approx(0.3989423, abs=1e-6)

    def test_zero_doi_zeroes_grid(self):
        gmm = Gmm([GaussianComponent(1.0, [0.0], [[1.0]])])
        summary = summary_with_1d([gmm], counts=[100])
        grid = density_1d(summary, 3, extent=(-2, 2), resolution=32, doi=np.zeros(1))
        assert np.all(grid.values == 0.0)

    def test_cluster_weighting_integrates_to_fractions(self):
        g1 = Gmm([GaussianComponent(1.0, [-10.0], [[0.5]])])
        g2 = Gmm([GaussianComponent(1.0, [10.0], [[0.5]])])
        summary = summary_with_1d([g1, g2], counts=[750, 250])
        grid = density_1d(summary, 3, extent=(-16, 16), resolution=3201)
        xs = np.linspace(-16, 16, 3201)
        left = np.trapezoid(np.where(xs < 0, grid.values, 0.0), xs)
        right = np.trapezoid(np.where(xs >= 0, grid.values, 0.0), xs)
        assert left == pytest.approx(0.75, abs=0.002)
        assert right == pytest.approx(0.25, abs=0.002)

    def test_doi_linearity(self):
        rng = np.random.default_rng(1)
        gmms = [random_gmm(rng, 1, 2) for _ in range(2)]
        summary = summary_with_1d(gmms, counts=[60, 40])
        base = density_1d(summary, 3, extent=(-8, 8), resolution=64, doi=np.array([1.0, 0.0]))
        doubled = density_1d(summary, 3, extent=(-8, 8), resolution=64, doi=np.array([2.0, 0.0]))
        assert np.allclose(doubled.values, 2.0 * base.values, rtol=1e-12)

    def test_invalid_dim(self):
        summary = summary_with_1d([Gmm([GaussianComponent(1.0, [0.0], [[1.0]])])], [10])
        with pytest.raises(ValueError):
            density_1d(summary, 99)


class TestDensity2d:
    def _one_cluster_summary(self, cov, mean=(0.0, 0.0)):
        rng = np.random.default_rng(2)
        pos = [random_gmm(rng, 3, 1)]
        g2 = Gmm([GaussianComponent(1.0, list(mean), cov)])
        extra = [{SubsetKey((3, 4)): g2}]
        summary = manual_summary(pos, counts=[100], extra=extra)
        # widen the attribute table so dims 3 and 4 exist
        from mixvis import AttributeSpec, Summary

        attrs = (
            summary.attributes[0],
            AttributeSpec("u", "scalar", 1),
            AttributeSpec("v", "scalar", 1),
        )
        return Summary(attrs, summary.n_total, summary.clusters, summary.build_config)

    def test_peak_value_at_center_cell(self):
        sigma2 = 0.25
        summary = self._one_cluster_summary(np.diag([sigma2, sigma2]))
        grid = density_2d(summary, (3, 4), extent=((-2, 2), (-2, 2)), resolution=(101, 101))
        assert grid.values[50, 50] == pytest.approx(1.0 / (2 * math.pi * sigma2), rel=1e-6)
        assert grid.values.max() == grid.values[50, 50]

    def test_mass_normalization(self):
        cov = np.array([[0.3, 0.1], [0.1, 0.5]])
        summary = self._one_cluster_summary(cov)
        grid = density_2d(summary, (3, 4), extent=((-6, 6), (-6, 6)), resolution=(300, 300))
        cell = (12.0 / 300) ** 2
        mass = grid.values.sum() * cell
        assert mass == pytest.approx(1.0, abs=0.01 + math.exp(-4.5))

    def test_truncation_matches_dense_eval_within_bound(self):
        cov = np.array([[0.4, -0.15], [-0.15, 0.6]])
        summary = self._one_cluster_summary(cov, mean=(0.5, -0.3))
        grid = density_2d(summary, (3, 4), extent=((-4, 4), (-4, 4)), resolution=(160, 160))
        g2 = summary.clusters[0].gmms[SubsetKey((3, 4))]
        xs = -4 + (np.arange(160) + 0.5) * 8.0 / 160
        pts = np.stack(np.meshgrid(xs, xs), axis=-1).reshape(-1, 2)
        dense = g2.density(pts).reshape(160, 160)
        peak = dense.max()
        assert np.abs(grid.values - dense).max() <= peak * math.exp(-4.5) + 1e-12

    def test_invalid_dims(self):
        summary = self._one_cluster_summary(np.eye(2))
        with pytest.raises(ValueError):
            density_2d(summary, (4, 3))


class TestPcpDensity:
    def test_endpoint_is_marginal(self):
        rng = np.random.default_rng(3)
        gmm2 = random_gmm(rng, 2, 3)
        marginal = gmm2.marginal([0])
        for y in rng.uniform(-5, 5, 10):
            assert pcp_density(gmm2, 0.0, y) == pytest.approx(
                marginal.density(y), rel=1e-12
            )

    def test_independent_standard_midpoint(self):
        gmm2 = Gmm([GaussianComponent(1.0, [0.0, 0.0], np.eye(2))])
        assert pcp_density(gmm2, 0.5, 0.0) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi * 0.5), rel=1e-12
        )

    def test_u_out_of_range(self):
        gmm2 = Gmm([GaussianComponent(1.0, [0.0, 0.0], np.eye(2))])
        with pytest.raises(ValueError):
            pcp_density(gmm2, 1.5, 0.0)

    def test_against_monte_carlo_line_histogram(self):
        rng = np.random.default_rng(4)
        gmm2 = random_gmm(rng, 2, 2, mean_spread=2.0)
        n = 1_000_000
        pts = gmm2.sample(n, seed=5)
        for u in (0.25, 0.7):
            vals = (1 - u) * pts[:, 0] + u * pts[:, 1]
            bins = 200
            lo, hi = vals.min(), vals.max()
            hist, edges = np.histogram(vals, bins=bins, range=(lo, hi))
            centers = 0.5 * (edges[:-1] + edges[1:])
            width = edges[1] - edges[0]
            dens = pcp_density(gmm2, u, centers)
            p = dens * width  # expected bin probability
            se = np.sqrt(np.maximum(p * (1 - p), 1e-12) / n)
            err = np.abs(hist / n - p)
            # allow 3 sigma per bin plus midpoint-rule discretization slack
            assert np.all(err <= 3.0 * se + 0.05 * p + 1e-6)

    def test_continuity_in_u(self):
        rng = np.random.default_rng(5)
        gmm2 = random_gmm(rng, 2, 2)
        us = np.linspace(0, 1, 201)
        vals = np.array([pcp_density(gmm2, u, 0.3) for u in us])
        assert np.abs(np.diff(vals)).max() < 0.2  # no jumps on a compact set


class TestPcpImage:
    def test_two_axes_single_panel(self, small_summary):
        panels, image = pcp_image(small_summary, [0, 3], resolution=(40, 30))
        assert len(panels) == 1
        assert image.shape == (30, 40)

    def test_reversed_order_mirrors(self, small_summary):
        panels_fwd, _ = pcp_image(small_summary, [0, 3], resolution=(41, 21))
        panels_rev, _ = pcp_image(small_summary, [3, 0], resolution=(41, 21))
        assert np.allclose(panels_fwd[0].values, panels_rev[0].values[:, ::-1], rtol=1e-10)

    def test_u0_column_equals_1d_density(self):
        # 1D keys that are exact marginals of the 2D keys, so the panel's
        # u=0 column and the 1D density path must agree to rounding
        rng = np.random.default_rng(7)
        pos = [random_gmm(rng, 3, 1) for _ in range(2)]
        g2s = [random_gmm(rng, 2, 3) for _ in range(2)]
        extra = [
            {
                SubsetKey((3, 4)): g2,
                SubsetKey((3,)): g2.marginal([0]),
                SubsetKey((4,)): g2.marginal([1]),
            }
            for g2 in g2s
        ]
        summary = manual_summary(pos, counts=[60, 40], extra=extra)
        from mixvis import AttributeSpec, Summary

        attrs = (
            summary.attributes[0],
            AttributeSpec("u", "scalar", 1),
            AttributeSpec("v", "scalar", 1),
        )
        summary = Summary(attrs, summary.n_total, summary.clusters, summary.build_config)
        height = 33
        panels, _ = pcp_image(summary, [3, 4], resolution=(24, height))
        lo, hi = summary.dim_extent(3)
        grid = density_1d(summary, 3, extent=(lo, hi), resolution=height)
        # panel densities live on the normalized axis: scale by the extent
        assert np.allclose(panels[0].values[:, 0], grid.values * (hi - lo), rtol=1e-10)

    def test_needs_two_axes(self, small_summary):
        with pytest.raises(ValueError):
            pcp_image(small_summary, [0])


class TestTimeHistogram:
    def test_single_timestep_matches_binned_density(self, small_summary):
        rows = time_histogram([small_summary], 3, bins=50)
        assert rows.shape == (1, 50)
        lo, hi = small_summary.dim_extent(3)
        width = (hi - lo) / 50
        centers = lo + (np.arange(50) + 0.5) * width
        from mixvis.density import SummaryView, _density_1d_at

        oracle = _density_1d_at(SummaryView(small_summary), 3, centers, None) * width
        assert np.allclose(rows[0], oracle, rtol=1e-12)

    def test_constant_summaries_identical_rows(self, small_summary):
        rows = time_histogram([small_summary] * 3, 3, bins=40)
        assert np.array_equal(rows[0], rows[1])
        assert np.array_equal(rows[1], rows[2])

    def test_rows_normalize(self, small_summary):
        rows = time_histogram([small_summary] * 2, 3, bins=128)
        sums = rows.sum(axis=1)
        assert np.all(np.abs(sums - 1.0) < 0.02)

    def test_schema_mismatch(self, small_summary):
        rng = np.random.default_rng(6)
        other = manual_summary([random_gmm(rng, 3, 1)])
        with pytest.raises(ValueError, match="schema"):
            time_histogram([small_summary, other], 0, bins=8)
