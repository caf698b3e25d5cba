import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute synthetic-dataset criteria")


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {'PASS' if report.passed else 'FAIL'}", flush=True)

from mixvis import (
    AttributeSpec,
    Clustering,
    ClusterSummary,
    Dataset,
    FitConfig,
    GaussianComponent,
    Gmm,
    SubsetKey,
    Summary,
    build_summary,
)


def random_spd(rng, d, scale=1.0):
    """Well-conditioned random SPD matrix."""
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + 0.3 * d * np.eye(d))


def random_gmm(rng, d, k, mean_spread=4.0, cov_scale=1.0):
    comps = [
        GaussianComponent(
            rng.uniform(0.2, 1.0),
            rng.uniform(-mean_spread, mean_spread, d),
            random_spd(rng, d, cov_scale),
        )
        for _ in range(k)
    ]
    return Gmm(comps)


def manual_summary(position_gmms, color_gmms=None, counts=None, extra=None):
    """Hand-built summary: one 3D position mixture per cluster.

    color_gmms: optional per-cluster 1D mixture stored under dim 3.
    """
    n_clusters = len(position_gmms)
    counts = counts or [100] * n_clusters
    attrs = [AttributeSpec("position", "position", 3)]
    if color_gmms is not None:
        attrs.append(AttributeSpec("value", "scalar", 1))
    clusters = []
    for cid in range(n_clusters):
        gmms = {SubsetKey((0, 1, 2)): position_gmms[cid]}
        if color_gmms is not None:
            gmms[SubsetKey((3,))] = color_gmms[cid]
        if extra:
            gmms.update(extra[cid])
        clusters.append(
            ClusterSummary(
                cluster_id=cid,
                sample_count=counts[cid],
                gmms=gmms,
                wasserstein={},
                centroid=np.asarray(position_gmms[cid].mixture_mean()),
            )
        )
    return Summary(
        attributes=tuple(attrs),
        n_total=sum(counts),
        clusters=tuple(clusters),
        build_config=FitConfig(),
    )


@pytest.fixture(scope="session")
def small_dataset():
    """3 well-separated clusters, 5 dims (position + 2 scalars)."""
    rng = np.random.default_rng(42)
    blocks = []
    for c in range(3):
        n = 250
        pos = rng.normal(c * 6.0, 0.8, (n, 3))
        a = rng.normal(c - 1.0, 0.5, n)
        b = rng.exponential(1.0, n) + c
        blocks.append(np.column_stack([pos, a, b]))
    data = np.vstack(blocks)
    attrs = [
        AttributeSpec("position", "position", 3),
        AttributeSpec("a", "scalar", 1),
        AttributeSpec("b", "scalar", 1),
    ]
    return Dataset(attrs, data), Clustering(np.repeat(np.arange(3), 250))


@pytest.fixture(scope="session")
def small_summary(small_dataset):
    dataset, clustering = small_dataset
    return build_summary(dataset, clustering, FitConfig(seed=11), with_outliers=True)
