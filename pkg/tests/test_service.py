import numpy as np
import pytest

pytest.importorskip("httpx")
from fastapi.testclient import TestClient

from mixvis import (
    Brush,
    brush_doi,
    build_transfer_matrix,
    density_2d,
    save_summary,
    save_transfer_matrices,
)
from mixvis.service import ServiceData, create_app, load_service_data


@pytest.fixture(scope="module")
def app_client(small_dataset, small_summary):
    dataset, clustering = small_dataset
    data = ServiceData([small_summary], [], dataset, clustering)
    with TestClient(create_app(data)) as client:
        yield client, small_summary


@pytest.fixture()
def fresh_client(small_dataset, small_summary):
    dataset, clustering = small_dataset
    data = ServiceData([small_summary], [], dataset, clustering)
    return TestClient(create_app(data))


class TestSummaryEndpoint:
    def test_manifest(self, app_client):
        client, summary = app_client
        r = client.get("/api/summary")
        assert r.status_code == 200
        doc = r.json()
        assert doc["cluster_count"] == summary.cluster_count
        assert doc["n_total"] == summary.n_total
        assert len(doc["extents"]) == summary.m
        assert doc["timesteps"] == 1
        assert doc["has_raw"] is True


class TestDensityEndpoints:
    def test_density1d(self, app_client):
        client, _ = app_client
        r = client.get("/api/density1d", params={"dim": 3, "bins": 64})
        assert r.status_code == 200
        doc = r.json()
        assert len(doc["values"]) == 64
        assert all(v >= 0 for v in doc["values"])

    def test_unknown_dim_404(self, app_client):
        client, _ = app_client
        assert client.get("/api/density1d", params={"dim": 99}).status_code == 404

    def test_malformed_400(self, app_client):
        client, _ = app_client
        assert client.get("/api/density2d", params={"dims": "zz", "w": 8, "h": 8}).status_code == 400
        assert client.get("/api/density1d", params={"dim": 0, "bins": 1}).status_code == 400

    def test_density2d_brush_matches_offline_doi_weighting(self, fresh_client, small_summary):
        client = fresh_client
        base = client.get("/api/density2d", params={"dims": "3,4", "w": 32, "h": 32}).json()
        brush = {"dim": 3, "a": -1.0, "b": 0.5, "mode": "and"}
        assert client.post("/api/brush", json=brush).status_code == 200
        brushed = client.get("/api/density2d", params={"dims": "3,4", "w": 32, "h": 32}).json()
        doi = brush_doi(small_summary, Brush(3, -1.0, 0.5))
        oracle = density_2d(
            small_summary, (3, 4),
            extent=(tuple(brushed["extent"][0]), tuple(brushed["extent"][1])),
            resolution=(32, 32), doi=doi,
        )
        assert np.allclose(
            np.array(brushed["values"]).reshape(32, 32), oracle.values, rtol=1e-9, atol=1e-12
        )
        assert not np.allclose(np.array(base["values"]), np.array(brushed["values"]))

    def test_pcp(self, app_client):
        client, _ = app_client
        r = client.get("/api/pcp", params={"axes": "0,3,4", "w": 48, "h": 24})
        assert r.status_code == 200
        doc = r.json()
        assert doc["width"] == 48 and doc["height"] == 24
        assert len(doc["panels"]) == 2

    def test_timehist_single_mode(self, app_client):
        client, _ = app_client
        r = client.get("/api/timehist", params={"dim": 3, "bins": 32})
        assert r.status_code == 200
        assert len(r.json()["rows"]) == 1


class TestBrushLifecycle:
    def test_full_range_brush_doi_one(self, fresh_client, small_summary):
        lo, hi = small_summary.dim_extent(3)
        span = hi - lo
        r = fresh_client.post(
            "/api/brush", json={"dim": 3, "a": lo - 5 * span, "b": hi + 5 * span}
        )
        assert r.status_code == 200
        assert r.json()["mean_doi"] == pytest.approx(1.0, abs=1e-6)

    def test_clear_restores_byte_identical_responses(self, fresh_client):
        client = fresh_client
        before = [
            client.get("/api/density1d", params={"dim": 3, "bins": 48}).content,
            client.get("/api/density2d", params={"dims": "0,3", "w": 16, "h": 16}).content,
            client.get("/api/pcp", params={"axes": "3,4", "w": 24, "h": 16}).content,
        ]
        client.post("/api/brush", json={"dim": 3, "a": -0.5, "b": 0.5})
        during = client.get("/api/density1d", params={"dim": 3, "bins": 48}).content
        assert during != before[0]
        client.delete("/api/brush")
        after = [
            client.get("/api/density1d", params={"dim": 3, "bins": 48}).content,
            client.get("/api/density2d", params={"dims": "0,3", "w": 16, "h": 16}).content,
            client.get("/api/pcp", params={"axes": "3,4", "w": 24, "h": 16}).content,
        ]
        assert after == before

    def test_bad_brush_400(self, fresh_client):
        assert fresh_client.post("/api/brush", json={"dim": 3, "a": 2.0, "b": 1.0}).status_code == 400
        assert fresh_client.post("/api/brush", json={"dim": 3}).status_code == 400
        assert fresh_client.post(
            "/api/brush", json={"dim": 3, "a": 0, "b": 1, "mode": "nand"}
        ).status_code == 400


class TestTimestepAndLod:
    def test_timestep_409_without_timeseries(self, fresh_client):
        assert fresh_client.post("/api/timestep", json={"t": 0}).status_code == 409

    def test_lod_toggle(self, fresh_client):
        client = fresh_client
        base = client.get("/api/density1d", params={"dim": 3, "bins": 32}).content
        assert client.post("/api/lod", json={"threshold": 0.0}).status_code == 200
        lod = client.get("/api/density1d", params={"dim": 3, "bins": 32}).content
        assert lod != base
        assert client.post("/api/lod", json={"threshold": None}).status_code == 200
        assert client.get("/api/density1d", params={"dim": 3, "bins": 32}).content == base

    def test_lod_409_without_raw(self, small_summary):
        data = ServiceData([small_summary], [])
        client = TestClient(create_app(data))
        assert client.post("/api/lod", json={"threshold": 0.5}).status_code == 409


class TestFrame:
    def test_ppm_bytes(self, app_client):
        client, _ = app_client
        cam = (
            '{"eye": [10, -20, 8], "look_at": [6, 6, 3], "width": 64, "height": 48, "fov_deg": 45}'
        )
        r = client.get("/api/frame", params={"camera": cam, "gamma": 2.0})
        assert r.status_code == 200
        assert r.content.startswith(b"P6\n64 48\n255\n")
        assert len(r.content) == 13 + 64 * 48 * 3

    def test_default_camera_and_png(self, app_client):
        client, _ = app_client
        r = client.get("/api/frame", params={"format": "png"})
        assert r.status_code == 200
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_bad_camera_400(self, app_client):
        client, _ = app_client
        assert client.get("/api/frame", params={"camera": "{"}).status_code == 400


class TestErrors:
    def test_error_report(self, app_client):
        client, summary = app_client
        doc = client.get("/api/errors").json()
        assert len(doc["clusters"]) == summary.cluster_count
        assert doc["mean"] >= 0


class TestDeterminism:
    def test_identical_request_sequences(self, small_dataset, small_summary):
        dataset, clustering = small_dataset

        def run_sequence():
            data = ServiceData([small_summary], [], dataset, clustering)
            client = TestClient(create_app(data))
            chunks = [client.get("/api/summary").content]
            client.post("/api/brush", json={"dim": 3, "a": -1, "b": 1})
            chunks.append(client.get("/api/density1d", params={"dim": 4, "bins": 40}).content)
            chunks.append(client.get("/api/pcp", params={"axes": "3,4", "w": 20, "h": 12}).content)
            chunks.append(client.get("/api/frame").content)
            return b"".join(chunks)

        assert run_sequence() == run_sequence()


class TestTimeseriesService:
    @pytest.fixture(scope="class")
    def ts_client(self, tmp_path_factory, small_dataset):
        from mixvis import FitConfig, build_summary

        dataset, clustering = small_dataset
        # frame 1 merges clusters 1 and 2 of frame 0
        merged = np.where(clustering.labels == 2, 1, clustering.labels)
        from mixvis import Clustering

        cl1 = Clustering(merged)
        s0 = build_summary(dataset, clustering, FitConfig(seed=1),
                           subset_filter=lambda k: len(k) != 2)
        s1 = build_summary(dataset, cl1, FitConfig(seed=1),
                           subset_filter=lambda k: len(k) != 2)
        tdir = tmp_path_factory.mktemp("ts")
        save_summary(s0, tdir / "frame_000.msum.gz")
        save_summary(s1, tdir / "frame_001.msum.gz")
        save_transfer_matrices(
            tdir / "transfer.json", [build_transfer_matrix(clustering, cl1)]
        )
        data = load_service_data(timeseries_dir=tdir)
        return TestClient(create_app(data))

    def test_timestep_advance_propagates_doi(self, ts_client):
        client = ts_client
        client.delete("/api/brush")
        doc = client.get("/api/summary").json()
        assert doc["timesteps"] == 2
        # brush only cluster 0's scalar range at t=0
        r = client.post("/api/brush", json={"dim": 3, "a": -2.0, "b": -0.4})
        doi_t0 = client.get("/api/doi").json()["doi"]
        r = client.post("/api/timestep", json={"t": 1})
        assert r.status_code == 200
        doi_t1 = client.get("/api/doi").json()["doi"]
        assert len(doi_t1) == 2  # merged clustering
        assert r.json()["timestep"] == 1
        # out-of-range timestep
        assert client.post("/api/timestep", json={"t": 5}).status_code == 400
        client.delete("/api/brush")

    def test_timehist_rows_per_timestep(self, ts_client):
        doc = ts_client.get("/api/timehist", params={"dim": 3, "bins": 24}).json()
        assert len(doc["rows"]) == 2
