import json

import numpy as np
import pytest

from mixvis import save_clustering, save_dataset
from mixvis.cli import main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, small_dataset):
    dataset, clustering = small_dataset
    out = tmp_path_factory.mktemp("data")
    save_dataset(dataset, out)
    save_clustering(clustering, out / "labels.u32")
    return out


@pytest.fixture(scope="module")
def summary_file(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("built") / "small.msum.gz"
    code = main(
        [
            "build",
            "--data", str(data_dir / "manifest.json"),
            "--clusters", str(data_dir / "labels.u32"),
            "--out", str(out),
            "--seed", "4",
        ]
    )
    assert code == 0
    return out


class TestBuild:
    def test_summary_written(self, summary_file):
        assert summary_file.is_file()

    def test_kmeans_route(self, data_dir, tmp_path):
        out = tmp_path / "km.msum.gz"
        code = main(
            ["build", "--data", str(data_dir / "manifest.json"), "--kmeans", "3",
             "--out", str(out), "--seed", "1", "--skip-pairs"]
        )
        assert code == 0
        from mixvis import load_summary

        summary = load_summary(out)
        assert summary.cluster_count == 3
        for cl in summary.clusters:
            pair_dims = [k.dims for k in cl.gmms if len(k) == 2]
            assert all(set(d) <= {0, 1, 2} for d in pair_dims)

    def test_missing_data_exits_1(self, tmp_path, capsys):
        code = main(["build", "--data", str(tmp_path / "nope.json"), "--out",
                     str(tmp_path / "o.msum.gz"), "--kmeans", "2"])
        assert code == 1
        assert "mixvis build" in capsys.readouterr().err


class TestStats:
    def test_prints_report(self, summary_file, capsys):
        assert main(["stats", str(summary_file)]) == 0
        out = capsys.readouterr().out
        assert "GMM comp." in out and "Wasserstein" in out


class TestErrors:
    def test_csv_and_json(self, summary_file, tmp_path):
        csv_path = tmp_path / "err.csv"
        json_path = tmp_path / "err.json"
        code = main(["errors", str(summary_file), "--csv", str(csv_path),
                     "--json", str(json_path)])
        assert code == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "cluster,dim,wasserstein"
        assert len(lines) == 1 + 3 * 5  # 3 clusters x 5 dims
        doc = json.loads(json_path.read_text())
        assert len(doc["clusters"]) == 3


class TestRender:
    def test_auto_camera_ppm(self, summary_file, tmp_path):
        out = tmp_path / "frame.ppm"
        code = main(["render", str(summary_file), "--out", str(out),
                     "--width", "80", "--height", "60", "--gamma", "2.5"])
        assert code == 0
        assert out.read_bytes().startswith(b"P6\n80 60\n255\n")

    def test_camera_and_tf_files(self, summary_file, tmp_path):
        cam = tmp_path / "cam.json"
        cam.write_text(json.dumps(
            {"eye": [10, -15, 6], "look_at": [5, 5, 2], "width": 40, "height": 30}
        ))
        tf = tmp_path / "tf.json"
        tf.write_text(json.dumps(
            {"points": [[-1.0, [0, 0, 1, 0.5]], [3.0, [1, 0, 0, 1.0]]]}
        ))
        out = tmp_path / "frame.png"
        code = main(["render", str(summary_file), "--out", str(out),
                     "--camera", str(cam), "--tf", str(tf), "--color-dim", "3"])
        assert code == 0
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestPlot:
    def test_density1d_json(self, summary_file, tmp_path):
        out = tmp_path / "d1.json"
        assert main(["plot", str(summary_file), "--kind", "density1d", "--dim", "3",
                     "--bins", "32", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["values"]) == 32

    def test_density2d_raw(self, summary_file, tmp_path):
        out = tmp_path / "d2.json"
        assert main(["plot", str(summary_file), "--kind", "density2d", "--dims", "3,4",
                     "--width", "24", "--height", "16", "--out", str(out), "--raw"]) == 0
        doc = json.loads(out.read_text())
        raw = np.fromfile(tmp_path / "d2.f32", dtype="<f4")
        assert raw.size == 24 * 16
        assert doc["raw_file"] == "d2.f32"

    def test_pcp(self, summary_file, tmp_path):
        out = tmp_path / "pcp.json"
        assert main(["plot", str(summary_file), "--kind", "pcp", "--axes", "0,3,4",
                     "--width", "48", "--height", "24", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["panels"]) == 2

    def test_timehist_single(self, summary_file, tmp_path):
        out = tmp_path / "th.json"
        assert main(["plot", str(summary_file), "--kind", "timehist", "--dim", "4",
                     "--bins", "16", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["timesteps"] == 1

    def test_missing_args_exit_1(self, summary_file, tmp_path, capsys):
        assert main(["plot", str(summary_file), "--kind", "density1d",
                     "--out", str(tmp_path / "x.json")]) == 1
        capsys.readouterr()


class TestSynthetic:
    def test_writes_dataset(self, tmp_path):
        out = tmp_path / "synth"
        assert main(["synthetic", "--seed", "2", "--out", str(out)]) == 0
        assert (out / "manifest.json").is_file()
        assert (out / "labels.u32").is_file()
        from mixvis import load_clustering, load_dataset

        ds = load_dataset(out / "manifest.json")
        assert ds.n == 100_000 and ds.m == 9
        cl = load_clustering(out / "labels.u32", ds)
        assert cl.cluster_count == 10
