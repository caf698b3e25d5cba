"""HTTP service exposing summary views and brushing to the web UI.

One summary (or a directory of per-timestep summaries plus transfer
matrices) is loaded per process. All state lives in a single session:
active brushes, the current timestep, LOD threshold. Density endpoints are
pure functions of (summary, session state), so identical request sequences
produce identical responses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import density as dens
from . import interact, render
from .dataset import Clustering, Dataset, load_clustering, load_dataset
from .density import ToneMapParams
from .summary import Summary, load_summary

__all__ = ["ServiceData", "create_app", "load_service_data"]

TRANSFER_FILE = "transfer.json"


@dataclass
class ServiceData:
    """Everything one service process serves."""

    summaries: list
    matrices: list = field(default_factory=list)  # len(summaries) - 1
    dataset: Dataset | None = None  # raw data for LOD (single-timestep mode)
    clustering: Clustering | None = None

    def __post_init__(self):
        if not self.summaries:
            raise ValueError("service needs at least one summary")
        if len(self.matrices) != len(self.summaries) - 1:
            raise ValueError("need one transfer matrix per timestep transition")

    @property
    def timesteps(self) -> int:
        return len(self.summaries)


@dataclass
class SessionState:
    """Mutable per-session view state; brushes remember their origin step."""

    brushes: list = field(default_factory=list)  # (Brush, mode, origin_t)
    timestep: int = 0
    lod_threshold: float | None = None


def load_service_data(
    summary_path=None, timeseries_dir=None, data_manifest=None, labels_path=None
) -> ServiceData:
    """Load a single summary file or a timeseries directory.

    A timeseries directory holds summary files sorted by name plus a
    ``transfer.json`` with the DOI transfer matrices between consecutive
    frames.
    """
    dataset = clustering = None
    if data_manifest is not None:
        dataset = load_dataset(data_manifest)
        if labels_path is not None:
            clustering = load_clustering(labels_path, dataset)
    if timeseries_dir is not None:
        tdir = Path(timeseries_dir)
        files = sorted(p for p in tdir.glob("*.msum*") if p.is_file())
        if not files:
            raise FileNotFoundError(f"no summary files in {tdir}")
        summaries = [load_summary(p) for p in files]
        mat_file = tdir / TRANSFER_FILE
        matrices = interact.load_transfer_matrices(mat_file) if mat_file.is_file() else []
        if len(matrices) != len(summaries) - 1:
            raise ValueError(
                f"{tdir} has {len(summaries)} summaries but {len(matrices)} transfer matrices"
            )
        return ServiceData(summaries, matrices, dataset, clustering)
    if summary_path is None:
        raise ValueError("need a summary file or a timeseries directory")
    return ServiceData([load_summary(summary_path)], [], dataset, clustering)


def create_app(data: ServiceData, ui_dir=None):
    """Build the FastAPI app around one ServiceData instance."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="mixvis", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = SessionState()
    lut_cache: dict = {}

    def summary() -> Summary:
        return data.summaries[state.timestep]

    def current_doi() -> np.ndarray | None:
        """Combine the active brushes into the current timestep's DOI.

        A brush is evaluated on its origin summary and propagated forward
        through the transfer matrices; for timesteps before its origin it is
        re-evaluated directly (value brushes are time-local).
        """
        if not state.brushes:
            return None
        t = state.timestep
        combined = None
        for brush, mode, origin in state.brushes:
            if origin <= t:
                v = interact.brush_doi(data.summaries[origin], brush)
                for step in range(origin, t):
                    v = interact.advance_doi(data.matrices[step], v)
            else:
                v = interact.brush_doi(data.summaries[t], brush)
            combined = v if combined is None else interact.combine_doi([combined, v], mode)
        return combined

    def view_source():
        doi = current_doi()
        s = summary()
        if state.lod_threshold is not None:
            if data.dataset is None or data.clustering is None or data.timesteps > 1:
                return s, doi  # guarded at POST /api/lod; defensive fallback
            lod_doi = doi if doi is not None else np.ones(s.cluster_count)
            return (
                interact.lod_substitute(
                    s, lod_doi, state.lod_threshold, data.dataset, data.clustering
                ),
                doi,
            )
        return s, doi

    def check_dim(dim: int) -> int:
        m = summary().m
        if not 0 <= dim < m:
            raise HTTPException(status_code=404, detail=f"unknown dimension {dim}")
        return dim

    def doi_stats(doi) -> dict:
        if doi is None:
            doi = np.ones(summary().cluster_count)
        return {
            "mean_doi": float(doi.mean()),
            "min_doi": float(doi.min()),
            "max_doi": float(doi.max()),
            "n_brushes": len(state.brushes),
        }

    @app.get("/api/summary")
    def get_summary():
        s = summary()
        ws = [w for cl in s.clusters for w in cl.wasserstein.values()]
        extents = []
        for dim in range(s.m):
            try:
                extents.append(list(s.dim_extent(dim)))
            except Exception:
                extents.append(None)
        dim_names = []
        for a in s.attributes:
            if a.components == 1:
                dim_names.append(a.name)
            else:
                dim_names.extend(f"{a.name}.{suf}" for suf in ("x", "y", "z"))
        return {
            "attributes": [
                {"name": a.name, "kind": a.kind, "components": a.components}
                for a in s.attributes
            ],
            "dim_names": dim_names,
            "cluster_count": s.cluster_count,
            "n_total": s.n_total,
            "extents": extents,
            "mean_wasserstein": float(np.mean(ws)) if ws else 0.0,
            "timesteps": data.timesteps,
            "timestep": state.timestep,
            "has_raw": data.dataset is not None and data.clustering is not None,
            "lod_threshold": state.lod_threshold,
            **doi_stats(current_doi()),
        }

    @app.get("/api/density1d")
    def get_density1d(dim: int, bins: int = 256):
        check_dim(dim)
        if not 1 < bins <= 4096:
            raise HTTPException(status_code=400, detail="bins must be in 2..4096")
        source, doi = view_source()
        grid = dens.density_1d(source, dim, resolution=bins, doi=doi)
        return {
            "dim": dim,
            "extent": list(grid.extent[0]),
            "values": grid.values.tolist(),
        }

    @app.get("/api/density2d")
    def get_density2d(dims: str, w: int = 200, h: int = 200):
        try:
            i, j = (int(p) for p in dims.split(","))
        except ValueError:
            raise HTTPException(status_code=400, detail="dims must be 'i,j'")
        check_dim(i)
        check_dim(j)
        if not i < j:
            raise HTTPException(status_code=400, detail="need dims i < j")
        if not (1 < w <= 2048 and 1 < h <= 2048):
            raise HTTPException(status_code=400, detail="resolution out of range")
        source, doi = view_source()
        grid = dens.density_2d(source, (i, j), resolution=(w, h), doi=doi)
        return {
            "dims": [i, j],
            "extent": [list(grid.extent[0]), list(grid.extent[1])],
            "width": w,
            "height": h,
            "values": grid.values.reshape(-1).tolist(),
        }

    @app.get("/api/pcp")
    def get_pcp(axes: str, w: int = 800, h: int = 300):
        try:
            axis_list = [int(p) for p in axes.split(",")]
        except ValueError:
            raise HTTPException(status_code=400, detail="axes must be comma-separated ints")
        if len(axis_list) < 2:
            raise HTTPException(status_code=400, detail="need at least two axes")
        for a in axis_list:
            check_dim(a)
        source, doi = view_source()
        try:
            panels, image = dens.pcp_image(source, axis_list, resolution=(w, h), doi=doi)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "axes": axis_list,
            "width": image.shape[1],
            "height": image.shape[0],
            "values": image.reshape(-1).tolist(),
            "panels": [
                {
                    "dims": list(p.dims),
                    "width": p.resolution[0],
                    "extent_a": list(p.extent[0]),
                    "extent_b": list(p.extent[1]),
                }
                for p in panels
            ],
        }

    @app.get("/api/timehist")
    def get_timehist(dim: int, bins: int = 64):
        check_dim(dim)
        if not 1 < bins <= 1024:
            raise HTTPException(status_code=400, detail="bins must be in 2..1024")
        doi = current_doi()
        doi_per_t = None
        if doi is not None:
            doi_per_t = []
            for t in range(data.timesteps):
                saved = state.timestep
                state.timestep = t
                doi_per_t.append(current_doi())
                state.timestep = saved
        rows = dens.time_histogram(data.summaries, dim, bins, doi_per_t=doi_per_t)
        lows, highs = zip(*(s.dim_extent(dim) for s in data.summaries))
        return {
            "dim": dim,
            "bins": bins,
            "timesteps": data.timesteps,
            "extent": [min(lows), max(highs)],
            "rows": rows.tolist(),
        }

    @app.get("/api/doi")
    def get_doi():
        doi = current_doi()
        s = summary()
        vec = (np.ones(s.cluster_count) if doi is None else doi).tolist()
        return {"doi": vec, **doi_stats(doi)}

    @app.post("/api/brush")
    def post_brush(body: dict):
        try:
            dim = int(body["dim"])
            a = float(body["a"])
            b = float(body["b"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=400, detail="brush needs dim, a, b")
        mode = str(body.get("mode", "and"))
        if mode not in ("and", "or"):
            raise HTTPException(status_code=400, detail="mode must be 'and' or 'or'")
        check_dim(dim)
        if not a <= b:
            raise HTTPException(status_code=400, detail="need a <= b")
        state.brushes.append((interact.Brush(dim, a, b), mode, state.timestep))
        return doi_stats(current_doi())

    @app.delete("/api/brush")
    def delete_brush():
        state.brushes.clear()
        return doi_stats(None)

    @app.post("/api/timestep")
    def post_timestep(body: dict):
        if data.timesteps <= 1:
            raise HTTPException(status_code=409, detail="service has no time series")
        try:
            t = int(body["t"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=400, detail="timestep needs t")
        if not 0 <= t < data.timesteps:
            raise HTTPException(status_code=400, detail=f"t must be in 0..{data.timesteps - 1}")
        state.timestep = t
        return {"timestep": t, **doi_stats(current_doi())}

    @app.post("/api/lod")
    def post_lod(body: dict):
        if data.dataset is None or data.clustering is None or data.timesteps > 1:
            raise HTTPException(status_code=409, detail="no raw dataset loaded")
        try:
            threshold = body["threshold"]
            threshold = None if threshold is None else float(threshold)
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=400, detail="lod needs threshold (number or null)")
        state.lod_threshold = threshold
        return {"lod_threshold": state.lod_threshold}

    @app.get("/api/errors")
    def get_errors():
        s = summary()
        clusters = [
            {
                "id": cl.cluster_id,
                "count": cl.sample_count,
                "wasserstein": {str(d): w for d, w in sorted(cl.wasserstein.items())},
            }
            for cl in s.clusters
        ]
        ws = [w for cl in s.clusters for w in cl.wasserstein.values()]
        return {"clusters": clusters, "mean": float(np.mean(ws)) if ws else 0.0}

    @app.get("/api/frame")
    def get_frame(
        camera: str | None = None,
        gamma: float = 1.0,
        color_dim: int = -1,
        format: str = "ppm",
        tf: str | None = None,
    ):
        s = summary()
        if color_dim < 0:
            color_dim = s.m - 1
        check_dim(color_dim)
        if format not in ("ppm", "png"):
            raise HTTPException(status_code=400, detail="format must be ppm or png")
        if not gamma > 0:
            raise HTTPException(status_code=400, detail="gamma must be positive")
        try:
            cam = render.Camera.from_json(json.loads(camera)) if camera else render.auto_camera(
                s, 1920, 1080
            )
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise HTTPException(status_code=400, detail=f"bad camera: {exc}")
        key = (state.timestep, color_dim, tf)
        if key not in lut_cache:
            lo, hi = s.dim_extent(color_dim)
            tfun = (
                render.TransferFunction.from_json(json.loads(tf))
                if tf
                else render.TransferFunction.grayscale(lo, hi)
            )
            span = hi - lo
            var_hi = max((span / 2.0) ** 2, 1e-6)
            lut_cache[key] = render.build_tf_lut(
                tfun, (lo - 0.5 * span, hi + 0.5 * span), (1e-8 * span**2 + 1e-12, var_hi)
            )
        frame = render.splat_frame(
            s, cam, lut_cache[key], color_dim, doi=current_doi(), tone=ToneMapParams(gamma)
        )
        if format == "png":
            import io

            from PIL import Image

            buf = io.BytesIO()
            Image.fromarray(frame.pixels, mode="RGBA").save(buf, format="PNG")
            return Response(buf.getvalue(), media_type="image/png")
        header = f"P6\n{frame.width} {frame.height}\n255\n".encode()
        return Response(
            header + frame.pixels[:, :, :3].tobytes(), media_type="image/x-portable-pixmap"
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
