"""Command line interface: build, inspect, render, plot, serve.

Every subcommand exits 0 on success and 1 with a message on stderr for any
expected failure (bad files, bad parameters).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import density as dens
from . import interact, render
from .dataset import (
    generate_synthetic,
    kmeans_cluster,
    load_clustering,
    load_dataset,
    save_clustering,
    save_dataset,
)
from .density import ToneMapParams
from .fitting import FitConfig
from .summary import (
    SubsetKey,
    build_summary,
    load_summary,
    save_summary,
    summary_stats,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixvis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthetic", help="write the 100k-point synthetic benchmark dataset")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("build", help="fit per-cluster mixtures and write a summary file")
    p.add_argument("--data", type=Path, required=True, help="dataset manifest JSON")
    p.add_argument("--out", type=Path, required=True, help="summary output file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--clusters", type=Path, help="uint32 label file")
    group.add_argument("--kmeans", type=int, metavar="K", help="k-means on the position dims")
    p.add_argument("--max-components", type=int, default=6)
    p.add_argument("--subsample", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--skip-pairs", action="store_true", help="skip 2D fits outside vector attributes")
    p.add_argument("--outliers", action="store_true", help="store Mahalanobis outlier rankings")

    p = sub.add_parser("stats", help="print summary statistics")
    p.add_argument("summary", type=Path)

    p = sub.add_parser("errors", help="per-cluster per-dimension Wasserstein distances")
    p.add_argument("summary", type=Path)
    p.add_argument("--csv", type=Path, help="write CSV here (default: stdout)")
    p.add_argument("--json", type=Path, dest="json_out", help="also write a JSON report")

    p = sub.add_parser("render", help="splat the spatial mixtures to an image")
    p.add_argument("summary", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--camera", type=Path, help="camera JSON (default: auto-framed)")
    p.add_argument("--tf", type=Path, help="transfer function JSON (default: grayscale)")
    p.add_argument("--color-dim", type=int, default=-1, help="dimension driving color (default: last)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--width", type=int, default=1920)
    p.add_argument("--height", type=int, default=1080)
    p.add_argument("--format", choices=("ppm", "png"), default=None)

    p = sub.add_parser("plot", help="export density grids as JSON or raw float32")
    p.add_argument("summary", type=Path)
    p.add_argument("--kind", choices=("density1d", "density2d", "pcp", "timehist"), required=True)
    p.add_argument("--dim", type=int, help="dimension for density1d / timehist")
    p.add_argument("--dims", type=str, help="'i,j' for density2d")
    p.add_argument("--axes", type=str, help="comma-separated axis order for pcp")
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--width", type=int, default=200)
    p.add_argument("--height", type=int, default=200)
    p.add_argument("--timeseries", type=Path, help="timeseries directory for timehist")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--raw", action="store_true", help="write raw float32 values + JSON header")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("summary", type=Path, nargs="?")
    p.add_argument("--timeseries", type=Path, help="directory of summaries + transfer.json")
    p.add_argument("--data", type=Path, help="dataset manifest for LOD drill-down")
    p.add_argument("--labels", type=Path, help="uint32 label file for LOD drill-down")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", type=Path, help="static frontend directory to serve at /")

    return parser


def _cmd_synthetic(args) -> int:
    dataset, clustering = generate_synthetic(args.seed)
    manifest = save_dataset(dataset, args.out)
    save_clustering(clustering, Path(args.out) / "labels.u32")
    print(
        f"wrote {dataset.n} samples, {dataset.m} dims, "
        f"{clustering.cluster_count} clusters to {manifest.parent}"
    )
    return 0


def _cmd_build(args) -> int:
    dataset = load_dataset(args.data)
    if args.clusters is not None:
        clustering = load_clustering(args.clusters, dataset)
    elif args.kmeans is not None:
        clustering = kmeans_cluster(dataset, args.kmeans, seed=args.seed)
    else:
        labels = Path(args.data).parent / "labels.u32"
        if not labels.is_file():
            print("build: need --clusters or --kmeans (no labels.u32 next to manifest)",
                  file=sys.stderr)
            return 1
        clustering = load_clustering(labels, dataset)
    config = FitConfig(
        max_components=args.max_components,
        subsample_size=args.subsample,
        seed=args.seed,
        restarts=args.restarts,
    )
    subset_filter = None
    if args.skip_pairs:
        vector_pairs = {
            (t[a], t[b])
            for t in dataset.vector_triples()
            for a in range(3)
            for b in range(a + 1, 3)
        }

        def subset_filter(key: SubsetKey) -> bool:
            return len(key) != 2 or key.dims in vector_pairs

    import hashlib

    provenance = hashlib.sha256(Path(args.data).read_bytes()).hexdigest()[:16]
    summary = build_summary(
        dataset,
        clustering,
        config,
        subset_filter=subset_filter,
        with_outliers=args.outliers,
        provenance=provenance,
    )
    save_summary(summary, args.out)
    print(summary_stats(summary))
    return 0


def _cmd_stats(args) -> int:
    print(summary_stats(load_summary(args.summary)))
    return 0


def _cmd_errors(args) -> int:
    summary = load_summary(args.summary)
    rows = [
        (cl.cluster_id, dim, w)
        for cl in summary.clusters
        for dim, w in sorted(cl.wasserstein.items())
    ]
    if args.csv is not None:
        out = open(args.csv, "w", newline="")
    else:
        out = sys.stdout
    writer = csv.writer(out)
    writer.writerow(["cluster", "dim", "wasserstein"])
    for cid, dim, w in rows:
        writer.writerow([cid, dim, repr(w)])
    if args.csv is not None:
        out.close()
    if args.json_out is not None:
        doc = {
            "clusters": [
                {"id": cl.cluster_id, "wasserstein": {str(d): w for d, w in cl.wasserstein.items()}}
                for cl in summary.clusters
            ]
        }
        Path(args.json_out).write_text(json.dumps(doc, indent=2))
    return 0


def _cmd_render(args) -> int:
    summary = load_summary(args.summary)
    color_dim = args.color_dim if args.color_dim >= 0 else summary.m - 1
    if args.camera is not None:
        camera = render.Camera.from_json(json.loads(Path(args.camera).read_text()))
    else:
        camera = render.auto_camera(summary, args.width, args.height)
    lo, hi = summary.dim_extent(color_dim)
    if args.tf is not None:
        tf = render.TransferFunction.from_json(json.loads(Path(args.tf).read_text()))
    else:
        tf = render.TransferFunction.grayscale(lo, hi)
    span = hi - lo
    lut = render.build_tf_lut(
        tf, (lo - 0.5 * span, hi + 0.5 * span), (1e-8 * span**2 + 1e-12, max((span / 2) ** 2, 1e-6))
    )
    frame = render.splat_frame(summary, camera, lut, color_dim, tone=ToneMapParams(args.gamma))
    fmt = args.format or ("png" if str(args.out).endswith(".png") else "ppm")
    render.write_image(frame, args.out, fmt)
    print(f"wrote {camera.width}x{camera.height} {fmt} to {args.out}")
    return 0


def _write_grid(args, payload: dict, values: np.ndarray) -> None:
    if args.raw:
        raw_path = args.out.with_suffix(".f32")
        values.astype("<f4").tofile(raw_path)
        payload["raw_file"] = raw_path.name
        payload["dtype"] = "<f4"
    else:
        payload["values"] = values.reshape(-1).tolist()
    args.out.write_text(json.dumps(payload))


def _cmd_plot(args) -> int:
    summary = load_summary(args.summary)
    if args.kind == "density1d":
        if args.dim is None:
            print("plot: density1d needs --dim", file=sys.stderr)
            return 1
        grid = dens.density_1d(summary, args.dim, resolution=args.bins)
        _write_grid(
            args,
            {"kind": "density1d", "dim": args.dim, "extent": list(grid.extent[0]),
             "bins": args.bins},
            grid.values,
        )
    elif args.kind == "density2d":
        if not args.dims:
            print("plot: density2d needs --dims i,j", file=sys.stderr)
            return 1
        i, j = (int(p) for p in args.dims.split(","))
        grid = dens.density_2d(summary, (i, j), resolution=(args.width, args.height))
        _write_grid(
            args,
            {"kind": "density2d", "dims": [i, j], "width": args.width, "height": args.height,
             "extent": [list(grid.extent[0]), list(grid.extent[1])]},
            grid.values,
        )
    elif args.kind == "pcp":
        axes = [int(p) for p in (args.axes or "").split(",") if p != ""]
        if len(axes) < 2:
            print("plot: pcp needs --axes with at least two dims", file=sys.stderr)
            return 1
        panels, image = dens.pcp_image(summary, axes, resolution=(args.width, args.height))
        _write_grid(
            args,
            {"kind": "pcp", "axes": axes, "width": image.shape[1], "height": image.shape[0],
             "panels": [{"dims": list(p.dims), "width": p.resolution[0]} for p in panels]},
            image,
        )
    else:  # timehist
        if args.dim is None:
            print("plot: timehist needs --dim", file=sys.stderr)
            return 1
        if args.timeseries is not None:
            from .service import load_service_data

            summaries = load_service_data(timeseries_dir=args.timeseries).summaries
        else:
            summaries = [summary]
        rows = dens.time_histogram(summaries, args.dim, args.bins)
        _write_grid(
            args,
            {"kind": "timehist", "dim": args.dim, "bins": args.bins,
             "timesteps": len(summaries)},
            rows,
        )
    print(f"wrote {args.kind} grid to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_service_data

    data = load_service_data(
        summary_path=args.summary,
        timeseries_dir=args.timeseries,
        data_manifest=args.data,
        labels_path=args.labels,
    )
    app = create_app(data, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "synthetic": _cmd_synthetic,
    "build": _cmd_build,
    "stats": _cmd_stats,
    "errors": _cmd_errors,
    "render": _cmd_render,
    "plot": _cmd_plot,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"mixvis {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
