"""Command-line entry point.

Exit codes: 0 success, 1 parse/validation/I-O error, 2 degenerate geometry,
3 insufficient data. Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .dpc import DpcParams, decision_diagram_csv
from .errors import SplitWireError
from .pointcloud_io import PointCloud, load, write_labels_csv, write_xyz
from .synth import LAYOUTS, BundleSpec, default_layout, generate

log = logging.getLogger("splitwire")


class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures (exit 1); 2 is reserved for degenerate geometry
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="point cloud file (.xyz/.txt/.csv or ASCII .ply)")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--format", choices=("xyz", "ply"), default=None,
                   help="input format; inferred from the extension by default")
    p.add_argument("--labels", choices=("auto", "yes", "no"), default="auto",
                   help="whether XYZ input carries a 4th label column")
    p.add_argument("--d-c", type=float, default=0.05, help="cutoff distance in meters")
    p.add_argument("--max-clusters", type=int, default=8)
    p.add_argument("--gamma-gap-threshold", type=float, default=3.0)
    p.add_argument("--noise-density-fraction", type=float, default=0.0)
    p.add_argument("--segment-length", type=float, default=pipeline.DEFAULT_SEGMENT_LENGTH)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitwire", description="Split sub-conductor extraction from power-line point clouds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("extract", parents=[common], help="cluster sub-conductors and fit each wire")
    _pipeline_args(ex)
    dd = sub.add_parser("decision-diagram", parents=[common], help="write the normalized decision graph only")
    _pipeline_args(dd)

    sy = sub.add_parser("synth", parents=[common], help="generate a labeled synthetic bundle")
    sy.add_argument("--output", required=True, type=Path)
    sy.add_argument("--k", type=int, default=4)
    sy.add_argument("--layout", choices=LAYOUTS, default=None,
                    help="defaults to single/pair/square/regular_polygon by k")
    sy.add_argument("--spacing", type=float, default=0.45)
    sy.add_argument("--span-length", type=float, default=10.0)
    sy.add_argument("--sag", type=float, default=0.3)
    sy.add_argument("--points-per-wire", type=int, default=1000)
    sy.add_argument("--noise-sigma", type=float, default=0.005)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--azimuth", type=float, default=0.5, help="span direction, radians from +x")
    sy.add_argument("--height", type=float, default=20.0)
    return parser


def _read(args) -> PointCloud:
    has_labels = {"auto": None, "yes": True, "no": False}[args.labels]
    return load(args.input, args.format, has_labels)


def _params(args) -> DpcParams:
    return DpcParams(args.d_c, args.max_clusters, args.gamma_gap_threshold, args.noise_density_fraction)


def _echo(args) -> dict:
    return {
        "input": str(args.input),
        "format": args.format or ("ply" if str(args.input).lower().endswith(".ply") else "xyz"),
        "d_c": args.d_c,
        "max_clusters": args.max_clusters,
        "gamma_gap_threshold": args.gamma_gap_threshold,
        "noise_density_fraction": args.noise_density_fraction,
        "segment_length": args.segment_length,
    }


def cmd_extract(args) -> int:
    params = _params(args)
    cloud = _read(args)
    result = pipeline.extract(cloud.with_labels(None), params, args.segment_length)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.out_dir / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_labels_csv(cloud.with_labels(result.labels), fh)
    with open(args.out_dir / "decision.csv", "w", encoding="utf-8", newline="\n") as fh:
        decision_diagram_csv(result.clusters.decision, fh)
    with open(args.out_dir / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(pipeline.report(result, _echo(args)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    geo = result.geometry
    spacing = "n/a" if geo.min_adjacent_spacing is None else f"{geo.min_adjacent_spacing:.4f} m"
    log.info("k = %d, min adjacent spacing %s", result.clusters.k, spacing)
    return 0


def cmd_decision_diagram(args) -> int:
    params = _params(args)
    cloud = _read(args)
    decision = pipeline.decision_graph(cloud, params.d_c, args.segment_length)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.out_dir / "decision.csv", "w", encoding="utf-8", newline="\n") as fh:
        decision_diagram_csv(decision, fh)
    return 0


def cmd_synth(args) -> int:
    spec = BundleSpec(
        k=args.k,
        spacing=args.spacing,
        layout=args.layout or default_layout(args.k),
        span_length=args.span_length,
        sag=args.sag,
        points_per_wire=args.points_per_wire,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        azimuth=args.azimuth,
        height=args.height,
    )
    cloud = generate(spec)
    summary = (
        f"k={spec.k} layout={spec.layout} spacing={spec.spacing} span_length={spec.span_length} "
        f"sag={spec.sag} points_per_wire={spec.points_per_wire} noise_sigma={spec.noise_sigma} "
        f"seed={spec.seed} azimuth={spec.azimuth} height={spec.height}"
    )
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        write_xyz(cloud, fh, comments=["splitwire synth " + summary, "x y z label"])
    print(f"wrote {len(cloud)} points to {args.output}: {summary}")
    return 0


COMMANDS = {"extract": cmd_extract, "decision-diagram": cmd_decision_diagram, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except SplitWireError as exc:
        print(f"splitwire: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"splitwire: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
