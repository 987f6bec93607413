"""``rigmetric`` command line: metric, compare, correlate, coverage, synth.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

from .config import ConfigError, default_roi, dump_scene, load_rig, load_roi, load_scene
from .dataset import DEFAULT_CLASSES, DatasetError, load_frames, synth_scene, write_frames
from .geometry import GeometryError
from .occupancy import MetricError
from .report import (
    ReportError,
    build_pogs,
    correlate,
    correlation_csv,
    correlation_text,
    evaluate_rig,
    load_accuracy_table,
    load_metric_table,
    metric_csv,
    metric_text,
    rank_rigs,
    ranking_csv,
    ranking_text,
    report_rows,
    write_text,
)
from .sensors import SensorConfigError, rig_rays
from .stats import CorrelationError
from .traversal import coverage

log = logging.getLogger("rigmetric")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
_VALIDATION_ERRORS = (
    ConfigError,
    DatasetError,
    GeometryError,
    MetricError,
    SensorConfigError,
    ReportError,
    CorrelationError,
)


def _classes(text: str | None) -> tuple[str, ...]:
    if not text:
        return DEFAULT_CLASSES
    out = tuple(c.strip() for c in text.split(",") if c.strip())
    if not out:
        raise ConfigError("--classes is empty")
    return out


def _grid(args):
    return load_roi(args.roi) if args.roi else default_roi()


def _dataset(args, grid):
    classes = _classes(args.classes)
    if args.dataset and args.scene:
        raise ConfigError("give either --dataset or --scene, not both")
    if args.dataset:
        return load_frames(args.dataset, classes)
    if args.scene:
        spec = load_scene(args.scene)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        spec.check_inside(grid)
        ds = synth_scene(spec)
        unknown = set(ds.classes) - set(classes)
        if unknown:
            raise ConfigError(f"scene classes {sorted(unknown)} not in --classes {list(classes)}")
        return replace(ds, classes=classes)
    raise ConfigError("one of --dataset or --scene is required")


def _emit(args, csv_text: str, text: str) -> None:
    out = csv_text if args.format == "csv" else text
    if args.out:
        write_text(args.out, out)
    else:
        sys.stdout.write(out)


def cmd_metric(args) -> int:
    grid = _grid(args)
    rigs = [load_rig(p) for p in args.rig]
    ds = _dataset(args, grid)
    classes = _classes(args.classes)
    t0 = time.perf_counter()
    pogs = build_pogs(ds, grid, classes, workers=args.threads)
    reports = [
        evaluate_rig(r, ds, grid, args.lam, classes, args.threads, args.log_base, pogs=pogs) for r in rigs
    ]
    log.info("evaluated %d rig(s) in %.2f s", len(rigs), time.perf_counter() - t0)
    _emit(args, metric_csv(reports), metric_text(reports))
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.precomputed:
        rows = load_metric_table(args.precomputed, args.lam)
    else:
        if len(args.rig) < 2:
            raise ConfigError("compare needs at least two --rig files")
        grid = _grid(args)
        rigs = [load_rig(p) for p in args.rig]
        ds = _dataset(args, grid)
        classes = _classes(args.classes)
        pogs = build_pogs(ds, grid, classes, workers=args.threads)
        rows = report_rows(
            evaluate_rig(r, ds, grid, args.lam, classes, args.threads, args.log_base, pogs=pogs) for r in rigs
        )
    if len({r.rig for r in rows}) < 2:
        raise ConfigError("compare needs at least two rigs")
    ranking = rank_rigs(rows)
    _emit(args, ranking_csv(ranking), ranking_text(ranking))
    return EXIT_OK


def cmd_correlate(args) -> int:
    rows = load_metric_table(args.metric_table, args.lam)
    acc = load_accuracy_table(args.accuracy_table)
    reports = correlate(rows, acc, args.metric)
    _emit(args, correlation_csv(reports), correlation_text(reports))
    return EXIT_OK


def cmd_coverage(args) -> int:
    grid = _grid(args)
    rig = load_rig(args.rig[0]) if len(args.rig) == 1 else None
    if rig is None:
        raise ConfigError("coverage takes exactly one --rig")
    cam, lid = rig_rays(rig)
    rays = {"camera": cam, "lidar": lid}
    if args.modality == "all":
        cov = coverage(cam, grid, args.threads) | coverage(lid, grid, args.threads)
    else:
        cov = coverage(rays[args.modality], grid, args.threads)
    cov.save(args.out)
    print(f"{rig.name} {args.modality}: {len(cov)} of {grid.n_voxels} voxels covered -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_scene(args.scene)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    write_frames(synth_scene(spec), args.out)
    if args.dump_spec:
        write_text(args.dump_spec, dump_scene(spec))
    return EXIT_OK


def _common(p: argparse.ArgumentParser, dataset: bool = True) -> None:
    p.add_argument("--rig", action="append", default=[], help="rig YAML file (repeatable)")
    p.add_argument("--roi", help="ROI YAML file (default: 100x100x8 m at 0.5 m)")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    if dataset:
        p.add_argument("--dataset", help="frame file (JSON lines)")
        p.add_argument("--scene", help="synthetic scene YAML, generated in memory")
        p.add_argument("--seed", type=int, help="override the scene seed")
        p.add_argument("--classes", help="comma-separated class list (default: Car,Bicycle,Pedestrian)")
        p.add_argument("--log-base", choices=("e", "2"), default="e")


def _output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="camera weight in S-MS (default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigmetric", description="Score camera-LiDAR rigs by information gain.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metric", help="S-MIG / S-MS per class for one or more rigs")
    _common(p)
    _output(p)
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("compare", help="rank rigs by S-MS per class")
    _common(p)
    _output(p)
    p.add_argument("--precomputed", help="metric-v1 CSV to rank instead of computing")
    p.set_defaults(func=cmd_compare, format="text")

    p = sub.add_parser("correlate", help="Pearson / Spearman between a metric table and an accuracy table")
    p.add_argument("metric_table", help="metric-v1 CSV")
    p.add_argument("accuracy_table", help="accuracy-v1 CSV (model, class, rig, accuracy)")
    p.add_argument("--metric", default="s_ms", choices=("s_ms", "camera_s_mig", "lidar_s_mig"))
    _output(p)
    p.set_defaults(func=cmd_correlate, format="text")

    p = sub.add_parser("coverage", help="dump a rig's coverage bitmask")
    _common(p, dataset=False)
    p.add_argument("--modality", choices=("camera", "lidar", "all"), default="all")
    p.add_argument("--out", required=True, help="bitmask file (N bits, little-endian 64-bit words)")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("synth", help="write a synthetic frame file from a scene YAML")
    p.add_argument("--scene", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-spec", help="also write the effective scene YAML here")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("rigmetric: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as e:
        print(f"rigmetric: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"rigmetric: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
