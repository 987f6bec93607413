"""Metric pipeline, rig ranking and correlation reports, and their CSV forms.

CSV files start with one ``# schema: <name>`` comment line; readers skip
``#`` lines and ignore unknown columns.

metric-v1
    rig, class, camera_s_mig, lidar_s_mig, s_ms, h_pog, camera_ig, lidar_ig,
    lambda, log_base, frames, boxes, flags
ranking-v1
    class, rank, rig, s_ms, camera_s_mig, lidar_s_mig
correlation-v1
    model, class, metric, n, pearson, spearman
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .dataset import Dataset, clip_to_roi
from .geometry import RoiGrid
from .occupancy import FusionMetric, OccupancyGrid, build_pog, fusion_metric, s_ms
from .sensors import SensorRig, rig_rays
from .stats import CorrelationError, pearson, spearman
from .traversal import CoverageSet, coverage

METRIC_COLUMNS = (
    "rig",
    "class",
    "camera_s_mig",
    "lidar_s_mig",
    "s_ms",
    "h_pog",
    "camera_ig",
    "lidar_ig",
    "lambda",
    "log_base",
    "frames",
    "boxes",
    "flags",
)


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    rig: str
    lam: float
    log_base: str
    grid: RoiGrid
    frame_count: int
    box_totals: dict[str, int]
    rows: dict[str, FusionMetric]
    flags: tuple[str, ...] = ()


def build_pogs(dataset: Dataset, grid: RoiGrid, classes, workers: int = 1) -> dict[str, OccupancyGrid]:
    clipped = clip_to_roi(dataset, grid)
    return {c: build_pog(clipped, grid, c, workers=workers) for c in classes}


def rig_coverage(rig: SensorRig, grid: RoiGrid, workers: int = 1) -> tuple[CoverageSet, CoverageSet]:
    cam, lid = rig_rays(rig)
    return coverage(cam, grid, workers), coverage(lid, grid, workers)


def evaluate_rig(
    rig: SensorRig,
    dataset: Dataset,
    grid: RoiGrid,
    lam: float = 0.1,
    classes=None,
    workers: int = 1,
    log_base: str = "e",
    pogs: dict[str, OccupancyGrid] | None = None,
) -> MetricReport:
    classes = tuple(classes or dataset.classes)
    if pogs is None:
        pogs = build_pogs(dataset, grid, classes, workers)
    cam_cov, lid_cov = rig_coverage(rig, grid, workers)
    flags = []
    if not rig.cameras:
        flags.append("no_camera")
    if not rig.lidars:
        flags.append("no_lidar")
    rows = {c: fusion_metric(pogs[c], cam_cov, lid_cov, lam, log_base) for c in classes}
    totals = clip_to_roi(dataset, grid).box_totals()
    return MetricReport(
        rig.name, lam, str(log_base), grid, dataset.T, {c: totals.get(c, 0) for c in classes}, rows, tuple(flags)
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def metric_csv(reports) -> str:
    buf = io.StringIO(newline="")
    buf.write("# schema: metric-v1\n")
    for r in reports:
        g = r.grid
        buf.write(
            f"# grid {r.rig}: origin={list(g.origin)} extents={[g.length, g.width, g.height]} "
            f"resolution={g.resolution} shape={list(g.shape)} N={g.n_voxels}\n"
        )
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in reports:
        for label, m in r.rows.items():
            w.writerow(
                [
                    r.rig,
                    label,
                    _fmt(m.camera.s_mig),
                    _fmt(m.lidar.s_mig),
                    _fmt(m.s_ms),
                    _fmt(m.camera.total_entropy),
                    _fmt(m.camera.information_gain),
                    _fmt(m.lidar.information_gain),
                    _fmt(r.lam),
                    r.log_base,
                    r.frame_count,
                    r.box_totals[label],
                    ";".join(r.flags),
                ]
            )
    return buf.getvalue()


def metric_text(reports, scale: float = 1e3) -> str:
    """Table-style summary; metric values divided by ``scale`` at 2 decimals."""
    lines = []
    for r in reports:
        g = r.grid
        lines.append(f"rig: {r.rig}   lambda={r.lam}   log base: {r.log_base}")
        lines.append(
            f"grid: origin {tuple(g.origin)}, {g.length} x {g.width} x {g.height} m, "
            f"resolution {g.resolution} m, N={g.n_voxels}"
        )
        lines.append(f"frames: {r.frame_count}   boxes: " + ", ".join(f"{k}={v}" for k, v in r.box_totals.items()))
        if r.flags:
            lines.append("flags: " + ", ".join(r.flags))
        unit = f" (x{scale:g})" if scale != 1 else ""
        lines.append(f"{'class':<12}{'camera S-MIG' + unit:>22}{'LiDAR S-MIG' + unit:>22}{'S-MS' + unit:>22}")
        for label, m in r.rows.items():
            vals = [m.camera.s_mig / scale, m.lidar.s_mig / scale, m.s_ms / scale]
            lines.append(f"{label:<12}" + "".join(f"{v:>22.2f}" for v in vals))
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class MetricRow:
    rig: str
    label: str
    camera_s_mig: float
    lidar_s_mig: float
    s_ms: float


def _read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    return list(csv.DictReader(lines))


def _float(rec: dict, key: str, where: str) -> float:
    try:
        return float(rec[key])
    except KeyError:
        raise ReportError(f"{where}: missing column {key!r}") from None
    except (TypeError, ValueError):
        raise ReportError(f"{where}: column {key!r} is not a number: {rec[key]!r}") from None


def load_metric_table(path, lam: float = 0.1) -> list[MetricRow]:
    """Rows of a metric-v1 table; S-MS is derived with ``lam`` when the column is absent."""
    out = []
    for i, rec in enumerate(_read_csv(path), 1):
        where = f"{path}: row {i}"
        for k in ("rig", "class"):
            if not rec.get(k):
                raise ReportError(f"{where}: missing column {k!r}")
        cam = _float(rec, "camera_s_mig", where) if rec.get("camera_s_mig") not in (None, "") else float("nan")
        lid = _float(rec, "lidar_s_mig", where) if rec.get("lidar_s_mig") not in (None, "") else float("nan")
        if rec.get("s_ms") not in (None, ""):
            total = _float(rec, "s_ms", where)
        else:
            total = s_ms(_float(rec, "camera_s_mig", where), _float(rec, "lidar_s_mig", where), lam)
        out.append(MetricRow(rec["rig"], rec["class"], cam, lid, total))
    if not out:
        raise ReportError(f"{path}: no rows")
    return out


def report_rows(reports) -> list[MetricRow]:
    return [
        MetricRow(r.rig, label, m.camera.s_mig, m.lidar.s_mig, m.s_ms) for r in reports for label, m in r.rows.items()
    ]


def rank_rigs(rows: list[MetricRow]) -> dict[str, list[MetricRow]]:
    """Per class, rigs by S-MS descending; ties broken by rig name."""
    by_class: dict[str, list[MetricRow]] = {}
    for row in rows:
        by_class.setdefault(row.label, []).append(row)
    return {c: sorted(rs, key=lambda r: (-r.s_ms, r.rig)) for c, rs in by_class.items()}


def ranking_csv(ranking: dict[str, list[MetricRow]]) -> str:
    buf = io.StringIO(newline="")
    buf.write("# schema: ranking-v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "rank", "rig", "s_ms", "camera_s_mig", "lidar_s_mig"])
    for label, rows in ranking.items():
        for k, r in enumerate(rows, 1):
            w.writerow([label, k, r.rig, _fmt(r.s_ms), _fmt(r.camera_s_mig), _fmt(r.lidar_s_mig)])
    return buf.getvalue()


def ranking_text(ranking: dict[str, list[MetricRow]], scale: float = 1e3) -> str:
    lines = []
    for label, rows in ranking.items():
        lines.append(f"{label}: " + " > ".join(f"{r.rig} ({r.s_ms / scale:.2f})" for r in rows))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CorrelationReport:
    model: str
    label: str
    metric: str
    pairs: tuple[tuple[str, float, float], ...]
    pearson: float
    spearman: float

    @property
    def n(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class AccuracyRow:
    model: str
    label: str
    rig: str
    accuracy: float


def load_accuracy_table(path) -> list[AccuracyRow]:
    out = []
    for i, rec in enumerate(_read_csv(path), 1):
        where = f"{path}: row {i}"
        for k in ("model", "class", "rig"):
            if not rec.get(k):
                raise ReportError(f"{where}: missing column {k!r}")
        out.append(AccuracyRow(rec["model"], rec["class"], rec["rig"], _float(rec, "accuracy", where)))
    if not out:
        raise ReportError(f"{path}: no rows")
    return out


def correlate(metric_rows: list[MetricRow], accuracy_rows: list[AccuracyRow], metric: str = "s_ms") -> list[CorrelationReport]:
    """One report per (model, class) group of the accuracy table."""
    if metric not in ("s_ms", "camera_s_mig", "lidar_s_mig"):
        raise ReportError(f"unknown metric column {metric!r}")
    values = {(r.label, r.rig): getattr(r, metric) for r in metric_rows}
    groups: dict[tuple[str, str], list[AccuracyRow]] = {}
    for a in accuracy_rows:
        groups.setdefault((a.model, a.label), []).append(a)
    reports = []
    for (model, label), accs in groups.items():
        metric_rigs = {rig for (c, rig) in values if c == label}
        acc_rigs = {a.rig for a in accs}
        if metric_rigs != acc_rigs:
            missing = sorted(acc_rigs ^ metric_rigs)
            raise ReportError(f"{model}/{label}: unmatched rig labels {missing}")
        pairs = tuple((a.rig, values[(label, a.rig)], a.accuracy) for a in accs)
        xs = [p[1] for p in pairs]
        ys = [p[2] for p in pairs]
        try:
            reports.append(CorrelationReport(model, label, metric, pairs, pearson(xs, ys), spearman(xs, ys)))
        except CorrelationError as e:
            raise ReportError(f"{model}/{label}: {e}") from None
    return reports


def correlation_csv(reports: list[CorrelationReport]) -> str:
    buf = io.StringIO(newline="")
    buf.write("# schema: correlation-v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "class", "metric", "n", "pearson", "spearman"])
    for r in reports:
        w.writerow([r.model, r.label, r.metric, r.n, _fmt(r.pearson), _fmt(r.spearman)])
    return buf.getvalue()


def correlation_text(reports: list[CorrelationReport]) -> str:
    lines = [f"{'model':<30}{'class':<12}{'n':>3}{'pearson r':>12}{'spearman rho':>14}"]
    for r in reports:
        lines.append(f"{r.model:<30}{r.label:<12}{r.n:>3}{r.pearson:>12.3f}{r.spearman:>14.3f}")
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
