"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line that is printed in the terminal summary.
"""

import csv
import io
import math
import time
from dataclasses import replace

import numpy as np

from conftest import ACCEPTANCE, line_distance, random_rays, sampled_voxels
from rigmetric.cli import main
from rigmetric.config import FIXTURE_RIGS, dump_rig, fixture_path, fixture_rig
from rigmetric.dataset import Dataset, Frame
from rigmetric.geometry import OrientedBox, Point3, make_grid, voxel_center
from rigmetric.occupancy import (
    OccupancyGrid,
    binary_entropy,
    build_pog,
    information_gain,
    s_mig,
    s_ms,
    total_entropy,
)
from rigmetric.report import load_accuracy_table, load_metric_table
from rigmetric.sensors import RaySet
from rigmetric.traversal import CoverageSet, coverage, traverse_linear

CLASSES = ("Car", "Bicycle", "Pedestrian")


def check(name, ok, detail=""):
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def read_csv(text):
    return list(csv.DictReader(ln for ln in io.StringIO(text) if not ln.startswith("#")))


def test_1_golden_fusion_arithmetic():
    t0 = time.perf_counter()
    rows = read_csv(fixture_path("table1_smig.csv").read_text())
    worst = 0.0
    for r in rows:
        got = s_ms(float(r["camera_s_mig"]), float(r["lidar_s_mig"]), 0.1)
        worst = max(worst, abs(got - float(r["s_ms"])))
    elapsed = time.perf_counter() - t0
    check(
        "1 S-MS golden arithmetic",
        len(rows) == 24 and worst <= 0.01e3 and elapsed < 1.0,
        f"cells={len(rows)} max|err|={worst / 1e3:.4f}e3 t={elapsed:.3f}s",
    )


def rank_difference_rho(xs, ys):
    # textbook 1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties
    assert len(set(xs)) == len(xs) and len(set(ys)) == len(ys)
    rx = {v: k for k, v in enumerate(sorted(xs))}
    ry = {v: k for k, v in enumerate(sorted(ys))}
    d2 = sum((rx[x] - ry[y]) ** 2 for x, y in zip(xs, ys))
    n = len(xs)
    return 1 - 6 * d2 / (n * (n * n - 1))


def test_2_correlation_from_published_tables(tmp_path):
    t1 = fixture_path("table1_smig.csv")
    t2 = fixture_path("table2_map.csv")
    t0 = time.perf_counter()
    code = main(["correlate", str(t1), str(t2), "--format", "csv", "--out", str(tmp_path / "c.csv")])
    elapsed = time.perf_counter() - t0
    rows = read_csv((tmp_path / "c.csv").read_text())
    rho = {(r["model"], r["class"]): float(r["spearman"]) for r in rows}

    metric = {(m.label, m.rig): m.s_ms for m in load_metric_table(t1)}
    acc = [a for a in load_accuracy_table(t2) if a.model == "Transfusion-PointPillars" and a.label == "Pedestrian"]
    oracle = rank_difference_rho([metric[("Pedestrian", a.rig)] for a in acc], [a.accuracy for a in acc])

    target = rho.get(("Transfusion-PointPillars", "Pedestrian"), float("nan"))
    check(
        "2 Spearman TF-PP Pedestrian",
        code == 0 and abs(target - 0.929) <= 0.001 and abs(target - oracle) < 1e-12,
        f"rho={target:.4f} oracle={oracle:.4f}",
    )
    worst = min(rho.values())
    check(
        "2 Spearman positive for every pair",
        len(rho) == 12 and worst > 0 and elapsed < 1.0,
        f"pairs={len(rho)} min rho={worst:.3f} t={elapsed:.3f}s",
    )


def test_3a_wide_beats_narrow(tmp_path):
    t0 = time.perf_counter()
    rigs = [str(fixture_path(f"rigs/{name}.yaml")) for name in FIXTURE_RIGS]
    args = ["metric", "--scene", str(fixture_path("scene_default.yaml")), "--threads", "4"]
    for r in rigs:
        args += ["--rig", r]
    code = main(args + ["--out", str(tmp_path / "m.csv")])
    elapsed = time.perf_counter() - t0
    rows = read_csv((tmp_path / "m.csv").read_text())
    cam = {(r["rig"], r["class"]): float(r["camera_s_mig"]) for r in rows}
    frames = {int(r["frames"]) for r in rows}
    bad = [
        (layout, c)
        for layout in ("center", "pyramid", "line", "trapezoid")
        for c in CLASSES
        if not cam[(f"wide_{layout}", c)] >= cam[(f"narrow_{layout}", c)]
    ]
    gap = min(cam[("wide_center", c)] - cam[("narrow_center", c)] for c in CLASSES)
    check(
        "3a Wide >= Narrow camera S-MIG",
        code == 0 and not bad and min(frames) >= 200 and elapsed < 300,
        f"violations={bad} min gap={gap:.1f} frames={min(frames)} t={elapsed:.1f}s",
    )


def test_3b_nested_coverage_monotone(small_grid, rng):
    g = small_grid
    frames = tuple(
        Frame(
            str(i),
            tuple(
                ("Car", OrientedBox(Point3(*rng.uniform(0, 8, 2), rng.uniform(0, 4)), tuple(rng.uniform(0.5, 3, 3)), rng.uniform(-3, 3)))
                for _ in range(3)
            ),
        )
        for i in range(20)
    )
    pog = build_pog(Dataset(frames), g, "Car")
    failures = 0
    for _ in range(100):
        origins, dirs = random_rays(rng, g, int(rng.integers(2, 60)))
        k = int(rng.integers(0, len(origins)))
        a = coverage(RaySet(origins[:k], dirs[:k]), g)
        b = coverage(RaySet(origins, dirs), g)
        failures += not (a <= b and s_mig(pog, a) <= s_mig(pog, b))
    check("3b nested coverage monotonicity", failures == 0, f"pairs=100 failures={failures}")


def test_3c_traversal_matches_sampling_oracle(small_grid, rng):
    g = small_grid
    origins, dirs = random_rays(rng, g, 500)
    missing = far = 0
    for o, d in zip(origins, dirs):
        got = {g.unravel(int(i)) for i in traverse_linear(o, d, g)}
        oracle = sampled_voxels(o, d, g)
        missing += len(oracle - got)
        far += sum(line_distance(voxel_center(v, g), o, d) > math.sqrt(3) / 2 * g.resolution + 1e-12 for v in got - oracle)
    check("3c DDA superset of sampling oracle", missing == 0 and far == 0, f"rays=500 missing={missing} far extras={far}")


def contains(box, p):
    # independent containment: rotate the offset into the box frame by hand
    dx, dy, dz = p[0] - box.center.x, p[1] - box.center.y, p[2] - box.center.z
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    l, w, h = box.size
    return abs(lx) <= l / 2 and abs(ly) <= w / 2 and abs(dz) <= h / 2


def test_3d_pog_oracle():
    g = make_grid(Point3(0, 0, 0), 6, 4, 2, 0.5)
    a = ("Car", OrientedBox(Point3(1.5, 1.0, 0.5), (2.0, 1.0, 1.0), 0.0))
    b = ("Car", OrientedBox(Point3(2.0, 1.5, 0.5), (2.0, 1.0, 1.0), math.pi / 2))
    c = ("Car", OrientedBox(Point3(4.0, 2.0, 0.5), (1.5, 1.5, 1.0), math.pi / 4))
    d = ("Car", OrientedBox(Point3(5.0, 0.75, 0.5), (1.0, 1.0, 1.0), 0.0))
    ped = ("Pedestrian", OrientedBox(Point3(1.5, 1.0, 0.5), (4.0, 4.0, 1.0), 0.0))
    frames = (Frame("0", (a, b)), Frame("1", (a, c)), Frame("2", (a, d, ped)), Frame("3", (b, c)))
    pog = build_pog(Dataset(frames), g, "Car")
    brute = np.zeros(g.n_voxels)
    for i in range(g.n_voxels):
        p = voxel_center(g.unravel(i), g)
        brute[i] = sum(any(lbl == "Car" and contains(bx, p) for lbl, bx in f.boxes) for f in frames) / 4
    values = set(pog.probs.tolist())
    h_half = binary_entropy(0.5)
    check(
        "3d POG matches brute-force count",
        values == {0.0, 0.25, 0.5, 0.75, 1.0} and np.array_equal(pog.probs, brute) and abs(h_half - math.log(2)) <= 1e-12,
        f"values={sorted(values)} H(0.5)-ln2={h_half - math.log(2):.1e}",
    )


def test_3e_boundary_identities(rng):
    g = make_grid(Point3(0, 0, 0), 10, 10, 4, 1.0)
    pog = OccupancyGrid(g, "Car", 9, rng.integers(0, 10, g.n_voxels))
    h = total_entropy(pog)
    full, empty = CoverageSet.full(g), CoverageSet.empty(g)
    ok = (
        s_mig(pog, full) == 0.0
        and information_gain(pog, full) == h
        and s_mig(pog, empty) == -h
        and information_gain(pog, empty) == 0.0
    )
    check("3e boundary identities", ok and h > 0, f"H={h:.6f}")


def test_4_thread_determinism(tmp_path):
    args = ["metric", "--scene", str(fixture_path("scene_default.yaml"))]
    for name in ("wide_trapezoid", "narrow_pyramid"):
        args += ["--rig", str(fixture_path(f"rigs/{name}.yaml"))]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "t1.csv")]) == 0
    assert main(args + ["--threads", "8", "--out", str(tmp_path / "t8.csv")]) == 0
    one, eight = (tmp_path / "t1.csv").read_bytes(), (tmp_path / "t8.csv").read_bytes()
    check("4 byte-identical CSV for 1 vs 8 threads", one == eight, f"bytes={len(one)}")


def test_5_performance_envelope(tmp_path):
    rig = fixture_rig("wide_center")
    rig = replace(rig, cameras=tuple(replace(c, ray_width=64, ray_height=36) for c in rig.cameras))
    assert len(rig.cameras) == 6 and len(rig.lidars) == 4
    assert {(l.horizontal_steps, l.channels) for l in rig.lidars} == {(900, 32)}
    (tmp_path / "rig.yaml").write_text(dump_rig(rig))
    t0 = time.perf_counter()
    code = main(
        ["metric", "--rig", str(tmp_path / "rig.yaml"), "--scene", str(fixture_path("scene_default.yaml")),
         "--threads", "4", "--out", str(tmp_path / "m.csv")]
    )
    elapsed = time.perf_counter() - t0
    check("5 performance envelope", code == 0 and elapsed < 60, f"t={elapsed:.2f}s (limit 60s)")
