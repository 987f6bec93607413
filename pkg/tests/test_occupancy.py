import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigmetric.dataset import Dataset, Frame
from rigmetric.geometry import OrientedBox, Point3, VoxelIndex, make_grid
from rigmetric.occupancy import (
    MetricError,
    OccupancyGrid,
    binary_entropy,
    build_pog,
    conditional_entropy,
    fusion_metric,
    information_gain,
    load_pog,
    s_mig,
    s_ms,
    save_pog,
    total_entropy,
)
from rigmetric.traversal import CoverageSet

LN2 = 0.693147180559945309417232121458


def car(x, y, z=0.5, size=(0.9, 0.9, 0.9)):
    return ("Car", OrientedBox(Point3(x, y, z), size, 0.0))


def pog_from_counts(grid, counts, T):
    return OccupancyGrid(grid, "Car", T, np.asarray(counts))


class TestBuildPog:
    grid = make_grid(Point3(0, 0, 0), 4, 4, 1, 1.0)

    def lin(self, x, y):
        return self.grid.linear_index(VoxelIndex(x, y, 0))

    def test_half(self):
        ds = Dataset((Frame("a", (car(0.5, 0.5),)), Frame("b", ())))
        pog = build_pog(ds, self.grid, "Car")
        assert pog.probs[self.lin(0, 0)] == 0.5
        assert pog.probs.sum() == 0.5

    def test_overlapping_boxes_count_once(self):
        frames = [Frame("a", (car(1.5, 1.5), car(1.5, 1.5, size=(1.5, 1.5, 0.9))))]
        frames += [Frame(f"e{i}", ()) for i in range(3)]
        pog = build_pog(Dataset(tuple(frames)), self.grid, "Car")
        assert pog.probs[self.lin(1, 1)] == 0.25
        assert pog.counts[self.lin(1, 1)] == 1

    def test_never_and_always(self):
        ds = Dataset(tuple(Frame(str(i), (car(2.5, 2.5),)) for i in range(5)))
        pog = build_pog(ds, self.grid, "Car")
        assert pog.probs[self.lin(2, 2)] == 1.0
        assert pog.probs[self.lin(0, 0)] == 0.0

    def test_other_class_ignored(self):
        ds = Dataset((Frame("a", (("Pedestrian", OrientedBox(Point3(0.5, 0.5, 0.5), (0.5, 0.5, 0.5), 0)),)),))
        assert build_pog(ds, self.grid, "Car").counts.sum() == 0

    def test_workers_and_merge_agree(self, rng):
        frames = tuple(
            Frame(str(i), tuple(car(*rng.uniform(0, 4, 2), size=tuple(rng.uniform(0.5, 2.5, 3))) for _ in range(3)))
            for i in range(40)
        )
        one = build_pog(Dataset(frames), self.grid, "Car")
        assert build_pog(Dataset(frames), self.grid, "Car", workers=3) == one
        merged = build_pog(Dataset(frames[:15]), self.grid, "Car").merge(build_pog(Dataset(frames[15:]), self.grid, "Car"))
        assert merged == one

    def test_empty_dataset(self):
        class Empty:
            frames = ()

        with pytest.raises(MetricError):
            build_pog(Empty(), self.grid, "Car")


class TestBinaryEntropy:
    def test_half(self):
        assert binary_entropy(0.5) == pytest.approx(LN2, abs=1e-15)

    @pytest.mark.parametrize("p", [0.0, 1.0])
    def test_degenerate(self, p):
        assert binary_entropy(p) == 0.0

    def test_quarter(self):
        # -0.25 ln 0.25 - 0.75 ln 0.75 at 30 digits
        assert binary_entropy(0.25) == pytest.approx(0.562335144618808, rel=1e-14)

    def test_base_two(self):
        assert binary_entropy(0.5, log_base=2) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
    def test_out_of_range(self, p):
        with pytest.raises(MetricError):
            binary_entropy(p)

    def test_vectorized(self):
        assert binary_entropy(np.array([0.0, 0.5, 1.0])) == pytest.approx([0.0, LN2, 0.0])


class TestEntropySums:
    grid = make_grid(Point3(0, 0, 0), 10, 10, 1, 1.0)

    def test_all_degenerate(self):
        counts = np.where(np.arange(100) % 2, 4, 0)
        assert total_entropy(pog_from_counts(self.grid, counts, 4)) == 0.0

    def test_one_half_voxel(self):
        counts = np.zeros(100)
        counts[17] = 1
        assert total_entropy(pog_from_counts(self.grid, counts, 2)) == pytest.approx(LN2, abs=1e-15)

    def test_random_against_naive_sum(self, rng):
        for T in (1, 3, 7, 200):
            pog = pog_from_counts(self.grid, rng.integers(0, T + 1, 100), T)
            naive = 0.0
            for c in pog.counts:
                p = c / T
                if 0 < p < 1:
                    naive += -p * math.log(p) - (1 - p) * math.log(1 - p)
            assert total_entropy(pog) == pytest.approx(naive, rel=1e-9)

    def test_order_independent(self, rng):
        counts = rng.integers(0, 51, 100)
        a = total_entropy(pog_from_counts(self.grid, counts, 50))
        b = total_entropy(pog_from_counts(self.grid, rng.permutation(counts), 50))
        assert a == b


class TestConditional:
    grid = make_grid(Point3(0, 0, 0), 10, 10, 1, 1.0)

    def pog(self, rng):
        return pog_from_counts(self.grid, rng.integers(0, 9, 100), 8)

    def test_full_and_empty(self, rng):
        pog = self.pog(rng)
        h = total_entropy(pog)
        assert conditional_entropy(pog, CoverageSet.full(self.grid)) == 0.0
        assert conditional_entropy(pog, CoverageSet.empty(self.grid)) == h
        assert s_mig(pog, CoverageSet.full(self.grid)) == 0.0
        assert s_mig(pog, CoverageSet.empty(self.grid)) == -h
        assert information_gain(pog, CoverageSet.full(self.grid)) == h
        assert information_gain(pog, CoverageSet.empty(self.grid)) == 0.0

    def test_two_value_pog(self):
        # 30 voxels at p = 0.5, 20 at p = 0.25, rest 0; cover exactly the p = 0.5 ones
        counts = np.zeros(100)
        counts[:30] = 2
        counts[30:50] = 1
        pog = pog_from_counts(self.grid, counts, 4)
        total = 30 * LN2 + 20 * 0.562335144618808
        assert total_entropy(pog) == pytest.approx(total, rel=1e-13)
        cov = CoverageSet.from_indices(self.grid, np.arange(30))
        assert conditional_entropy(pog, cov) == pytest.approx(total - 30 * LN2, rel=1e-13)

    def test_nested_monotone(self, rng):
        pog = self.pog(rng)
        for _ in range(50):
            b = rng.random(100) < rng.random()
            a = b & (rng.random(100) < 0.5)
            ca, cb = CoverageSet(self.grid, a), CoverageSet(self.grid, b)
            assert s_mig(pog, ca) <= s_mig(pog, cb)
            assert 0.0 <= conditional_entropy(pog, cb) <= total_entropy(pog)

    def test_grid_mismatch(self, rng):
        other = make_grid(Point3(0, 0, 0), 10, 10, 2, 1.0)
        with pytest.raises(MetricError):
            s_mig(self.pog(rng), CoverageSet.empty(other))


@settings(max_examples=100)
@given(st.lists(st.integers(0, 6), min_size=100, max_size=100), st.lists(st.booleans(), min_size=100, max_size=100))
def test_ig_identity(counts, mask):
    grid = make_grid(Point3(0, 0, 0), 10, 10, 1, 1.0)
    pog = pog_from_counts(grid, counts, 6)
    cov = CoverageSet(grid, np.array(mask))
    ig = information_gain(pog, cov)
    assert ig == total_entropy(pog) + s_mig(pog, cov)
    assert 0.0 <= ig <= total_entropy(pog) + 1e-12


class TestSms:
    def test_table_car_wide_center(self):
        assert s_ms(-73.08e3, -6.45e3, 0.1) == pytest.approx(-13.758e3, abs=1e-9)
        assert round(s_ms(-73.08e3, -6.45e3, 0.1) / 1e3, 2) == pytest.approx(-13.76, abs=0.01)

    def test_table_car_narrow_center(self):
        assert s_ms(-77.56e3, -6.45e3, 0.1) == pytest.approx(-14.206e3, abs=1e-9)

    def test_lambda_zero(self):
        assert s_ms(-5.0, -2.0, 0.0) == -2.0

    def test_negative_lambda(self):
        with pytest.raises(MetricError):
            s_ms(-1.0, -1.0, -0.1)

    def test_fusion(self, rng):
        grid = make_grid(Point3(0, 0, 0), 10, 10, 1, 1.0)
        pog = pog_from_counts(grid, rng.integers(0, 5, 100), 4)
        m = fusion_metric(pog, CoverageSet.empty(grid), CoverageSet.full(grid), 0.1)
        assert m.s_ms == 0.1 * m.camera.s_mig + m.lidar.s_mig
        assert m.camera.s_mig == -m.camera.total_entropy
        assert m.lidar.s_mig == 0.0


class TestPogFile:
    @pytest.mark.parametrize("order", ["<", ">"])
    def test_roundtrip(self, tmp_path, rng, order):
        grid = make_grid(Point3(-2, -3, 0.5), 4, 6, 2, 0.5)
        pog = OccupancyGrid(grid, "Pedestrian", 37, rng.integers(0, 38, grid.n_voxels))
        save_pog(pog, tmp_path / "p.pog", order)
        assert load_pog(tmp_path / "p.pog") == pog

    def test_layout(self, tmp_path):
        grid = make_grid(Point3(0, 0, 0), 2, 1, 1, 1.0)
        save_pog(OccupancyGrid(grid, "Car", 3, np.array([3, 1])), tmp_path / "p.pog")
        data = (tmp_path / "p.pog").read_bytes()
        assert data[:5] == b"POG1<"
        assert data[-8:] == bytes([3, 0, 0, 0, 1, 0, 0, 0])
        assert data[-11:-8] == b"Car"

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"nope" * 20)
        with pytest.raises(MetricError):
            load_pog(tmp_path / "x")


def test_counts_cannot_exceed_frames():
    grid = make_grid(Point3(0, 0, 0), 2, 1, 1, 1.0)
    with pytest.raises(MetricError):
        OccupancyGrid(grid, "Car", 2, np.array([3, 0]))
