import numpy as np
import pytest

from rigmetric.geometry import Point3, make_grid


@pytest.fixture
def small_grid():
    """8 x 8 x 4 unit voxels with the minimum corner at the origin."""
    return make_grid(Point3(0, 0, 0), 8, 8, 4, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rays(rng, grid, n, margin=3.0):
    """Origins in the grid's box grown by ``margin``; isotropic unit directions."""
    lo = grid.lower - margin
    hi = grid.upper + margin
    origins = rng.uniform(lo, hi, size=(n, 3))
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return origins, d


def sampled_voxels(origin, direction, grid, step_fraction=0.01):
    """Brute-force oracle: voxels hit by points sampled along the ray every delta/100."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    reach = np.linalg.norm(o - (grid.lower + grid.upper) / 2) + np.linalg.norm(grid.upper - grid.lower)
    t = np.arange(0.0, reach, grid.resolution * step_fraction)
    pts = o + t[:, None] * d
    k = np.floor((pts - grid.lower) / grid.resolution).astype(np.int64)
    inside = np.all((k >= 0) & (k < np.array(grid.shape)), axis=1)
    return {tuple(int(c) for c in row) for row in k[inside]}


def line_distance(center, origin, direction):
    v = np.asarray(center) - np.asarray(origin)
    return float(np.linalg.norm(v - np.dot(v, direction) * np.asarray(direction)))


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
