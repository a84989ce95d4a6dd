import math

import numpy as np
import pytest

from equipart.baselines import (
    OneDDensity,
    figure4_density,
    oned_equitable_voronoi_check,
    slice_partition,
    sweep_partition,
    unimodal_voronoi,
)
from equipart.density import GaussianDensity, UniformDensity, region_measure
from equipart.errors import InvalidParams, UnsupportedDensity
from equipart.geometry import ConvexPolygon, PowerGeneratorSet, polygon_area, power_diagram

SQUARE = ConvexPolygon.box()
UNIFORM = UniformDensity()
GAUSS = GaussianDensity()


def measures(cells, density):
    out = []
    for c in cells:
        pieces = (c,) if isinstance(c, ConvexPolygon) else c
        out.append(sum(region_measure(p, density) for p in pieces))
    return np.array(out)


def random_convex(rng, n=9):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.5, 1.0)
    stretch = np.diag(rng.uniform(0.5, 2.0, 2))
    return ConvexPolygon.from_points(rad * np.column_stack([np.cos(ang), np.sin(ang)]) @ stretch)


def max_rel_dev(ms, total):
    target = total / len(ms)
    return float(np.max(np.abs(ms - target)) / target)


# -- slicing -----------------------------------------------------------------


def test_slice_examples():
    assert slice_partition(SQUARE, UNIFORM, 2).offsets == pytest.approx([0.5], abs=1e-11)
    assert slice_partition(SQUARE, UNIFORM, 4).offsets == pytest.approx([0.25, 0.5, 0.75], abs=1e-11)
    assert len(slice_partition(SQUARE, UNIFORM, 1).cells) == 1


def test_slice_gaussian_against_sampling():
    part = slice_partition(SQUARE, GAUSS, 3)
    ms = measures(part.cells, GAUSS)
    assert ms == pytest.approx([0.112] * 3, abs=1e-3)
    rng = np.random.default_rng(0)
    x = rng.random((1_000_000, 2))
    w = GAUSS(x)
    slab = np.searchsorted(part.offsets, x[:, 0])
    sample = np.array([w[slab == k].sum() for k in range(3)]) / len(x)
    se = np.array([w * (slab == k) for k in range(3)]).std(axis=1) / math.sqrt(len(x))
    assert np.all(np.abs(sample - ms) <= 3 * se)


@pytest.mark.parametrize("angle", [0.0, 0.7, 2.0])
@pytest.mark.parametrize("density", [UNIFORM, GAUSS])
def test_slice_is_equitable_partition(angle, density):
    A = random_convex(np.random.default_rng(3))
    part = slice_partition(A, density, 7, (math.cos(angle), math.sin(angle)))
    total = region_measure(A, density)
    ms = measures(part.cells, density)
    assert ms.sum() == pytest.approx(total, rel=1e-9)
    assert max_rel_dev(ms, total) <= 1e-8
    assert sum(polygon_area(c) for c in part.cells) == pytest.approx(polygon_area(A), rel=1e-12)


# -- sweeping ----------------------------------------------------------------


def test_sweep_quadrants():
    angles, cells = sweep_partition(SQUARE, UNIFORM, 4, (0.5, 0.5), math.pi / 4)
    np.testing.assert_allclose(angles, [0, math.pi / 2, math.pi, 1.5 * math.pi, 2 * math.pi], atol=1e-10)
    areas = [sum(polygon_area(p) for p in c) for c in cells]
    assert areas == pytest.approx([0.25] * 4, abs=1e-11)


def test_sweep_single_cell():
    _, cells = sweep_partition(SQUARE, GAUSS, 1, (0.3, 0.6))
    assert sum(polygon_area(p) for p in cells[0]) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("m", [2, 5, 8])
def test_sweep_gaussian_equitable(m):
    _, cells = sweep_partition(SQUARE, GAUSS, m, (0.4, 0.55), 0.3)
    total = region_measure(SQUARE, GAUSS)
    ms = measures(cells, GAUSS)
    assert ms.sum() == pytest.approx(total, rel=1e-9)
    assert max_rel_dev(ms, total) <= 1e-8


def test_sweep_rejects_outside_pivot():
    with pytest.raises(InvalidParams):
        sweep_partition(SQUARE, UNIFORM, 3, (1.5, 0.5))
    with pytest.raises(InvalidParams):
        sweep_partition(SQUARE, UNIFORM, 3, (1.0, 0.5))


# -- unimodal Voronoi --------------------------------------------------------


def test_unimodal_square_example():
    res = unimodal_voronoi(SQUARE, 3, (1.0, 0.0))
    np.testing.assert_allclose(res.s, [0, 1 / 3, 2 / 3, 1], atol=1e-12)
    np.testing.assert_allclose(res.t, [1 / 6, 1 / 2, 5 / 6], atol=1e-12)
    np.testing.assert_allclose(0.5 * (res.t[1:] + res.t[:-1]), [1 / 3, 2 / 3], atol=1e-12)
    d = power_diagram(SQUARE, PowerGeneratorSet.voronoi(res.positions))
    assert max_rel_dev(measures(d.cells, UNIFORM), 1.0) <= 1e-9


def test_unimodal_single_generator():
    res = unimodal_voronoi(SQUARE, 1, (0.0, 1.0))
    assert res.t == pytest.approx([0.5])


def test_unimodal_right_triangle():
    tri = ConvexPolygon.from_points([[0, 0], [1, 0], [0, 1]])
    res = unimodal_voronoi(tri, 4, (1.0, 1.0))
    assert res.contained
    d = power_diagram(tri, PowerGeneratorSet.voronoi(res.positions))
    assert max_rel_dev(measures(d.cells, UNIFORM), 0.5) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_unimodal_random_polygons(seed):
    A = random_convex(np.random.default_rng(seed))
    res = unimodal_voronoi(A, 6)
    assert res.contained
    d = power_diagram(A, PowerGeneratorSet.voronoi(res.positions))
    assert max_rel_dev(measures(d.cells, UNIFORM), polygon_area(A)) <= 1e-6


def test_unimodal_rejects_non_uniform():
    with pytest.raises(UnsupportedDensity):
        unimodal_voronoi(SQUARE, 3, (1.0, 0.0), GAUSS)


# -- 1-D existence -----------------------------------------------------------


def test_oned_uniform_feasible():
    res = oned_equitable_voronoi_check(OneDDensity.uniform(), 5)
    assert res.feasible
    np.testing.assert_allclose(res.g, [0.1, 0.3, 0.5, 0.7, 0.9], atol=1e-12)


@pytest.mark.parametrize("rho", [OneDDensity.uniform(), figure4_density(), OneDDensity((0, 0.3, 1), (5.0, 0.1))])
def test_oned_two_agents_always_feasible(rho):
    assert oned_equitable_voronoi_check(rho, 2).feasible


def test_oned_figure4_certificate():
    rho = figure4_density()
    res = oned_equitable_voronoi_check(rho, 5)
    assert not res.feasible
    np.testing.assert_allclose(res.b, [0, 0.1, 0.2, 0.8, 0.9, 1], atol=1e-12)
    c = next(c for c in res.conflicts if (c.i, c.j) == (2, 4))
    assert c.kind == "difference"
    assert c.value == pytest.approx(2 * (res.b[3] - res.b[2])) and c.value == pytest.approx(1.2)
    assert c.allowed == pytest.approx((0.6, 0.8))
    assert "g4 - g2 = 1.2" in c.describe()


@pytest.mark.parametrize("seed", range(10))
def test_oned_witness_is_sound(seed):
    rng = np.random.default_rng(seed)
    breaks = np.concatenate([[0], np.sort(rng.uniform(0, 1, 3)), [1]])
    rho = OneDDensity(tuple(breaks), tuple(rng.uniform(0.5, 1.5, 4)))
    m = int(rng.integers(2, 6))
    res = oned_equitable_voronoi_check(rho, m)
    if not res.feasible:
        assert res.conflicts
        return
    g = np.array(res.g)
    mids = 0.5 * (g[1:] + g[:-1])
    np.testing.assert_allclose(mids, res.b[1:-1], atol=1e-12)
    edges = np.concatenate([[0.0], mids, [1.0]])
    masses = [rho.mass(a, b) for a, b in zip(edges, edges[1:])]
    assert np.ptp(masses) <= 1e-10 * rho.total


def test_oned_degenerate_quantile_reported():
    rho = OneDDensity((0, 0.4, 0.6, 1), (1.0, 0.0, 1.0))
    res = oned_equitable_voronoi_check(rho, 2)
    assert res.degenerate == (1,)


def test_oned_density_validation():
    with pytest.raises(InvalidParams):
        OneDDensity((0, 1), (-1.0,))
    with pytest.raises(InvalidParams):
        OneDDensity((0, 1), (0.0,))
    with pytest.raises(InvalidParams):
        oned_equitable_voronoi_check(OneDDensity.uniform(), 1)
