import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from equipart.errors import CoincidentGenerators, InvalidParams
from equipart.geometry import (
    ConvexPolygon,
    HalfPlane,
    PowerGeneratorSet,
    clip_halfplane,
    distance_to_boundary,
    point_in,
    points_in,
    polygon_area,
    polygon_diameter,
    polygon_perimeter,
    power_bisector,
    power_diagram,
    project_to_polygon,
    regular_polygon,
)

SQUARE = ConvexPolygon.box()


def random_gens(rng, m, weight_scale=0.0):
    pos = rng.random((m, 2))
    w = weight_scale * rng.standard_normal(m)
    return PowerGeneratorSet(pos, w)


gen_sets = st.builds(
    lambda seed, m, scale: random_gens(np.random.default_rng(seed), m, scale),
    st.integers(0, 2**32 - 1),
    st.integers(2, 10),
    st.sampled_from([0.0, 0.01, 0.05]),
)


# -- polygons and half-planes ------------------------------------------------


def test_clip_axis_cut():
    out = clip_halfplane(SQUARE, HalfPlane((1.0, 0.0), 0.5))
    assert polygon_area(out) == pytest.approx(0.5, abs=1e-15)
    assert out.vertices[:, 0].max() == pytest.approx(0.5)


def test_clip_non_binding_keeps_square():
    out = clip_halfplane(SQUARE, HalfPlane((1.0, 0.0), 2.0))
    np.testing.assert_array_equal(out.vertices, SQUARE.vertices)


def test_clip_infeasible_is_empty():
    assert clip_halfplane(SQUARE, HalfPlane((1.0, 0.0), -1.0)).is_empty


def test_halfplane_needs_unit_normal():
    with pytest.raises(InvalidParams):
        HalfPlane((2.0, 0.0), 1.0)
    h = HalfPlane.from_normal((2.0, 0.0), 1.0)
    assert h.offset == pytest.approx(0.5)


def test_from_points_orders_ccw_and_rejects_nonconvex():
    p = ConvexPolygon.from_points([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert polygon_area(p) == pytest.approx(1.0)
    with pytest.raises(InvalidParams):
        ConvexPolygon.from_points([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]])


def test_square_measures():
    assert polygon_area(SQUARE) == 1.0
    assert polygon_perimeter(SQUARE) == 4.0
    assert polygon_diameter(SQUARE) == pytest.approx(math.sqrt(2))


def test_empty_area_zero():
    assert polygon_area(ConvexPolygon.empty()) == 0.0


def test_hexagon_area():
    assert polygon_area(regular_polygon(6)) == pytest.approx(1.5 * math.sqrt(3), rel=1e-14)


def test_point_helpers():
    assert point_in(SQUARE, (0.5, 0.5))
    assert point_in(SQUARE, (1.0, 0.3))
    assert not point_in(SQUARE, (1.1, 0.3))
    np.testing.assert_array_equal(points_in(SQUARE, [[0.5, 0.5], [2, 2]]), [True, False])
    np.testing.assert_allclose(project_to_polygon(SQUARE, (1.5, 0.5)), (1.0, 0.5))
    assert distance_to_boundary(SQUARE, (0.5, 0.2)) == pytest.approx(0.2)
    assert distance_to_boundary(SQUARE, (2.0, 0.2)) == 0.0


# -- bisectors ---------------------------------------------------------------


def test_bisector_equal_weights_is_midline():
    h = power_bisector((0.25, 0.5), 0.0, (0.75, 0.5), 0.0)
    assert h.normal == pytest.approx((1.0, 0.0))
    assert h.offset == pytest.approx(0.5)


def test_bisector_weight_gap_moves_line():
    # 0.5 x = (0.75^2 - 0.25^2 + 0.2) / 2
    h = power_bisector((0.25, 0.5), 0.2, (0.75, 0.5), 0.0)
    assert h.offset == pytest.approx(0.7)


@given(gen_sets)
def test_bisector_orthogonal_to_segment(gens):
    g, w = gens.positions, gens.weights
    h = power_bisector(g[0], w[0], g[1], w[1])
    d = g[1] - g[0]
    cross = h.normal[0] * d[1] - h.normal[1] * d[0]
    assert abs(cross) <= 1e-12 * np.linalg.norm(d)


def test_bisector_coincident_raises():
    with pytest.raises(CoincidentGenerators):
        power_bisector((0.3, 0.3), 0.0, (0.3, 0.3), 1.0)


# -- diagrams ----------------------------------------------------------------


def test_single_generator_owns_region():
    d = power_diagram(SQUARE, PowerGeneratorSet.voronoi([[0.3, 0.6]]))
    assert polygon_area(d.cells[0]) == 1.0
    assert d.faces == [] and [list(n) for n in d.neighbors] == [[]]


def test_two_generators_split_square():
    d = power_diagram(SQUARE, PowerGeneratorSet.voronoi([[0.25, 0.5], [0.75, 0.5]]))
    assert [polygon_area(c) for c in d.cells] == pytest.approx([0.5, 0.5], abs=1e-15)
    (f,) = d.faces
    np.testing.assert_allclose([f.p[0], f.q[0]], [0.5, 0.5], atol=1e-15)
    assert f.length == pytest.approx(1.0)
    assert [list(n) for n in d.neighbors] == [[1], [0]]


@pytest.mark.parametrize("t", [-5.0, 1.0, 17.3])
def test_weight_shift_leaves_cells(t):
    rng = np.random.default_rng(7)
    gens = random_gens(rng, 8, 0.02)
    a = power_diagram(SQUARE, gens)
    b = power_diagram(SQUARE, gens.with_weights(gens.weights + t))
    for ca, cb in zip(a.cells, b.cells):
        assert ca.vertices.shape == cb.vertices.shape
        np.testing.assert_allclose(ca.vertices, cb.vertices, atol=1e-12, rtol=0)


def test_coincident_generators_propagate():
    with pytest.raises(CoincidentGenerators):
        power_diagram(SQUARE, PowerGeneratorSet.voronoi([[0.2, 0.2], [0.2, 0.2 + 1e-12]]))


@given(gen_sets)
def test_coverage_and_convexity(gens):
    d = power_diagram(SQUARE, gens)
    assert sum(polygon_area(c) for c in d.cells) == pytest.approx(1.0, rel=1e-9)
    for c in d.cells:
        if not c.is_empty:
            assert c.is_convex()


@given(gen_sets)
def test_faces_on_bisectors_and_symmetric_neighbours(gens):
    d = power_diagram(SQUARE, gens)
    g, w = gens.positions, gens.weights
    for f in d.faces:
        h = power_bisector(g[f.i], w[f.i], g[f.j], w[f.j])
        assert abs(h.signed_distance(f.p)) <= 1e-9
        assert abs(h.signed_distance(f.q)) <= 1e-9
        assert f.length > 1e-10
    for i, nb in enumerate(d.neighbors):
        for j in nb:
            assert i in d.neighbors[j]
    assert len({(f.i, f.j) for f in d.faces}) == len(d.faces)


@given(gen_sets)
def test_points_belong_to_minimum_power_cell(gens):
    d = power_diagram(SQUARE, gens)
    x = np.random.default_rng(0).random((2000, 2))
    power = ((x[:, None, :] - gens.positions[None]) ** 2).sum(-1) - gens.weights[None]
    best = power.argmin(axis=1)
    gap = np.sort(power, axis=1)
    clear = (gap[:, 1] - gap[:, 0]) > 1e-9
    inside = np.stack([points_in(c, x, tol=1e-12) for c in d.cells], axis=1)
    assert np.all(inside[np.arange(len(x)), best])
    assert np.all(inside[clear].sum(axis=1) == 1)


def test_points_belong_to_minimum_power_cell_large_sample():
    rng = np.random.default_rng(3)
    gens = random_gens(rng, 10, 0.02)
    d = power_diagram(SQUARE, gens)
    x = rng.random((1_000_000, 2))
    power = ((x[:, None, :] - gens.positions[None]) ** 2).sum(-1) - gens.weights[None]
    best = power.argmin(axis=1)
    for i, c in enumerate(d.cells):
        assert np.all(points_in(c, x[best == i], tol=1e-12))


def test_equal_weights_voronoi_properties():
    rng = np.random.default_rng(11)
    gens = random_gens(rng, 9)
    d = power_diagram(SQUARE, gens)
    g = gens.positions
    for i, c in enumerate(d.cells):
        assert point_in(c, g[i])
    for f in d.faces:
        mid = 0.5 * (g[f.i] + g[f.j])
        u = (g[f.j] - g[f.i]) / np.linalg.norm(g[f.j] - g[f.i])
        assert (f.p - mid) @ u == pytest.approx(0.0, abs=1e-12)


def test_empty_cell_and_generator_outside_cell():
    # a heavy weight swallows the middle generator, and a light cell can miss its own generator
    gens = PowerGeneratorSet([[0.2, 0.5], [0.5, 0.5], [0.8, 0.5]], [0.3, 0.0, 0.0])
    d = power_diagram(SQUARE, gens)
    assert d.cells[1].is_empty
    assert sum(polygon_area(c) for c in d.cells) == pytest.approx(1.0, rel=1e-12)
    gens = PowerGeneratorSet([[0.3, 0.5], [0.6, 0.5]], [0.0, 0.25])
    d = power_diagram(SQUARE, gens)
    assert not point_in(d.cells[0], gens.positions[0])
    assert sum(polygon_area(c) for c in d.cells) == pytest.approx(1.0, rel=1e-12)
