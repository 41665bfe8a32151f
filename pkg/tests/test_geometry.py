import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpfront.geometry import (VANISHED, ConvexCurve, GeometryError, GridSpec, ScalarField,
                                 extract_level_set, half_plane_intersection, hausdorff, read_polygon_csv,
                                 signed_distance, signed_distance_grid, write_polygon_csv)

SQUARE = [[-1, -1], [1, -1], [1, 1], [-1, 1]]


def test_gridspec_covering_and_mesh():
    g = GridSpec.covering(-1.0, 1.0, 0.0, 0.5, 0.25)
    assert (g.nx, g.ny) == (9, 3)
    X, Y = g.mesh()
    assert X.shape == g.shape == (3, 9)
    assert X[0, -1] == pytest.approx(1.0) and Y[-1, 0] == pytest.approx(0.5)


def test_gridspec_rejects_bad_spacing():
    with pytest.raises(GeometryError):
        GridSpec(4, 4, 0, 0, 0.0, 1.0)


def test_scalar_field_rejects_nonfinite():
    g = GridSpec(3, 3, 0, 0, 1, 1)
    with pytest.raises(GeometryError):
        ScalarField(g, np.full((3, 3), np.nan))


def test_curve_rejects_clockwise_and_bad_normals():
    with pytest.raises(GeometryError):
        ConvexCurve.from_polygon(SQUARE[::-1])
    c = ConvexCurve.from_polygon(SQUARE)
    with pytest.raises(GeometryError):
        ConvexCurve(c.vertices, 2 * c.normals)
    with pytest.raises(GeometryError):
        ConvexCurve(c.vertices, -c.normals)


def test_corner_fan_keeps_vertices_and_adds_normals():
    c = ConvexCurve.from_polygon(SQUARE, corner_fan=3)
    assert len(c) == 16
    assert c.min_curvature_radius() == 0.0
    assert c.area() == pytest.approx(4.0)


def test_circle_curvature_radius_and_area():
    c = ConvexCurve.circle(2.0, 512)
    assert c.min_curvature_radius() == pytest.approx(2.0, rel=1e-4)
    assert c.area() == pytest.approx(np.pi * 4, rel=1e-4)


def test_signed_distance_square():
    sq = ConvexCurve.from_polygon(SQUARE)
    d = signed_distance(sq, [[0, 0], [2, 0], [2, 2], [0.5, 0.25]])
    np.testing.assert_allclose(d, [-1, 1, np.sqrt(2), -0.5], atol=1e-15)
    assert abs(signed_distance(sq, (1.0, 0.3))) < 1e-15


def test_signed_distance_grid_matches_pointwise():
    c = ConvexCurve.ellipse(1.5, 0.7, 64)
    g = GridSpec.covering(-2, 2, -1, 1, 0.1)
    X, Y = g.mesh()
    np.testing.assert_array_equal(signed_distance_grid(c, g), signed_distance(c, np.stack([X, Y], -1)))


def test_hausdorff_concentric_circles():
    assert hausdorff(ConvexCurve.circle(1.0, 512), ConvexCurve.circle(1.5, 512)) == pytest.approx(0.5, abs=1e-12)
    a = ConvexCurve.circle(1.0)
    assert hausdorff(a, a) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(-1, 1), st.floats(-1, 1))
def test_hausdorff_symmetric_and_translation_bound(a, b, dx, dy):
    e = ConvexCurve.ellipse(a, b, 48)
    f = ConvexCurve.ellipse(a, b, 48, center=(dx, dy))
    d1, d2 = hausdorff(e, f), hausdorff(f, e)
    assert d1 == d2
    assert d1 <= np.hypot(dx, dy) + 1e-12


def test_level_set_circle_is_ccw_and_accurate():
    g = GridSpec.covering(-2, 2, -2, 2, 0.05)
    X, Y = g.mesh()
    cs = extract_level_set(ScalarField(g, np.hypot(X, Y) - 1.0))
    assert len(cs) == 1
    c = cs[0]
    assert np.array_equal(c[0], c[-1])
    assert np.abs(np.hypot(c[:, 0], c[:, 1]) - 1).max() < 1e-3
    area = 0.5 * np.sum(c[:-1, 0] * c[1:, 1] - c[1:, 0] * c[:-1, 1])
    assert area > 0


def test_level_set_open_line_and_empty():
    g = GridSpec.covering(-1, 1, -1, 1, 0.25)
    X, Y = g.mesh()
    cs = extract_level_set(ScalarField(g, X + 0.01))
    assert len(cs) == 1 and not np.array_equal(cs[0][0], cs[0][-1])
    np.testing.assert_allclose(cs[0][:, 0], -0.01)
    # sub-level region x < -0.01 on the left: the contour runs upward
    assert cs[0][-1, 1] > cs[0][0, 1]
    assert extract_level_set(ScalarField(g, X * 0 + 1.0)) == []


def test_level_set_saddle_resolved_by_center():
    g = GridSpec(2, 2, 0, 0, 1, 1)
    vals = np.array([[-1.0, 1.0], [1.0, -1.0]])
    below = extract_level_set(ScalarField(g, vals - 0.1))
    above = extract_level_set(ScalarField(g, vals + 0.1))
    assert len(below) == 2 and len(above) == 2
    # centre below the level joins the two negative corners
    mids = [c.mean(axis=0) for c in below]
    assert all(np.hypot(*(m - 0.5)) > 0.1 for m in mids)


def test_half_plane_intersection_square_and_vanished():
    n = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], float)
    sq = half_plane_intersection(np.zeros((4, 2)), n, np.ones(4))
    assert sq.area() == pytest.approx(4.0)
    assert half_plane_intersection([[0, 0], [0, 0]], [[1, 0], [-1, 0]], [-1.0, -1.0]) is VANISHED
    with pytest.raises(GeometryError):
        half_plane_intersection([[0, 0], [0, 0]], [[1, 0], [0, 1]], [1.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.1, 2.0), min_size=8, max_size=8))
def test_half_plane_intersection_satisfies_all_constraints(offs):
    ang = 2 * np.pi * np.arange(8) / 8
    n = np.column_stack([np.cos(ang), np.sin(ang)])
    poly = half_plane_intersection(np.zeros((8, 2)), n, offs)
    assert poly is not VANISHED
    slack = poly.vertices @ n.T - np.asarray(offs)[None, :]
    assert slack.max() < 1e-9


def test_polygon_csv_roundtrip(tmp_path):
    c = ConvexCurve.ellipse(2.0, 1.0, 32)
    write_polygon_csv(tmp_path / "p.csv", c)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,y,nx,ny"
    d = read_polygon_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(d.vertices, c.vertices)
    np.testing.assert_array_equal(d.normals, c.normals)
