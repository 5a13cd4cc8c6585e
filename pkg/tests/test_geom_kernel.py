import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cofat.geom_kernel import (INF, AffineMap, Circle, DegenerateImage, GeometryError,
                               affine_from_triangles, chordal_distance, dilatation,
                               exp_lift, exp_project, reflect_disk, reflect_in_circle,
                               spherical_derivative_norm, spherical_diameter)

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
points = st.builds(complex, coord, coord)


def sphere(z):
    """Independent oracle: inverse stereographic projection in R^3."""
    if z is INF:
        return np.array([0.0, 0.0, 1.0])
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, r2 - 1]) / (1 + r2)


# chordal metric ----------------------------------------------------------


def test_chordal_examples():
    assert chordal_distance(0, INF) == 2.0
    assert chordal_distance(1 + 2j, 1 + 2j) == 0.0
    assert chordal_distance(0, 1) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert chordal_distance(INF, INF) == 0.0


@given(points, points)
def test_chordal_matches_embedding(z, w):
    expect = float(np.linalg.norm(sphere(z) - sphere(w)))
    assert chordal_distance(z, w) == pytest.approx(expect, rel=1e-9, abs=1e-12)


@given(points)
def test_chordal_to_infinity(z):
    assert chordal_distance(z, INF) == pytest.approx(2 / math.sqrt(1 + abs(z) ** 2), rel=1e-12)


def test_chordal_metric_axioms_random():
    rng = np.random.default_rng(0)
    z = (rng.standard_cauchy(10_000) + 1j * rng.standard_cauchy(10_000))
    w = np.roll(z, 1)
    u = np.roll(z, 2)
    for a, b, c in zip(z, w, u):
        ab, bc, ac = chordal_distance(a, b), chordal_distance(b, c), chordal_distance(a, c)
        assert ab == chordal_distance(b, a)
        assert ac <= ab + bc + 1e-12
        assert ab <= 2.0


def test_chordal_huge_coordinates_no_overflow():
    assert chordal_distance(1e200, 2e200) == pytest.approx(1e-200, rel=1e-9)


def test_nan_rejected():
    with pytest.raises(GeometryError):
        chordal_distance(complex(math.nan, 0), 0)


def test_spherical_diameter_examples():
    assert spherical_diameter([1 + 1j]) == 0.0
    assert spherical_diameter([0, INF]) == 2.0
    circle = np.exp(2j * np.pi * np.arange(256) / 256)
    assert spherical_diameter(circle) == pytest.approx(2.0, abs=1e-12)


def test_spherical_diameter_brute_force():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=300) + 1j * rng.normal(size=300)
    brute = max(chordal_distance(a, b) for a in pts for b in pts)
    assert spherical_diameter(pts) == pytest.approx(brute, rel=1e-12)


# reflections -------------------------------------------------------------


def test_reflection_examples():
    unit = Circle(0j, 1.0)
    assert reflect_in_circle(unit, 2) == pytest.approx(0.5)
    assert reflect_in_circle(unit, 1j) == pytest.approx(1j)
    assert reflect_in_circle(unit, 0.5j) == pytest.approx(2j)
    assert reflect_in_circle(unit, 0) is INF
    assert reflect_in_circle(unit, INF) == 0


def test_reflection_involution_random():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        c = Circle(complex(*rng.normal(size=2)), float(rng.uniform(0.1, 3)))
        z = complex(*rng.normal(scale=3, size=2))
        back = reflect_in_circle(c, reflect_in_circle(c, z))
        assert abs(back - z) <= 1e-12 * max(1.0, abs(z)) * 10


def test_reflect_disk_examples():
    unit = Circle(0j, 1.0)
    d = reflect_disk(unit, Circle(3, 1))
    assert d.center == pytest.approx(3 / 8) and d.radius == pytest.approx(1 / 8)
    assert reflect_disk(unit, unit) == unit
    d = reflect_disk(unit, Circle(0j, 0.5))
    assert d.center == pytest.approx(0) and d.radius == pytest.approx(2.0)


def test_reflect_disk_line_image():
    with pytest.raises(DegenerateImage):
        reflect_disk(Circle(0j, 1.0), Circle(1.0, 1.0))


@settings(max_examples=200)
@given(points, st.floats(0.1, 5), points, st.floats(0.01, 2))
def test_reflect_disk_maps_boundary(cc, cr, dc, dr):
    c, d = Circle(cc, cr), Circle(dc, dr)
    if abs(abs(dc - cc) - dr) < 1e-3:
        return  # nearly through the centre: image close to a line
    img = reflect_disk(c, d)
    for t in np.linspace(0, 2 * np.pi, 7):
        z = dc + dr * cmath.exp(1j * t)
        w = reflect_in_circle(c, z)
        assert abs(abs(w - img.center) - img.radius) <= 1e-7 * max(1.0, img.radius, abs(w))


# exponential chart -------------------------------------------------------


def test_exp_examples():
    assert exp_project(0) == 1
    assert exp_project(0.5) == pytest.approx(-1)
    assert abs(exp_project(1j)) == pytest.approx(math.exp(2 * math.pi))
    assert exp_lift(1) == 0
    assert exp_lift(-1) == pytest.approx(0.5)
    assert exp_lift(math.exp(2 * math.pi)) == pytest.approx(1j)
    with pytest.raises(GeometryError):
        exp_lift(0)


def test_exp_periodic():
    rng = np.random.default_rng(3)
    z = rng.uniform(-3, 3, 1000) + 1j * rng.uniform(-1, 1, 1000)
    assert np.allclose(exp_project(z + 1), exp_project(z), rtol=1e-12, atol=0)


@given(st.floats(0, 1, exclude_max=True), st.floats(-2, 2))
def test_lift_inverts_projection(x, y):
    z = complex(x, y)
    w = exp_lift(exp_project(z))
    if x > 1e-12 and 1 - x > 1e-12:
        assert abs(w - z) <= 1e-9
    assert abs(exp_project(w) - exp_project(z)) <= 1e-9 * abs(exp_project(z))


def test_lift_branch():
    assert exp_lift(-1, 3) == pytest.approx(3.5)


# affine maps -------------------------------------------------------------


def test_affine_examples():
    tri = ((0, 0), (1, 0), (0, 1))
    assert np.array_equal(affine_from_triangles(tri, tri).linear, np.eye(2))
    assert np.array_equal(affine_from_triangles(tri, ((0, 0), (2, 0), (0, 2))).linear,
                          2 * np.eye(2))
    assert np.array_equal(affine_from_triangles(tri, ((0, 0), (2, 0), (0, 1))).linear,
                          np.diag([2.0, 1.0]))
    with pytest.raises(GeometryError):
        affine_from_triangles(((0, 0), (1, 1), (2, 2)), tri)


def test_affine_exact_on_rational_vertices():
    src = [(Fraction(1, 3), Fraction(0)), (Fraction(1), Fraction(1, 7)), (Fraction(0), Fraction(1))]
    dst = [(Fraction(2), Fraction(1, 5)), (Fraction(3, 11), Fraction(1)), (Fraction(-1), Fraction(2))]
    m = affine_from_triangles(src, dst)
    for s, t in zip(src, dst):
        w = m(complex(float(s[0]), float(s[1])))
        assert abs(w - complex(float(t[0]), float(t[1]))) <= 1e-12


@settings(max_examples=200)
@given(st.lists(points, min_size=6, max_size=6))
def test_affine_maps_vertices(pts):
    src, dst = pts[:3], pts[3:]
    area = lambda t: ((t[1] - t[0]).conjugate() * (t[2] - t[0])).imag  # noqa: E731
    if abs(area(src)) < 1e-2 or abs(area(dst)) < 1e-2:
        return
    m = affine_from_triangles(src, dst)
    for s, t in zip(src, dst):
        assert abs(m(s) - t) <= 1e-9 * max(1.0, abs(t)) * max(1.0, 1 / abs(area(src)))


def test_dilatation_examples():
    assert dilatation(np.eye(2)) == 1.0
    assert dilatation(np.diag([2.0, 1.0])) == pytest.approx(2.0)
    t = 0.7
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert dilatation(rot) == pytest.approx(1.0)


def test_dilatation_similarity_invariant():
    rng = np.random.default_rng(4)
    for _ in range(200):
        a = rng.normal(size=(2, 2))
        s1 = AffineMap.similarity(complex(*rng.normal(size=2)))
        s2 = AffineMap.similarity(complex(*rng.normal(size=2)))
        m = AffineMap(a, 0j)
        assert dilatation(s1.compose(m).compose(s2)) == pytest.approx(dilatation(m), rel=1e-9)


class _Lin:
    def __init__(self, scale):
        self.scale = scale

    def value_and_jacobian(self, z):
        return self.scale * z, self.scale * np.eye(2)


def test_spherical_derivative_examples():
    assert spherical_derivative_norm(_Lin(1), 0) == 1.0
    assert spherical_derivative_norm(_Lin(2), 0) == 2.0
    assert spherical_derivative_norm(_Lin(1), 1) == 1.0
