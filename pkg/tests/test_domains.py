import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cofat.domains import (ComponentCorrespondence, DiskComponent, DomainError,
                           GeneralizedJordanDomain, PointComponent, PolygonComponent,
                           SlitComponent, eccentric_distortion, eccentricity, ell2_diameters,
                           ellipse_polygon, fatness_margin, hausdorff_content, lens_area,
                           polygon_disk_area, segment_disk_length)
from cofat.geom_kernel import chordal_distance

SQUARE = np.array([0, 1, 1 + 1j, 1j])


def grid_area(inside, box, n=2000):
    """Midpoint-rule oracle for the area of a planar set."""
    x0, y0, x1, y1 = box
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    gx, gy = np.meshgrid(x0 + hx * (np.arange(n) + 0.5), y0 + hy * (np.arange(n) + 0.5))
    return float(inside(gx, gy).sum()) * hx * hy


# exact area helpers -------------------------------------------------------


def test_lens_area_cases():
    assert lens_area(1, 1, 3) == 0.0
    assert lens_area(1, 0.5, 0.2) == pytest.approx(math.pi * 0.25)
    # two unit disks at distance 1
    assert lens_area(1, 1, 1) == pytest.approx(2 * math.pi / 3 - math.sqrt(3) / 2)


def test_lens_area_against_grid():
    r1, r2, d = 1.0, 0.7, 1.2
    ref = grid_area(lambda x, y: (x * x + y * y <= r1 * r1) & ((x - d) ** 2 + y * y <= r2 * r2),
                    (-1, -1, 2, 1))
    assert lens_area(r1, r2, d) == pytest.approx(ref, rel=2e-3)


def test_polygon_disk_area_against_grid():
    xs, ys = SQUARE.real.copy(), SQUARE.imag.copy()
    ref = grid_area(lambda x, y: (x - 0.2) ** 2 + (y - 0.9) ** 2 <= 0.6 ** 2, (0, 0, 1, 1))
    assert polygon_disk_area(xs, ys, 0.2, 0.9, 0.6) == pytest.approx(ref, rel=2e-3)
    assert polygon_disk_area(xs, ys, 0.5, 0.5, 5.0) == pytest.approx(1.0)
    assert polygon_disk_area(xs, ys, 0.0, 0.0, 0.5) == pytest.approx(math.pi / 16)


def test_segment_disk_length():
    assert segment_disk_length(-2, 2, 0, 1) == pytest.approx(2.0)
    assert segment_disk_length(-2 + 2j, 2 + 2j, 0, 1) == 0.0
    assert segment_disk_length(0, 0.5, 0, 1) == pytest.approx(0.5)


# components and domains ---------------------------------------------------


def test_component_validation():
    with pytest.raises(DomainError):
        DiskComponent(0j, 0.0)
    with pytest.raises(DomainError):
        PolygonComponent(np.array([0, 1]))
    with pytest.raises(DomainError):
        PolygonComponent(np.array([0, 1, 2]))
    with pytest.raises(DomainError):
        SlitComponent(1j, 1j)


def test_polygon_orientation_normalised():
    p = PolygonComponent(SQUARE[::-1])
    assert p.area() == pytest.approx(1.0)


def test_spherical_diameters_against_sampling():
    rng = np.random.default_rng(0)
    for _ in range(30):
        a, b = (complex(*rng.normal(scale=2, size=2)) for _ in range(2))
        s = SlitComponent(a, b)
        pts = a + (b - a) * np.linspace(0, 1, 4001)
        brute = max(chordal_distance(p, q) for p in pts[::40] for q in pts[::40])
        assert s.spherical_diameter() >= brute - 1e-12
        assert s.spherical_diameter() <= brute + 1e-3
    d = DiskComponent(2 + 1j, 0.5)
    pts = d.boundary_samples(720)
    brute = max(chordal_distance(p, q) for p in pts for q in pts)
    assert d.spherical_diameter() == pytest.approx(brute, abs=1e-4)


def test_domain_json_roundtrip():
    obj = {"components": [
        {"kind": "circle", "center": [0, 0], "radius": 1},
        {"kind": "polygon", "vertices": [[3, 0], [4, 0], [4, 1], [3, 1]]},
        {"kind": "point", "at": [-3, 0]},
        {"kind": "slit", "from": [0, 3], "to": [1, 3]}], "tail_rule": "none"}
    dom = GeneralizedJordanDomain.from_json(json.dumps(obj))
    assert [c.kind for c in dom.components] == ["circle", "polygon", "point", "slit"]
    again = GeneralizedJordanDomain.from_json(dom.to_json())
    assert again.to_json() == dom.to_json()


def test_domain_rejects_overlap_and_garbage():
    with pytest.raises(DomainError, match="0 and 1"):
        GeneralizedJordanDomain([DiskComponent(0j, 1.0), DiskComponent(1.5 + 0j, 1.0)])
    with pytest.raises(DomainError):
        GeneralizedJordanDomain([DiskComponent(0j, 1.0), SlitComponent(0.5 + 0j, 3 + 0j)])
    with pytest.raises(DomainError):
        GeneralizedJordanDomain.from_json({"components": [{"kind": "blob"}]})
    with pytest.raises(DomainError):
        GeneralizedJordanDomain.from_json({"components": [{"kind": "circle"}]})
    with pytest.raises(DomainError):
        GeneralizedJordanDomain.from_json({"nope": []})


def test_correspondence():
    a = GeneralizedJordanDomain([DiskComponent(0j, 1.0), PointComponent(5 + 0j)])
    corr = ComponentCorrespondence.identity(a, a)
    assert corr.diameter(1) == 0.0
    assert corr.diameter(0) == pytest.approx(chordal_distance(-1, 1))
    with pytest.raises(DomainError):
        ComponentCorrespondence(a, a, {0: 0, 1: 0})


def test_ell2_examples():
    dom = GeneralizedJordanDomain([DiskComponent(0j, 0.25)])
    d = dom.components[0].spherical_diameter()
    assert ell2_diameters(dom) == (pytest.approx(d * d), None)
    assert ell2_diameters(GeneralizedJordanDomain([])) == (0.0, None)


# fatness ------------------------------------------------------------------


def test_fatness_point_and_slit():
    assert fatness_margin(PointComponent(1j)).value == math.inf
    assert fatness_margin(SlitComponent(0j, 1 + 0j)).value == 0.0


def test_fatness_disk():
    est = fatness_margin(DiskComponent(0.3 - 2j, 1.7))
    assert est.value == pytest.approx(math.pi / 4, rel=1e-3)
    assert est.value >= 0.7


def test_fatness_square_matches_corner_oracle():
    # corner-centred balls: the ratio tends to area(K)/r^2 = 1/2 as r -> sqrt 2
    est = fatness_margin(PolygonComponent(SQUARE))
    ratios = []
    for r in np.linspace(0.1, math.sqrt(2) - 1e-9, 60):
        area = grid_area(lambda x, y: x * x + y * y < r * r, (0, 0, 1, 1), n=600)
        ratios.append(area / r ** 2)
    assert 0 < est.value <= math.pi / 4
    assert est.value == pytest.approx(min(ratios), rel=0.01)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.1, 10))
def test_fatness_scale_invariant(lam):
    tri = np.array([0, 1, 0.3 + 0.8j])
    base = fatness_margin(PolygonComponent(tri)).value
    assert fatness_margin(PolygonComponent(lam * tri)).value == pytest.approx(base, rel=0.01)


def test_fatness_spherical_small_disk_close_to_planar():
    d = DiskComponent(0.1 + 0.1j, 0.05)
    sph = fatness_margin(d, metric="spherical").value
    # the area element is ~ (2 / (1 + |z|^2))^2 = 4 near 0 while chordal radii are ~ 2 r
    assert sph == pytest.approx(math.pi / 4, rel=0.05)


def test_fatness_bad_metric():
    with pytest.raises(DomainError):
        fatness_margin(DiskComponent(0j, 1.0), metric="taxicab")


# Hausdorff content ---------------------------------------------------------


def test_hausdorff_examples():
    assert hausdorff_content([np.array([0, 1 + 0j])]) == 1.0
    assert hausdorff_content([0j]) == 0.0
    assert hausdorff_content([0j, 1 + 0j], budget=1) == 1.0
    assert hausdorff_content([0j, 1 + 0j]) == 0.0


@settings(max_examples=50)
@given(st.lists(st.complex_numbers(max_magnitude=10), min_size=2, max_size=12))
def test_hausdorff_connected_polyline_is_diameter(pts):
    arr = np.array(pts)
    diam = float(np.max(np.abs(arr[:, None] - arr[None, :])))
    assert hausdorff_content([arr]) == diam


def test_hausdorff_monotone_and_subadditive():
    rng = np.random.default_rng(4)
    for _ in range(30):
        pieces = [np.cumsum(rng.normal(size=3) + 1j * rng.normal(size=3)) + 5 * k
                  for k in range(5)]
        whole = hausdorff_content(pieces)
        assert hausdorff_content(pieces[:3]) <= whole + 1e-12
        assert whole <= hausdorff_content(pieces[:2]) + hausdorff_content(pieces[2:]) + 1e-12


def test_hausdorff_rejects_bad_input():
    with pytest.raises(DomainError):
        hausdorff_content([np.array([])])
    with pytest.raises(DomainError):
        hausdorff_content([0j], budget=0)


# eccentricity ---------------------------------------------------------------


def test_eccentricity_examples():
    assert eccentricity(DiskComponent(1j, 3.0)).value == 1.0
    assert eccentricity(ellipse_polygon(0j, 2, 1)).value == pytest.approx(2.0, rel=1e-3)
    sq = np.array([-1 - 1j, 1 - 1j, 1 + 1j, -1 + 1j])
    assert eccentricity(sq).value == pytest.approx(math.sqrt(2), rel=1e-6)


def test_eccentricity_certificate_is_valid():
    tri = PolygonComponent(np.array([0, 3, 1 + 2j]))
    cert = eccentricity(tri)
    assert cert.value >= 1
    assert tri.contains(np.array([cert.center]))[0]
    assert cert.outer_radius / cert.inner_radius == pytest.approx(cert.value)
    with pytest.raises(DomainError):
        eccentricity(np.array([0, 1]))


def test_eccentric_distortion_identity_balls():
    est = eccentric_distortion(lambda z: z, 0.2 + 0.1j, [0.1, 0.05, 0.025])
    assert est.value == pytest.approx(1.0, abs=1e-3)


def test_eccentric_distortion_pool_monotone():
    f = lambda z: z + 0.3 * z.conjugate()  # noqa: E731
    base = eccentric_distortion(f, 0j, [0.2, 0.1])
    wide = eccentric_distortion(f, 0j, [0.2, 0.1],
                                families={"ellipses": lambda s: ellipse_polygon(0j, s / 2,
                                                                                s / 2 * 0.7 / 1.3,
                                                                                512)})
    assert wide.value <= base.value
    # a ball maps to an ellipse with semi-axes 1.3 : 0.7
    assert base.value == pytest.approx(1.3 / 0.7, rel=1e-3)
    with pytest.raises(DomainError):
        eccentric_distortion(f, 0j, [])
