import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cofat import schottky as sk
from cofat.geom_kernel import Circle

TWO = [Circle(0j, 1.0), Circle(3 + 0j, 1.0)]


# words -------------------------------------------------------------------


def test_reduce_examples():
    assert sk.reduce([0, 0]) == ()
    assert sk.reduce([0, 1, 1, 0]) == ()
    assert sk.reduce([0, 1, 0]) == (0, 1, 0)


@given(st.lists(st.integers(0, 3), max_size=30))
def test_reduce_idempotent_and_reduced(word):
    r = sk.reduce(word)
    assert sk.reduce(r) == r
    assert sk.is_reduced(r)


def test_enumerate_examples():
    words = sk.enumerate_reduced_words(3, 2)
    assert len([w for w in words if len(w) == 1]) == 3
    assert len([w for w in words if len(w) == 2]) == 6
    assert words == sorted(words)
    assert {len(w) for w in sk.enumerate_reduced_words(1, 3)} == {0, 1}
    with pytest.raises(sk.SchottkyError):
        sk.enumerate_reduced_words(0, 2)


@pytest.mark.parametrize("m,k", [(2, 5), (3, 4), (4, 3)])
def test_enumerate_counts(m, k):
    words = sk.enumerate_reduced_words(m, k)
    for j in range(1, k + 1):
        assert len([w for w in words if len(w) == j]) == m * (m - 1) ** (j - 1)
    assert all(sk.is_reduced(w) for w in words)
    assert len(set(words)) == len(words)


def test_apply_word_examples():
    assert sk.apply_word((), 1 + 2j, TWO) == 1 + 2j
    assert sk.apply_word((1, 1), 0.3 + 0.2j, TWO) == pytest.approx(0.3 + 0.2j)
    assert sk.apply_word((0,), 2, TWO) == pytest.approx(0.5)
    with pytest.raises(sk.SchottkyError):
        sk.apply_word((5,), 0, TWO)


@settings(max_examples=100)
@given(st.lists(st.integers(0, 2), max_size=8), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_word_respects_reduction(word, x, y):
    circles = [Circle(0j, 1.0), Circle(4 + 0j, 1.0), Circle(2 + 3j, 0.7)]
    z = complex(x, y)
    a = sk.apply_word(word, z, circles)
    b = sk.apply_word(sk.reduce(word), z, circles)
    if a is sk.INF or b is sk.INF:
        assert a is b
        return
    assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


# nested disks ------------------------------------------------------------


def test_nested_examples():
    ch = sk.nested_disk_sequence((0, 1), 1, TWO)
    assert ch.disks[0] == Circle(0j, 1.0)
    assert ch.disks[1].center == pytest.approx(3 / 8) and ch.disks[1].radius == pytest.approx(1 / 8)
    assert ch.nested and ch.strictly_decreasing
    ch0 = sk.nested_disk_sequence((1,), 0, TWO)
    assert ch0.disks == [TWO[1]]
    alt = sk.nested_disk_sequence((0, 1, 0, 1, 0), 4, TWO)
    assert all(a > b for a, b in zip(alt.diameters, alt.diameters[1:]))


def test_nested_matches_float_reflection():
    rng = np.random.default_rng(11)
    for _ in range(20):
        circles = sk.random_configuration(rng, 3)
        word = (0, 2, 1, 0, 1)
        ch = sk.nested_disk_sequence(word, 4, circles)
        for k, d in enumerate(ch.disks):
            ref = sk.word_disk(word[:k], word[k], circles)
            assert abs(ref.center - d.center) <= 1e-9 * max(1.0, abs(d.center))
            assert ref.radius == pytest.approx(d.radius, rel=1e-9)


def test_nested_deep_chain_exact():
    # radii fall below 1e-17 here; the verdict must still be exact
    rng = np.random.default_rng(5)
    circles = sk.random_configuration(rng, 3)
    ch = sk.nested_disk_sequence((0, 1, 2) * 4, 11, circles)
    assert ch.nested and ch.strictly_decreasing
    assert ch.diameters[-1] < 1e-12


def test_nested_rejects_bad_input():
    with pytest.raises(sk.SchottkyError):
        sk.nested_disk_sequence((0, 0), 1, TWO)
    with pytest.raises(sk.SchottkyError):
        sk.nested_disk_sequence((0, 1), 1, [Circle(0j, 1.0), Circle(1.5 + 0j, 1.0)])
    with pytest.raises(sk.SchottkyError):
        sk.nested_disk_sequence((0,), 1, TWO)


def test_random_configuration_disjoint():
    rng = np.random.default_rng(0)
    for _ in range(50):
        sk.check_disjoint(sk.random_configuration(rng, 4))


# trichotomy --------------------------------------------------------------


def test_classify_examples():
    assert sk.classify_point(1.5 + 2j, TWO) == sk.Interior(())
    assert sk.classify_point(1j, TWO) == sk.Boundary((), 0)
    x = sk.limit_point((0, 1), TWO)
    label = sk.classify_point(x, TWO, cap=16, eps=1e-6)
    assert isinstance(label, sk.Buried)
    assert label.prefix[:4] == (0, 1, 0, 1)


def test_classify_inside_reflected_disk():
    # a point of B_0 outside the reflected disk R_0(B_1) is in R_0(U)
    label = sk.classify_point(-0.5 + 0j, TWO)
    assert label == sk.Interior((0,))
    # on the circle R_0(S_1)
    img = sk.word_disk((0,), 1, TWO)
    label = sk.classify_point(img.center + img.radius * cmath.exp(0.3j), TWO)
    assert label == sk.Boundary((0,), 1)


def test_classify_unresolved_reports_cap():
    x = sk.limit_point((0, 1), TWO)
    assert sk.classify_point(x, TWO, cap=2, eps=1e-9) == sk.Unresolved(2)


def test_classify_labels_are_consistent_with_geometry():
    rng = np.random.default_rng(3)
    circles = [Circle(0j, 1.0), Circle(3 + 0j, 1.0), Circle(1.5 + 2.5j, 0.8)]
    pts = rng.uniform(-1.5, 4.5, 10_000) + 1j * rng.uniform(-1.5, 3.5, 10_000)
    for x in pts[:2000]:
        label = sk.classify_point(x, circles, cap=6)
        if isinstance(label, sk.Interior):
            # x is in T(U): it avoids every child disk of the word
            for j in range(3):
                if not label.word or j != label.word[-1]:
                    assert not sk.word_disk(label.word, j, circles).contains(x)
        elif isinstance(label, sk.Boundary):
            d = sk.word_disk(label.word, label.component, circles)
            assert abs(abs(x - d.center) - d.radius) <= 1e-6


# W regions ---------------------------------------------------------------


def test_w_examples():
    assert sk.build_W_regions([Circle(0j, 1.0)], 1) == [Circle(0j, 1.5)]
    radii = [sk.build_W_regions([Circle(0j, 1.0)], n)[0].radius for n in (1, 10, 100, 1000)]
    assert all(a > b for a, b in zip(radii, radii[1:])) and radii[-1] - 1 < 1e-3
    with pytest.raises(sk.SchottkyError, match="0 and 1"):
        sk.build_W_regions([Circle(0j, 1.0), Circle(2.1 + 0j, 1.0)], 1)
    with pytest.raises(sk.SchottkyError):
        sk.build_W_regions([Circle(0j, 1.0)], 0)


@settings(max_examples=50)
@given(st.integers(1, 50))
def test_w_sandwich(n):
    circles = [Circle(0j, 1.0), Circle(5 + 0j, 0.5), Circle(2 + 4j, 1.2)]
    for b, w in zip(circles, sk.build_W_regions(circles, n)):
        assert sk.disk_inside(b, w, strict=True)
        assert sk.disk_inside(w, b.scaled(1 + 1 / n), strict=True)
        assert w.radius / b.radius <= 1 + 1 / n


def test_raster_rows():
    rows = sk.classify_raster(TWO, (-1, 4), (-1, 1), 5, 3, cap=4)
    assert len(rows) == 15
    assert {r[2] for r in rows} <= {"interior", "boundary", "buried", "unresolved"}
