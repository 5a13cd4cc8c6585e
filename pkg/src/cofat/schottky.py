"""Reflection groups generated by disjoint circles.

Generators are indexed from 0: index ``i`` is the reflection in
``circles[i]``. A word ``(i1, ..., ik)`` denotes ``R_i1 o ... o R_ik``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geom_kernel import INF, Circle, chordal_distance, reflect_disk, reflect_in_circle


class SchottkyError(ValueError):
    """Invalid circle configuration or word."""


# ---------------------------------------------------------------------------
# words


def reduce(word: Sequence[int]) -> tuple[int, ...]:
    """Cancel adjacent repeats (R o R = id) until none remain."""
    stack: list[int] = []
    for g in word:
        if stack and stack[-1] == g:
            stack.pop()
        else:
            stack.append(int(g))
    return tuple(stack)


def is_reduced(word: Sequence[int]) -> bool:
    return all(a != b for a, b in zip(word, word[1:]))


def enumerate_reduced_words(m: int, k: int) -> list[tuple[int, ...]]:
    """All reduced words over m generators of length <= k, in lexicographic order."""
    if m < 1 or k < 0:
        raise SchottkyError("need m >= 1 and k >= 0")
    out = [()]
    frontier = [()]
    for _ in range(k):
        frontier = [w + (g,) for w in frontier for g in range(m) if not w or w[-1] != g]
        out.extend(frontier)
    return sorted(out)


def _check_indices(word, circles):
    for g in word:
        if not 0 <= g < len(circles):
            raise SchottkyError(f"generator index {g} has no circle")


def apply_word(word: Sequence[int], z, circles: Sequence[Circle]):
    """``R_i1 o ... o R_ik (z)``: the last letter acts first."""
    _check_indices(word, circles)
    for g in reversed(word):
        z = reflect_in_circle(circles[g], z)
    return z


def word_disk(word: Sequence[int], j: int, circles: Sequence[Circle]) -> Circle:
    """The disk ``T(B_j)`` for the word ``T``."""
    _check_indices(tuple(word) + (j,), circles)
    d = circles[j]
    for g in reversed(word):
        d = reflect_disk(circles[g], d)
    return d


# ---------------------------------------------------------------------------
# configurations


def check_disjoint(circles: Sequence[Circle]) -> None:
    for (a, ca), (b, cb) in itertools.combinations(enumerate(circles), 2):
        if abs(ca.center - cb.center) <= ca.radius + cb.radius:
            raise SchottkyError(f"closed disks {a} and {b} intersect")


def random_configuration(rng: np.random.Generator, m: int = 3, box: float = 4.0,
                         min_gap: float = 0.05, max_tries: int = 10000) -> list[Circle]:
    """Random circles bounding pairwise disjoint closed disks in ``[-box, box]^2``."""
    circles: list[Circle] = []
    tries = 0
    while len(circles) < m:
        tries += 1
        if tries > max_tries:
            raise SchottkyError("could not place disjoint circles")
        c = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        r = float(rng.uniform(0.2, 1.5))
        if all(abs(c - o.center) > r + o.radius + min_gap for o in circles):
            circles.append(Circle(c, r))
    return circles


def disk_inside(inner: Circle, outer: Circle, strict: bool = True) -> bool:
    """Closed-disk containment by radius arithmetic."""
    gap = outer.radius - (abs(inner.center - outer.center) + inner.radius)
    return gap > 0 if strict else gap >= 0


@dataclass
class NestedChain:
    disks: list
    diameters: list
    nested: bool
    strictly_decreasing: bool


# Exact disk chains. Circle data are dyadic rationals; after scaling by a
# common power of two they become Gaussian integers. The reflection in
# B(c, r) is z -> M(conj z) with M = [[c, r^2 - |c|^2], [1, -conj c]], and a
# word T_k = R_i1 o ... o R_ik is z -> P_k(z) or P_k(conj z) (k even / odd)
# with P_k = M_i1 conj(M_i2) M_i3 ...; det P_k is a real integer. The image
# of B(z0, r) under w = (az + b)/(cz + d) has centre
# ((a z0 + b) conj(c z0 + d) - a conj(c) r^2) / D and radius r |det| / D,
# D = |c z0 + d|^2 - |c|^2 r^2 > 0 when the pole lies outside the disk.


def _gauss(z: complex, scale: int) -> tuple[int, int]:
    x, y = Fraction(z.real) * scale, Fraction(z.imag) * scale
    if x.denominator != 1 or y.denominator != 1:
        raise SchottkyError("scale does not clear the denominators")  # pragma: no cover
    return int(x), int(y)


def _gmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _gadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _gconj(a):
    return (a[0], -a[1])


def _gnorm(a):
    return a[0] * a[0] + a[1] * a[1]


def _mat_mul(m, n):
    (a, b), (c, d) = m
    (e, f), (g, h) = n
    return ((_gadd(_gmul(a, e), _gmul(b, g)), _gadd(_gmul(a, f), _gmul(b, h))),
            (_gadd(_gmul(c, e), _gmul(d, g)), _gadd(_gmul(c, f), _gmul(d, h))))


def _mat_conj(m):
    return tuple(tuple(_gconj(x) for x in row) for row in m)


class _ExactChain:
    def __init__(self, circles: Sequence[Circle]):
        den = 1
        for c in circles:
            for v in (c.center.real, c.center.imag, c.radius):
                den = max(den, Fraction(v).denominator)
        self.scale = den  # a power of two, so it clears every denominator
        self.disks = [(_gauss(c.center, den), int(Fraction(c.radius) * den)) for c in circles]
        self.mats = []
        for (cz, r) in self.disks:
            self.mats.append(((cz, (r * r - _gnorm(cz), 0)), ((1, 0), (-cz[0], cz[1]))))
        self.dets = [-r * r for _, r in self.disks]

    def image(self, P, det, k, j):
        """``T_k(B_j)`` as (centre numerator, denominator, radius numerator)."""
        z0, r = self.disks[j]
        if k % 2:
            z0 = _gconj(z0)
        (a, b), (c, d) = P
        czd = _gadd(_gmul(c, z0), d)
        D = _gnorm(czd) - _gnorm(c) * r * r
        if D <= 0:
            raise SchottkyError("a reflected disk contains the pole of the word")
        num = _gadd(_gmul(_gadd(_gmul(a, z0), b), _gconj(czd)), _gmul(_gmul(a, _gconj(c)),
                                                                         (-r * r, 0)))
        return num, D, r * abs(det)


def _inside(inner, outer) -> bool:
    """Closed ``inner`` strictly inside ``outer`` (exact)."""
    (n2, d2, r2), (n1, d1, r1) = inner, outer
    gap = r1 * d2 - r2 * d1
    diff = (n2[0] * d1 - n1[0] * d2, n2[1] * d1 - n1[1] * d2)
    return gap > 0 and _gnorm(diff) < gap * gap


def nested_disk_sequence(seq: Sequence[int], depth: int, circles: Sequence[Circle]) -> NestedChain:
    """``D_0 = B_i1`` and ``D_k = R_i1 o ... o R_ik (B_i(k+1))`` for k <= depth.

    Nesting and monotonicity are decided in exact integer arithmetic, so the
    verdict does not depend on how small the disks get; the returned disks
    and diameters are their correctly rounded float values.
    """
    seq = tuple(int(g) for g in seq)
    if len(seq) < depth + 1:
        raise SchottkyError("index sequence shorter than depth + 1")
    if not is_reduced(seq[:depth + 1]):
        raise SchottkyError("adjacent indices must differ")
    check_disjoint(circles)
    _check_indices(seq, circles)
    ex = _ExactChain(circles)
    P = (((1, 0), (0, 0)), ((0, 0), (1, 0)))
    det = 1
    exact = [ex.image(P, det, 0, seq[0])]
    for k in range(1, depth + 1):
        g = seq[k - 1]
        P = _mat_mul(P, ex.mats[g] if k % 2 else _mat_conj(ex.mats[g]))
        det *= ex.dets[g]
        exact.append(ex.image(P, det, k, seq[k]))
    disks = [Circle(complex(float(Fraction(n[0], D * ex.scale)),
                            float(Fraction(n[1], D * ex.scale))),
                    float(Fraction(R, D * ex.scale))) for n, D, R in exact]
    nested = all(_inside(b, a) for a, b in zip(exact, exact[1:]))
    decreasing = all(rb * da < ra * db for (_, da, ra), (_, db, rb) in zip(exact, exact[1:]))
    return NestedChain(disks, [d.diameter for d in disks], nested, decreasing)


# ---------------------------------------------------------------------------
# trichotomy


@dataclass(frozen=True)
class Interior:
    word: tuple


@dataclass(frozen=True)
class Boundary:
    word: tuple
    component: int


@dataclass(frozen=True)
class Buried:
    prefix: tuple


@dataclass(frozen=True)
class Unresolved:
    depth: int


def _distance_to_circle(z, c: Circle) -> float:
    if z is INF:
        return chordal_distance(INF, c.center + c.radius)  # any point of the circle
    d = complex(z) - c.center
    if d == 0:
        return chordal_distance(z, c.center + c.radius)
    return chordal_distance(z, c.center + c.radius * d / abs(d))


def _spherical_diam(c: Circle) -> float:
    u = c.center / abs(c.center) if c.center != 0 else 1.0
    return chordal_distance(c.center - c.radius * u, c.center + c.radius * u)


def classify_point(x, circles: Sequence[Circle], cap: int = 16, eps: float = 1e-9):
    """Interior / Boundary / Buried / Unresolved label of a point of the sphere.

    Descends through the orbit disks containing ``x`` in original
    coordinates. A circle counts as a boundary hit when the chordal distance
    from ``x`` is at most ``eps * min(1, diam)``, so that a point deep inside
    a chain of tiny disks is not mistaken for a boundary point merely
    because the disks are small. Buried requires the full nested chain
    ``D_0 ... D_cap`` with ``diam(D_cap) < eps``.
    """
    check_disjoint(circles)
    if x is INF:
        for j, c in enumerate(circles):
            if _distance_to_circle(INF, c) <= eps * min(1.0, _spherical_diam(c)):
                return Boundary((), j)
        return Interior(())
    x = complex(x)
    word: tuple = ()
    for level in range(cap + 1):
        children = [(j, word_disk(word, j, circles)) for j in range(len(circles))
                    if not word or j != word[-1]]
        for j, d in children:
            if _distance_to_circle(x, d) <= eps * min(1.0, _spherical_diam(d)):
                return Boundary(word, j)
        inside = [(j, d) for j, d in children if d.contains(x)]
        if not inside:
            return Interior(word)
        j, d = inside[0]
        if level == cap:
            if _spherical_diam(d) < eps:
                return Buried(word + (j,))
            return Unresolved(cap)
        word = word + (j,)
    return Unresolved(cap)  # pragma: no cover


def limit_point(seq_period: Sequence[int], circles: Sequence[Circle], depth: int = 200):
    """Approximate point of the nested intersection for a periodic index sequence."""
    seq = list(itertools.islice(itertools.cycle(seq_period), depth + 1))
    d = circles[seq[0]]
    for k in range(1, depth + 1):
        nxt = word_disk(seq[:k], seq[k], circles)
        if nxt.radius < 1e-15 * max(1.0, abs(nxt.center)):
            return nxt.center
        d = nxt
    return d.center


# ---------------------------------------------------------------------------
# enlargement regions


def build_W_regions(circles: Sequence[Circle], n: int) -> list[Circle]:
    """Concentric regions ``W_i(n) = (1 + 1/(n+1)) B_i``.

    Requires the ``(1 + 1/n)``-enlargements to be pairwise disjoint.
    """
    if n < 1:
        raise SchottkyError("n must be >= 1")
    big = 1.0 + 1.0 / n
    for (a, ca), (b, cb) in itertools.combinations(enumerate(circles), 2):
        if abs(ca.center - cb.center) <= big * (ca.radius + cb.radius):
            raise SchottkyError(f"(1+1/n)-enlargements of circles {a} and {b} overlap")
    return [c.scaled(1.0 + 1.0 / (n + 1)) for c in circles]


def label_to_row(label) -> tuple[str, int]:
    if isinstance(label, Interior):
        return "interior", len(label.word)
    if isinstance(label, Boundary):
        return "boundary", len(label.word)
    if isinstance(label, Buried):
        return "buried", len(label.prefix)
    return "unresolved", label.depth


def classify_raster(circles, x_range, y_range, nx: int, ny: int, cap: int = 16,
                    eps: float = 1e-9):
    """Rows ``(x, y, label, depth)`` over a regular grid of points."""
    xs = np.linspace(*x_range, nx)
    ys = np.linspace(*y_range, ny)
    rows = []
    for y in ys:
        for x in xs:
            label, depth = label_to_row(classify_point(complex(x, y), circles, cap, eps))
            rows.append((float(x), float(y), label, depth))
    return rows
