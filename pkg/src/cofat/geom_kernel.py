"""Planar and spherical primitives.

The sphere carries the chordal metric of the unit sphere (diameter 2) and the
area element ``(2 / (1 + |z|^2))^2 dA``. The point at infinity is the
singleton ``INF``; every metric operation accepts it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

TWO_PI = 2.0 * math.pi


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


class GeometryError(ValueError):
    """Rejected geometric input (degenerate triangle, zero lift, ...)."""


class DegenerateImage(GeometryError):
    """The reflected circle passes through the centre of inversion and becomes a line."""


def is_inf(z) -> bool:
    return z is INF


def _check_finite(z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise GeometryError(f"non-finite coordinate {z!r}; use INF for the point at infinity")
    return z


# ---------------------------------------------------------------------------
# metric


def chordal_distance(z, w) -> float:
    """Chordal distance on the unit sphere; ``chordal_distance(0, INF) == 2``."""
    if z is INF and w is INF:
        return 0.0
    if z is INF or w is INF:
        finite = _check_finite(w if z is INF else z)
        return 2.0 / math.hypot(1.0, abs(finite))
    z, w = _check_finite(z), _check_finite(w)
    if abs(z) > 1.0 and abs(w) > 1.0:
        # the metric is invariant under z -> 1/z; this chart avoids overflow
        z, w = 1.0 / z, 1.0 / w
    return 2.0 * abs(z - w) / (math.hypot(1.0, abs(z)) * math.hypot(1.0, abs(w)))


def to_sphere(points) -> np.ndarray:
    """Stereographic images on the unit sphere (``INF`` goes to the north pole)."""
    pts = list(points) if not isinstance(points, np.ndarray) else points
    out = np.empty((len(pts), 3))
    for k, z in enumerate(pts):
        if z is INF:
            out[k] = (0.0, 0.0, 1.0)
            continue
        z = _check_finite(z)
        r = abs(z)
        if r > 1.0:
            # chart at infinity
            u = 1.0 / z
            s = 1.0 + abs(u) ** 2
            out[k] = (2.0 * u.real / s, -2.0 * u.imag / s, (1.0 - abs(u) ** 2) / s)
        else:
            s = 1.0 + r * r
            out[k] = (2.0 * z.real / s, 2.0 * z.imag / s, (r * r - 1.0) / s)
    return out


def sphere_array(z: np.ndarray) -> np.ndarray:
    """Vectorised ``to_sphere`` for finite complex arrays; returns shape (..., 3)."""
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    s = 1.0 + r2
    return np.stack([2.0 * z.real / s, 2.0 * z.imag / s, (r2 - 1.0) / s], axis=-1)


def chordal_array(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Elementwise chordal distance of finite complex arrays."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.abs(z - w) / (np.hypot(1.0, np.abs(z)) * np.hypot(1.0, np.abs(w)))


def spherical_diameter(points: Iterable) -> float:
    """Largest pairwise chordal distance of a non-empty finite set."""
    xyz = to_sphere(list(points))
    if xyz.shape[0] == 0:
        raise GeometryError("empty point set")
    if xyz.shape[0] > 64:
        try:
            xyz = xyz[ConvexHull(xyz).vertices]
        except QhullError:
            pass  # flat or tiny sets: brute force is still exact
    best = 0.0
    for start in range(0, xyz.shape[0], 512):
        block = xyz[start:start + 512]
        d = np.linalg.norm(block[:, None, :] - xyz[None, :, :], axis=-1)
        best = max(best, float(d.max()))
    return min(best, 2.0)


def spherical_length(z: np.ndarray) -> float:
    """Spherical length of a finite polyline, by midpoint rule on each segment."""
    z = np.asarray(z, dtype=complex)
    seg = np.diff(z)
    mid = 0.5 * (z[1:] + z[:-1])
    return float(np.sum(2.0 * np.abs(seg) / (1.0 + np.abs(mid) ** 2)))


# ---------------------------------------------------------------------------
# circles and reflections


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _check_finite(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError(f"circle radius must be positive, got {self.radius}")

    def scaled(self, factor: float) -> "Circle":
        return Circle(self.center, self.radius * factor)

    def contains(self, z, closed: bool = True) -> bool:
        if z is INF:
            return False
        d = abs(complex(z) - self.center)
        return d <= self.radius if closed else d < self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def reflect_in_circle(c: Circle, z):
    """Reflection across ``c``: ``center + r^2 / conj(z - center)``."""
    if z is INF:
        return c.center
    d = _check_finite(z) - c.center
    if d == 0:
        return INF
    return c.center + c.radius ** 2 / d.conjugate()


def reflect_disk(c: Circle, d: Circle) -> Circle:
    """Circle bounding the image of the disk ``d`` under reflection in ``c``.

    When the centre of ``c`` lies inside ``d`` the image region is the
    exterior of the returned circle.
    """
    if d == c:
        return c
    p = d.center - c.center
    power = abs(p) ** 2 - d.radius ** 2
    if abs(power) <= 1e-15 * max(1.0, abs(p) ** 2):
        raise DegenerateImage(f"{d} passes through the centre of {c}")
    r2 = c.radius ** 2
    return Circle(c.center + r2 * p / power, r2 * d.radius / abs(power))


# ---------------------------------------------------------------------------
# exponential chart


def exp_project(z):
    """``z -> exp(-2 pi i z)``; works elementwise on arrays."""
    if isinstance(z, np.ndarray):
        return np.exp(-2j * np.pi * z)
    return cmath.exp(-2j * math.pi * _check_finite(z))


def exp_lift(w, branch: int = 0):
    """The preimage of ``w`` under ``exp_project`` with real part in [branch, branch+1)."""
    if isinstance(w, np.ndarray):
        if np.any(w == 0):
            raise GeometryError("0 has no lift")
        x = np.mod(-np.angle(w) / TWO_PI, 1.0)
        x = np.where(x >= 1.0, 0.0, x)
        return (x + branch) + 1j * np.log(np.abs(w)) / TWO_PI
    if w is INF:
        raise GeometryError("infinity has no lift")
    w = _check_finite(w)
    if w == 0:
        raise GeometryError("0 has no lift")
    x = (-cmath.phase(w) / TWO_PI) % 1.0
    if x >= 1.0:
        x = 0.0
    return complex(x + branch, math.log(abs(w)) / TWO_PI)


# ---------------------------------------------------------------------------
# affine maps


def _xy(p) -> tuple:
    if isinstance(p, complex):
        return (p.real, p.imag)
    if isinstance(p, (int, float, Fraction)):
        return (p, 0)
    x, y = p
    return (x, y)


@dataclass(frozen=True)
class AffineMap:
    """``z -> A z + b`` acting on the plane identified with C."""

    linear: np.ndarray
    shift: complex

    def __call__(self, z):
        a = self.linear
        z = np.asarray(z, dtype=complex) if isinstance(z, np.ndarray) else complex(z)
        x, y = z.real, z.imag
        return (a[0, 0] * x + a[0, 1] * y) + 1j * (a[1, 0] * x + a[1, 1] * y) + self.shift

    def value_and_jacobian(self, z):
        return self(z), self.linear

    def compose(self, inner: "AffineMap") -> "AffineMap":
        return AffineMap(self.linear @ inner.linear, self(inner.shift))

    @staticmethod
    def similarity(scale: complex, shift: complex = 0j) -> "AffineMap":
        s = complex(scale)
        return AffineMap(np.array([[s.real, -s.imag], [s.imag, s.real]]), complex(shift))


@dataclass(frozen=True)
class TriangleMap(AffineMap):
    source: tuple = ()
    target: tuple = ()

    def contains(self, z, tol: float = 0.0) -> bool:
        lam = barycentric(self.source, z)
        return bool(np.all(lam >= -tol))


def signed_area(tri) -> float:
    (ax, ay), (bx, by), (cx, cy) = (_xy(p) for p in tri)
    return ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay)) / 2


def barycentric(tri, z) -> np.ndarray:
    (ax, ay), (bx, by), (cx, cy) = (tuple(map(float, _xy(p))) for p in tri)
    z = complex(z)
    det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
    l1 = ((z.real - ax) * (cy - ay) - (cx - ax) * (z.imag - ay)) / det
    l2 = ((bx - ax) * (z.imag - ay) - (z.real - ax) * (by - ay)) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def affine_from_triangles(src: Sequence, dst: Sequence) -> TriangleMap:
    """The affine map sending ``src[k]`` to ``dst[k]``.

    Coordinates may be floats, complex numbers or exact rationals; rationals
    are solved exactly before rounding, so rational vertices map exactly.
    """
    s = [_xy(p) for p in src]
    t = [_xy(p) for p in dst]
    if len(s) != 3 or len(t) != 3:
        raise GeometryError("triangles need three vertices")
    exact = all(isinstance(v, (int, Fraction)) for p in s + t for v in p)
    num = (lambda v: Fraction(v)) if exact else float
    s = [(num(x), num(y)) for x, y in s]
    t = [(num(x), num(y)) for x, y in t]
    for tri, name in ((s, "source"), (t, "target")):
        if signed_area(tri) == 0 or (not exact and abs(signed_area(tri)) <= 1e-300):
            raise GeometryError(f"{name} triangle is degenerate (collinear vertices)")
    (x0, y0), (x1, y1), (x2, y2) = s
    (u0, v0), (u1, v1), (u2, v2) = t
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    # A = [dst edges] @ inverse([src edges])
    i00, i01 = (y2 - y0) / det, -(x2 - x0) / det
    i10, i11 = -(y1 - y0) / det, (x1 - x0) / det
    a00 = (u1 - u0) * i00 + (u2 - u0) * i10
    a01 = (u1 - u0) * i01 + (u2 - u0) * i11
    a10 = (v1 - v0) * i00 + (v2 - v0) * i10
    a11 = (v1 - v0) * i01 + (v2 - v0) * i11
    bx = u0 - (a00 * x0 + a01 * y0)
    by = v0 - (a10 * x0 + a11 * y0)
    linear = np.array([[float(a00), float(a01)], [float(a10), float(a11)]])
    return TriangleMap(linear, complex(float(bx), float(by)),
                       tuple(complex(float(x), float(y)) for x, y in s),
                       tuple(complex(float(u), float(v)) for u, v in t))


def dilatation(m) -> float:
    """Ratio of the singular values of the linear part (1 for similarities)."""
    a = m.linear if isinstance(m, AffineMap) else np.asarray(m, dtype=float)
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[1] == 0:
        return math.inf
    return float(sv[0] / sv[1])


def operator_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)[0])


def spherical_derivative_norm(f, z) -> float:
    """``(1+|z|^2)/(1+|f(z)|^2)`` times the operator norm of the planar derivative.

    ``f`` provides ``value_and_jacobian(z)``; piecewise models resolve mesh
    edges with their own deterministic tie rule.
    """
    z = _check_finite(z)
    w, jac = f.value_and_jacobian(z)
    w = complex(w)
    return (1.0 + abs(z) ** 2) / (1.0 + abs(w) ** 2) * operator_norm(jac)
