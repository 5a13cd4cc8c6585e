"""Generalized Jordan domains and the quantitative verifiers used on them.

A domain is stored through its complementary components (closed disks,
polygons, slits and points). The verifiers estimate fatness, Hausdorff
1-content, eccentricity, eccentric distortion and the l^2 sum of component
diameters.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

from .geom_kernel import chordal_array, spherical_diameter, to_sphere


class DomainError(ValueError):
    """Invalid domain description or verifier input."""


# ---------------------------------------------------------------------------
# exact planar areas


@numba.njit(cache=True)
def _seg_disk_signed(ax, ay, bx, by, r):
    """Signed area of triangle (0, a, b) intersected with the disk |z| <= r."""
    dx, dy = bx - ax, by - ay
    qa = dx * dx + dy * dy
    if qa == 0.0:
        return 0.0
    qb = ax * dx + ay * dy
    qc = ax * ax + ay * ay - r * r
    disc = qb * qb - qa * qc
    ts = np.empty(4)
    ts[0] = 0.0
    n = 1
    if disc > 0.0:
        sq = math.sqrt(disc)
        t1 = (-qb - sq) / qa
        t2 = (-qb + sq) / qa
        if 0.0 < t1 < 1.0:
            ts[n] = t1
            n += 1
        if 0.0 < t2 < 1.0:
            ts[n] = t2
            n += 1
    ts[n] = 1.0
    n += 1
    total = 0.0
    for k in range(n - 1):
        t0, t1 = ts[k], ts[k + 1]
        px, py = ax + t0 * dx, ay + t0 * dy
        qx, qy = ax + t1 * dx, ay + t1 * dy
        tm = 0.5 * (t0 + t1)
        mx, my = ax + tm * dx, ay + tm * dy
        cross = px * qy - py * qx
        if mx * mx + my * my <= r * r:
            total += 0.5 * cross
        else:
            dot = px * qx + py * qy
            total += 0.5 * r * r * math.atan2(cross, dot)
    return total


@numba.njit(cache=True)
def polygon_disk_area(xs, ys, cx, cy, r):
    """Exact area of a simple polygon intersected with the disk B((cx, cy), r)."""
    n = xs.size
    total = 0.0
    for k in range(n):
        j = (k + 1) % n
        total += _seg_disk_signed(xs[k] - cx, ys[k] - cy, xs[j] - cx, ys[j] - cy, r)
    return abs(total)


@numba.njit(cache=True)
def _polygon_disk_areas(xs, ys, cx, cy, radii):
    out = np.empty((cx.size, radii.shape[1]))
    for i in range(cx.size):
        for j in range(radii.shape[1]):
            out[i, j] = polygon_disk_area(xs, ys, cx[i], cy[i], radii[i, j])
    return out


def lens_area(r1: float, r2: float, d: float) -> float:
    """Area of the intersection of two disks of radii r1, r2 with centres at distance d."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = math.acos(max(-1.0, min(1.0, (d * d + r1 * r1 - r2 * r2) / (2 * d * r1))))
    a2 = math.acos(max(-1.0, min(1.0, (d * d + r2 * r2 - r1 * r1) / (2 * d * r2))))
    tri = 0.5 * math.sqrt(max(0.0, (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)))
    return r1 * r1 * a1 + r2 * r2 * a2 - tri


def segment_disk_length(a: complex, b: complex, c: complex, r: float) -> float:
    """Length of the part of segment [a, b] inside the closed disk B(c, r)."""
    d = b - a
    L = abs(d)
    if L == 0:
        return 0.0
    u = d / L
    p = a - c
    proj = -(p.real * u.real + p.imag * u.imag)
    dist2 = abs(p) ** 2 - proj ** 2
    if dist2 >= r * r:
        return 0.0
    half = math.sqrt(r * r - dist2)
    lo, hi = max(0.0, proj - half), min(L, proj + half)
    return max(0.0, hi - lo)


@numba.njit(cache=True)
def points_in_polygon(px, py, xs, ys):
    out = np.zeros(px.size, dtype=np.bool_)
    n = xs.size
    for k in range(px.size):
        x, y = px[k], py[k]
        inside = False
        j = n - 1
        for i in range(n):
            if (ys[i] > y) != (ys[j] > y):
                xc = xs[i] + (y - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i])
                if x < xc:
                    inside = not inside
            j = i
        out[k] = inside
    return out


# ---------------------------------------------------------------------------
# components


class Component:
    kind = "abstract"

    def planar_diameter(self) -> float:
        raise NotImplementedError

    def spherical_diameter(self) -> float:
        return spherical_diameter(self.boundary_samples(512))

    def area(self) -> float:
        return 0.0

    def boundary_samples(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def shape(self):
        raise NotImplementedError

    def contains(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def max_distance(self, x: complex) -> float:
        """Largest distance from x to a point of the component."""
        return float(np.max(np.abs(self.boundary_samples(64) - x)))

    def bbox(self) -> tuple[float, float, float, float]:
        b = self.boundary_samples(256)
        return b.real.min(), b.imag.min(), b.real.max(), b.imag.max()

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointComponent(Component):
    at: complex
    kind = "point"

    def planar_diameter(self):
        return 0.0

    def spherical_diameter(self):
        return 0.0

    def boundary_samples(self, n):
        return np.array([complex(self.at)])

    def shape(self):
        return Point(self.at.real, self.at.imag)

    def contains(self, z):
        return np.asarray(z) == self.at

    def max_distance(self, x):
        return abs(self.at - x)

    def to_json(self):
        return {"kind": "point", "at": [self.at.real, self.at.imag]}


@dataclass(frozen=True)
class DiskComponent(Component):
    center: complex
    radius: float
    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")

    def planar_diameter(self):
        return 2.0 * self.radius

    def spherical_diameter(self):
        # the chordal diameter of a disk is attained on the diameter through the origin
        c, r = self.center, self.radius
        u = c / abs(c) if abs(c) > 0 else 1.0
        pts = np.concatenate([[c + r * u, c - r * u], self.boundary_samples(2048)])
        return spherical_diameter(pts)

    def area(self):
        return math.pi * self.radius ** 2

    def boundary_samples(self, n):
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return self.center + self.radius * np.exp(1j * t)

    def shape(self):
        return Point(self.center.real, self.center.imag)

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) <= self.radius

    def max_distance(self, x):
        return abs(x - self.center) + self.radius

    def bbox(self):
        c, r = self.center, self.radius
        return c.real - r, c.imag - r, c.real + r, c.imag + r

    def to_json(self):
        return {"kind": "circle", "center": [self.center.real, self.center.imag],
                "radius": self.radius}


@dataclass(frozen=True, eq=False)
class PolygonComponent(Component):
    vertices: np.ndarray
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        if v.size >= 2 and v[0] == v[-1]:
            v = v[:-1]
        if v.size < 3:
            raise DomainError("polygon needs at least three vertices")
        a = 0.5 * np.sum(v.real * np.roll(v.imag, -1) - np.roll(v.real, -1) * v.imag)
        if a == 0:
            raise DomainError("polygon has zero area")
        if a < 0:
            v = v[::-1]
        object.__setattr__(self, "vertices", v)

    def planar_diameter(self):
        v = self.vertices
        return float(np.max(np.abs(v[:, None] - v[None, :])))

    def spherical_diameter(self):
        return spherical_diameter(self.boundary_samples(max(512, self.vertices.size)))

    def area(self):
        v = self.vertices
        return float(0.5 * np.sum(v.real * np.roll(v.imag, -1) - np.roll(v.real, -1) * v.imag))

    def boundary_samples(self, n):
        v = self.vertices
        if n <= v.size:
            return v.copy()
        nxt = np.roll(v, -1)
        lengths = np.abs(nxt - v)
        per = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
        pts = [v[k] + (nxt[k] - v[k]) * np.arange(per[k]) / per[k] for k in range(v.size)]
        return np.concatenate(pts)

    def shape(self):
        return Polygon(np.column_stack([self.vertices.real, self.vertices.imag]))

    def contains(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return points_in_polygon(z.real.copy(), z.imag.copy(),
                                 self.vertices.real.copy(), self.vertices.imag.copy())

    def max_distance(self, x):
        return float(np.max(np.abs(self.vertices - x)))

    def bbox(self):
        v = self.vertices
        return v.real.min(), v.imag.min(), v.real.max(), v.imag.max()

    def to_json(self):
        return {"kind": "polygon", "vertices": [[z.real, z.imag] for z in self.vertices]}


@dataclass(frozen=True)
class SlitComponent(Component):
    start: complex
    end: complex
    kind = "slit"

    def __post_init__(self):
        if self.start == self.end:
            raise DomainError("slit endpoints coincide; use a point component")

    def planar_diameter(self):
        return abs(self.end - self.start)

    def spherical_diameter(self):
        # The segment is an arc of a circle on the sphere: its diameter is the
        # endpoint chord unless the arc is longer than a half circle.
        a, b = to_sphere([self.start, self.end])
        m = to_sphere([0.5 * (self.start + self.end)])[0]
        chord = float(np.linalg.norm(a - b))
        u, v = a - m, b - m
        w = np.cross(u, v)
        ww = float(w @ w)
        if ww < 1e-30 * max(float(u @ u) * float(v @ v), 1e-300):
            return min(chord, 2.0)
        centre = m + (np.cross(w, u) * float(v @ v) + np.cross(v, w) * float(u @ u)) / (2 * ww)
        radius = float(np.linalg.norm(a - centre))
        # m lies on the arc between a and b; the arc exceeds a half circle
        # exactly when the chord ab separates m from the centre
        side_m = np.dot(np.cross(b - a, w), m - a)
        side_c = np.dot(np.cross(b - a, w), centre - a)
        if side_m * side_c > 0:
            return min(2.0 * radius, 2.0)
        return min(chord, 2.0)

    def boundary_samples(self, n):
        return self.start + (self.end - self.start) * np.linspace(0.0, 1.0, max(n, 2))

    def shape(self):
        return LineString([(self.start.real, self.start.imag), (self.end.real, self.end.imag)])

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        d = self.end - self.start
        t = ((z - self.start) / d)
        return (np.abs(t.imag) * abs(d) <= 1e-12) & (t.real >= 0) & (t.real <= 1)

    def max_distance(self, x):
        return max(abs(self.start - x), abs(self.end - x))

    def to_json(self):
        return {"kind": "slit", "from": [self.start.real, self.start.imag],
                "to": [self.end.real, self.end.imag]}


def component_from_json(obj: dict) -> Component:
    def c(pair):
        x, y = pair
        return complex(float(x), float(y))
    kind = obj.get("kind")
    try:
        if kind == "circle":
            return DiskComponent(c(obj["center"]), float(obj["radius"]))
        if kind == "polygon":
            return PolygonComponent(np.array([c(p) for p in obj["vertices"]]))
        if kind == "point":
            return PointComponent(c(obj["at"]))
        if kind == "slit":
            return SlitComponent(c(obj["from"]), c(obj["to"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed {kind} component: {exc}") from exc
    raise DomainError(f"unknown component kind {kind!r}")


def _disjoint(a: Component, b: Component) -> bool:
    if isinstance(a, DiskComponent) and isinstance(b, DiskComponent):
        return abs(a.center - b.center) > a.radius + b.radius
    if isinstance(b, DiskComponent):
        a, b = b, a
    if isinstance(a, DiskComponent):
        return a.shape().distance(b.shape()) > a.radius
    return not a.shape().intersects(b.shape())


@dataclass
class GeneralizedJordanDomain:
    """Complement of finitely many listed components (an infinite family truncated at N)."""

    components: list
    tail_rule: str | None = None
    tail_bound: float | None = None
    truncation: int | None = None
    validate: bool = True

    def __post_init__(self):
        self.components = list(self.components)
        if self.validate:
            self.check_disjoint()

    def check_disjoint(self):
        comps = self.components
        if len(comps) < 2:
            return
        boxes = [shapely.box(*c.bbox()) for c in comps]
        tree = shapely.STRtree(boxes)
        left, right = tree.query(boxes, predicate="intersects")
        for i, j in zip(left, right):
            if i < j and not _disjoint(comps[i], comps[j]):
                raise DomainError(f"components {i} and {j} intersect")

    def __len__(self):
        return len(self.components)

    def to_json(self) -> dict:
        out = {"components": [c.to_json() for c in self.components]}
        if self.tail_rule is not None:
            out["tail_rule"] = self.tail_rule
        if self.tail_bound is not None:
            out["tail_bound"] = self.tail_bound
        return out

    @classmethod
    def from_json(cls, obj, validate: bool = True) -> "GeneralizedJordanDomain":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or not isinstance(obj.get("components"), list):
            raise DomainError("domain JSON needs a 'components' list")
        comps = [component_from_json(c) for c in obj["components"]]
        tail = obj.get("tail_bound")
        return cls(comps, obj.get("tail_rule"), None if tail is None else float(tail),
                   validate=validate)


@dataclass
class ComponentCorrespondence:
    """Index bijection p_i -> q_i between components of two domains."""

    source: GeneralizedJordanDomain
    target: GeneralizedJordanDomain
    mapping: dict
    target_diameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.source))) or \
                sorted(self.mapping.values()) != list(range(len(self.target))):
            raise DomainError("correspondence must be a bijection of component indices")
        if not self.target_diameters:
            self.target_diameters = {i: self.target.components[j].spherical_diameter()
                                     for i, j in self.mapping.items()}

    def diameter(self, i: int) -> float:
        return self.target_diameters[i]

    @classmethod
    def identity(cls, source, target, diameters=None):
        return cls(source, target, {i: i for i in range(len(source))}, diameters or {})


# ---------------------------------------------------------------------------
# l^2 diameters


def ell2_diameters(domain: GeneralizedJordanDomain) -> tuple[float, float | None]:
    """(sum of squared spherical diameters, closed-form tail bound or None)."""
    total = math.fsum(c.spherical_diameter() ** 2 for c in domain.components)
    return total, domain.tail_bound


# ---------------------------------------------------------------------------
# fatness


@dataclass
class FatnessEstimate:
    value: float
    center: complex | None
    radius: float | None
    refinements: int
    metric: str

    def __float__(self):
        return float(self.value)


def _centers(comp: Component, level: int) -> np.ndarray:
    """Boundary-biased centres: dense boundary samples plus a coarser interior grid."""
    nb = 32 * 2 ** level
    boundary = comp.boundary_samples(nb)
    if isinstance(comp, PolygonComponent):
        boundary = np.concatenate([boundary, comp.vertices])
    x0, y0, x1, y1 = comp.bbox()
    m = 4 * 2 ** level
    gx, gy = np.meshgrid(np.linspace(x0, x1, m + 2)[1:-1], np.linspace(y0, y1, m + 2)[1:-1])
    grid = (gx + 1j * gy).ravel()
    grid = grid[comp.contains(grid)]
    return np.unique(np.concatenate([boundary, grid]))


def _radius_fractions(level: int) -> np.ndarray:
    k = 16 * 2 ** level
    geometric = np.geomspace(1e-3, 1.0, k)
    linear = np.linspace(0.05, 1.0, k)
    return np.unique(np.concatenate([geometric, linear, [1.0]]))


def _planar_ratios(comp: Component, centers: np.ndarray, t: np.ndarray):
    maxd = np.array([comp.max_distance(c) for c in centers])
    radii = maxd[:, None] * t[None, :]
    if isinstance(comp, DiskComponent):
        d = np.abs(centers - comp.center)
        vec = np.vectorize(lambda r, dd: lens_area(comp.radius, r, dd))
        area = vec(radii, d[:, None])
    else:
        v = comp.vertices
        area = _polygon_disk_areas(v.real.copy(), v.imag.copy(), centers.real.copy(),
                                   centers.imag.copy(), radii)
    return area / radii ** 2, radii


def _planar_fatness(comp: Component, rel: float, max_level: int) -> FatnessEstimate:
    prev = None
    for level in range(max_level + 1):
        centers = _centers(comp, level)
        ratios, radii = _planar_ratios(comp, centers, _radius_fractions(level))
        i, j = np.unravel_index(np.argmin(ratios), ratios.shape)
        est = FatnessEstimate(float(ratios[i, j]), complex(centers[i]), float(radii[i, j]),
                              level + 1, "planar")
        if prev is not None and abs(est.value - prev.value) <= rel * prev.value:
            return est
        prev = est
    return prev


def _spherical_fatness(comp: Component, rel: float, max_level: int) -> FatnessEstimate:
    """Quadrature of the spherical measure of chordal balls intersected with K."""
    x0, y0, x1, y1 = comp.bbox()
    prev = None
    for level in range(max_level + 1):
        m = 256 * 2 ** level
        h = max(x1 - x0, y1 - y0) / m
        gx, gy = np.meshgrid(np.arange(x0 + h / 2, x1, h), np.arange(y0 + h / 2, y1, h))
        pts = (gx + 1j * gy).ravel()
        pts = pts[comp.contains(pts)]
        w = (2.0 / (1.0 + np.abs(pts) ** 2)) ** 2 * h * h
        centers = _centers(comp, min(level, 2))
        best = (math.inf, None, None)
        t = _radius_fractions(min(level, 2))
        for c in centers:
            d = chordal_array(pts, np.full(pts.shape, c))
            order = np.argsort(d)
            ds, cum = d[order], np.cumsum(w[order])
            bd = comp.boundary_samples(1024)
            maxd = float(chordal_array(bd, np.full(bd.shape, c)).max())
            radii = t * maxd
            lam = 2.0 / (1.0 + abs(c) ** 2)
            resolved = radii > 8 * h * lam
            if np.any(resolved):
                idx = np.searchsorted(ds, radii[resolved], side="right")
                area = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
                ratio = area / radii[resolved] ** 2
                k = int(np.argmin(ratio))
                if ratio[k] < best[0]:
                    best = (float(ratio[k]), complex(c), float(radii[resolved][k]))
            small = radii[~resolved]
            if small.size and not isinstance(comp, (PointComponent, SlitComponent)):
                # below grid resolution the chordal ball is a planar ball of radius r/lam
                flat, _ = _planar_ratios(comp, np.array([c]), small / lam / comp.max_distance(c))
                k = int(np.argmin(flat[0]))
                if flat[0, k] < best[0]:
                    best = (float(flat[0, k]), complex(c), float(small[k]))
        est = FatnessEstimate(best[0], best[1], best[2], level + 1, "spherical")
        if prev is not None and abs(est.value - prev.value) <= rel * prev.value:
            return est
        prev = est
    return prev


def fatness_margin(component: Component, *, metric: str = "planar", rel: float = 0.01,
                   max_level: int = 4) -> FatnessEstimate:
    """Sampled infimum of area(B(x, r) n K) / r^2 over x in K and balls not containing K.

    ``metric`` is "planar", "spherical" or "auto" (planar below diameter 1/4,
    spherical quadrature otherwise). Points are fat for every tau (+inf);
    slits have zero area and give 0.
    """
    if isinstance(component, PointComponent):
        return FatnessEstimate(math.inf, component.at, None, 0, metric)
    if isinstance(component, SlitComponent):
        return FatnessEstimate(0.0, component.start, component.planar_diameter(), 0, metric)
    if metric == "auto":
        metric = "planar" if component.planar_diameter() < 0.25 else "spherical"
    if metric == "planar":
        return _planar_fatness(component, rel, max_level)
    if metric == "spherical":
        return _spherical_fatness(component, rel, min(max_level, 2))
    raise DomainError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# Hausdorff content


def _diam(points: np.ndarray) -> float:
    if points.size < 2:
        return 0.0
    return float(np.max(np.abs(points[:, None] - points[None, :])))


def _set_partitions(items: list, max_blocks: int):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, max_blocks):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        if len(part) < max_blocks:
            yield [[first]] + part


def hausdorff_content(pieces, budget: int | None = None) -> float:
    """Upper bound for the 1-dimensional Hausdorff content (planar).

    ``pieces`` is a list of connected pieces, each a point or a polyline
    (sequence of complex vertices). Each cover set is the convex hull of a
    group of pieces; the best grouping into at most ``budget`` sets is found
    exactly for up to 8 pieces and greedily beyond. A single connected piece
    returns its diameter exactly.
    """
    arrs = []
    for p in pieces:
        a = np.atleast_1d(np.asarray(p, dtype=complex)).ravel()
        if a.size == 0:
            raise DomainError("empty piece")
        arrs.append(a)
    if not arrs:
        return 0.0
    budget = len(arrs) if budget is None else budget
    if budget < 1:
        raise DomainError("cover budget must be at least 1")
    if len(arrs) <= 8:
        best = math.inf
        for part in _set_partitions(list(range(len(arrs))), budget):
            best = min(best, sum(_diam(np.concatenate([arrs[i] for i in g])) for g in part))
        return best
    # greedy agglomeration: merge the pair with the smallest cost increase
    groups = [[i] for i in range(len(arrs))]
    diam = [_diam(a) for a in arrs]
    best = sum(diam) if len(groups) <= budget else math.inf
    while len(groups) > 1:
        choice = None
        for a, b in itertools.combinations(range(len(groups)), 2):
            d = _diam(np.concatenate([arrs[i] for i in groups[a] + groups[b]]))
            inc = d - diam[a] - diam[b]
            if choice is None or inc < choice[0]:
                choice = (inc, a, b, d)
        _, a, b, d = choice
        groups[a] = groups[a] + groups[b]
        diam[a] = d
        del groups[b], diam[b]
        if len(groups) <= budget:
            best = min(best, sum(diam))
    return best


# ---------------------------------------------------------------------------
# eccentricity


@dataclass
class EccentricityCertificate:
    value: float
    center: complex
    inner_radius: float
    outer_radius: float


def _as_region(region) -> Component:
    if isinstance(region, (DiskComponent, PolygonComponent)):
        return region
    arr = np.asarray(region, dtype=complex)
    if arr.ndim == 1 and arr.size >= 3:
        return PolygonComponent(arr)
    raise DomainError("eccentricity needs a disk or polygon region with interior")


def _boundary_distance(region: Component, c: np.ndarray) -> np.ndarray:
    if isinstance(region, DiskComponent):
        return region.radius - np.abs(c - region.center)
    v = region.vertices
    a, b = v, np.roll(v, -1)
    d = b - a
    t = np.clip(((c[:, None] - a[None]) * np.conj(d[None])).real / np.abs(d[None]) ** 2, 0, 1)
    return np.min(np.abs(c[:, None] - (a[None] + t * d[None])), axis=1)


def _outer_distance(region: Component, c: np.ndarray) -> np.ndarray:
    if isinstance(region, DiskComponent):
        return np.abs(c - region.center) + region.radius
    return np.max(np.abs(c[:, None] - region.vertices[None]), axis=1)


def eccentricity(region, grid: int = 24, rounds: int = 30) -> EccentricityCertificate:
    """Upper bound for E(A) = inf{M : B subset A subset M B} with the certifying ball.

    Centres are searched on a grid inside A and then refined by a shrinking
    local grid around the best candidate.
    """
    region = _as_region(region)
    if isinstance(region, DiskComponent):
        return EccentricityCertificate(1.0, region.center, region.radius, region.radius)
    x0, y0, x1, y1 = region.bbox()
    span = max(x1 - x0, y1 - y0)
    gx, gy = np.meshgrid(np.linspace(x0, x1, grid + 2)[1:-1], np.linspace(y0, y1, grid + 2)[1:-1])
    cand = np.concatenate([(gx + 1j * gy).ravel(), [np.mean(region.vertices)]])

    def score(c):
        c = c[region.contains(c)]
        if c.size == 0:
            return None
        inner = _boundary_distance(region, c)
        ok = inner > 0
        c, inner = c[ok], inner[ok]
        if c.size == 0:
            return None
        outer = _outer_distance(region, c)
        ratio = outer / inner
        k = int(np.argmin(ratio))
        return ratio[k], c[k], inner[k], outer[k]

    best = score(cand)
    if best is None:
        raise DomainError("region has empty interior at the search resolution")
    step = span / (grid + 1)
    for _ in range(rounds):
        off = np.linspace(-step, step, 5)
        ox, oy = np.meshgrid(off, off)
        trial = score(best[1] + (ox + 1j * oy).ravel())
        if trial is not None and trial[0] < best[0]:
            best = trial
        else:
            step /= 2
    value = max(1.0, float(best[0]))
    return EccentricityCertificate(value, complex(best[1]), float(best[2]), float(best[3]))


def ellipse_polygon(center: complex, a: float, b: float, n: int = 4096) -> PolygonComponent:
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return PolygonComponent(center + a * np.cos(t) + 1j * b * np.sin(t))


# ---------------------------------------------------------------------------
# eccentric distortion


@dataclass
class DistortionEstimate:
    value: float
    family: str
    per_scale: list


def eccentric_distortion(f: Callable, x: complex, scales: Sequence[float],
                         families: dict | None = None, samples: int = 256,
                         tail: int | None = None) -> DistortionEstimate:
    """Upper estimate of E_f(x) from shrinking test sets.

    ``f`` maps complex arrays to complex arrays. ``families`` maps a name to
    a function ``scale -> region`` (disk or polygon around x); round disks
    of diameter ``scale`` are always included. Each family is scored by the
    worst ``max(E(A), E(f(A)))`` over the last ``tail`` scales (default: the
    finer half), and the best family wins.
    """
    scales = sorted(scales, reverse=True)
    if not scales or scales[-1] <= 0:
        raise DomainError("scale schedule must be positive")
    pool = {"balls": lambda s: DiskComponent(x, s / 2)}
    pool.update(families or {})
    tail = tail or max(1, (len(scales) + 1) // 2)
    best = None
    for name, make in pool.items():
        rows = []
        for s in scales:
            region = _as_region(make(s))
            if isinstance(region, DiskComponent):
                boundary = region.boundary_samples(samples)
            else:
                boundary = region.boundary_samples(samples)
            image = PolygonComponent(np.asarray(f(boundary), dtype=complex))
            e_a = eccentricity(region).value
            e_f = eccentricity(image).value
            rows.append((s, e_a, e_f))
        value = max(max(r[1], r[2]) for r in rows[-tail:])
        if best is None or value < best.value:
            best = DistortionEstimate(value, name, rows)
    return best
