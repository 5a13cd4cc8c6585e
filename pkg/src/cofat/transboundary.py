"""Numerical harness for the transboundary upper-gradient inequality.

For a map ``F`` between domains with a component correspondence ``p_i -> q_i``
and a curve ``gamma`` with endpoints in the domain ``U``, the inequality reads

    sigma(F(gamma(a)), F(gamma(b)))
        <= int_gamma |DF|_sph chi_U ds + sum_{p_i meets gamma} diam(q_i).

Curves are polylines in the plane of the source domain. The length term is
integrated with three-point Gauss-Legendre nodes on each polyline segment;
nodes falling inside a component are dropped. Components are "met" when a
segment comes within one segment length of them (over-detection only makes
the right-hand side larger).

The module also checks the auxiliary densities ``h_n``/``g_m`` and the
ball-to-set L^2 comparison with exact disk-intersection areas.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely

from .counterexample import StripMapModel, assemble_strip_map
from .domains import (ComponentCorrespondence, DiskComponent, GeneralizedJordanDomain,
                      PointComponent, PolygonComponent, SlitComponent, lens_area)
from .geom_kernel import chordal_distance, exp_project


class TransboundaryError(ValueError):
    """Rejected curve, family or configuration."""


_GL_NODES = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


# ---------------------------------------------------------------------------
# curves


@dataclass(eq=False)
class SampledCurve:
    """Polyline in the finite plane with a spherical arclength table.

    ``start_in``/``end_in`` hold ``"U"`` or the index of the component that
    contains the endpoint; they are filled by :meth:`classify_endpoints`.
    """

    vertices: np.ndarray
    start_in: object = None
    end_in: object = None
    arclength: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        if v.size < 2:
            raise TransboundaryError("a curve needs at least two vertices")
        if not np.all(np.isfinite(v)):
            raise TransboundaryError("curve vertices must be finite")
        if np.any(v[1:] == v[:-1]):
            raise TransboundaryError("consecutive vertices must be distinct")
        self.vertices = v
        self.arclength = np.concatenate([[0.0], np.cumsum(_spherical_segment_lengths(v))])

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def endpoints(self) -> tuple[complex, complex]:
        return complex(self.vertices[0]), complex(self.vertices[-1])

    def split(self, k: int) -> tuple["SampledCurve", "SampledCurve"]:
        """The two sub-curves before and after vertex ``k``."""
        if not 0 < k < self.vertices.size - 1:
            raise TransboundaryError("split index must be an interior vertex")
        return SampledCurve(self.vertices[:k + 1]), SampledCurve(self.vertices[k:])

    def refined(self, factor: int = 2) -> "SampledCurve":
        """Same polyline with every segment cut into ``factor`` pieces."""
        v = self.vertices
        t = np.arange(factor) / factor
        inner = (v[:-1, None] + (v[1:] - v[:-1])[:, None] * t[None, :]).ravel()
        return SampledCurve(np.concatenate([inner, v[-1:]]))

    def classify_endpoints(self, correspondence: ComponentCorrespondence) -> None:
        labels = []
        for z in self.endpoints:
            hit = [i for i, c in enumerate(correspondence.source.components)
                   if bool(np.any(c.contains(np.array([z]))))]
            labels.append(hit[0] if hit else "U")
        self.start_in, self.end_in = labels


def _spherical_segment_lengths(v: np.ndarray) -> np.ndarray:
    a, b = v[:-1], v[1:]
    d = b - a
    mid = 0.5 * (a + b)
    half = 0.5 * d
    total = np.zeros(a.size)
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        p = mid + node * half
        total += weight * 2.0 / (1.0 + np.abs(p) ** 2)
    return total * 0.5 * np.abs(d)


def polyline(points: Sequence[complex], samples: int = 2) -> SampledCurve:
    """Polyline through ``points`` with each segment split into ``samples`` pieces."""
    pts = np.asarray(points, dtype=complex)
    return SampledCurve(pts).refined(samples) if samples > 1 else SampledCurve(pts)


# ---------------------------------------------------------------------------
# maps


class IdentityMap:
    """``F = id`` off the components; used for checks with a known answer."""

    def __init__(self, domain: GeneralizedJordanDomain):
        self.domain = domain

    def F_array(self, u):
        u = np.asarray(u, dtype=complex).ravel()
        bad = np.zeros(u.size, dtype=bool)
        for c in self.domain.components:
            if isinstance(c, (PointComponent, SlitComponent)):
                continue  # measure zero
            bad |= c.contains(u)
        return np.where(bad, np.nan, u), np.ones(u.size), bad


def strip_correspondence(model: StripMapModel, samples: int = 32) -> ComponentCorrespondence:
    """Projected rhombi and the inner disk matched with slits and the image disk."""
    src, dst = model.domains(samples)
    return ComponentCorrespondence.identity(src, dst)


# ---------------------------------------------------------------------------
# component meeting index


class _MeetIndex:
    def __init__(self, correspondence: ComponentCorrespondence):
        geoms = []
        for c in correspondence.source.components:
            if isinstance(c, DiskComponent):
                g = shapely.Point(c.center.real, c.center.imag).buffer(1.02 * c.radius,
                                                                       quad_segs=32)
            elif isinstance(c, PolygonComponent):
                g = _inflated_polygon(c)
            else:
                g = c.shape()
            geoms.append(g)
        self.tree = shapely.STRtree(geoms)
        n = len(geoms)
        self.diameters = np.array([correspondence.diameter(i) for i in range(n)])

    def met(self, curve: SampledCurve) -> np.ndarray:
        v = curve.vertices
        coords = np.stack([np.column_stack([v[:-1].real, v[:-1].imag]),
                           np.column_stack([v[1:].real, v[1:].imag])], axis=1)
        segs = shapely.linestrings(coords)
        dist = np.abs(v[1:] - v[:-1])
        _, hit = self.tree.query(segs, predicate="dwithin", distance=dist)
        return np.unique(hit)


def _inflated_polygon(c: PolygonComponent):
    """Polygon grown edge by edge by twice the bound chord**2 / (8 rho) on how
    far an exponential image of a straight edge (a log spiral, curvature at
    most 1/|w|) strays from its chord."""
    v = c.vertices
    nxt = np.roll(v, -1)
    rho = np.maximum(np.minimum(np.abs(v), np.abs(nxt)), 1e-300)
    sag = np.abs(nxt - v) ** 2 / (4.0 * rho)
    edges = shapely.linestrings(np.stack([np.column_stack([v.real, v.imag]),
                                          np.column_stack([nxt.real, nxt.imag])], axis=1))
    return shapely.union_all(np.concatenate([[c.shape()],
                                             shapely.buffer(edges, sag, quad_segs=2)]))


def _meet_index(correspondence) -> _MeetIndex:
    idx = getattr(correspondence, "_meet_index", None)
    if idx is None:
        idx = _MeetIndex(correspondence)
        correspondence._meet_index = idx
    return idx


def components_met(correspondence: ComponentCorrespondence, curve: SampledCurve) -> np.ndarray:
    """Indices of source components met by the polyline (conservatively inflated)."""
    return _meet_index(correspondence).met(curve)


# ---------------------------------------------------------------------------
# the two sides


@dataclass
class RhsBreakdown:
    value: float
    length_term: float
    segment_terms: np.ndarray
    met: np.ndarray
    diameter_term: float
    nodes: int
    dropped_nodes: int


def _length_terms(model, curve: SampledCurve):
    v = curve.vertices
    a, b = v[:-1], v[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = (mid[:, None] + _GL_NODES[None, :] * half[:, None]).ravel()
    fv, norm, bad = model.F_array(pts)
    dens = np.where(bad, 0.0, 2.0 * norm / (1.0 + np.abs(np.where(bad, 0, fv)) ** 2))
    seg = (dens.reshape(-1, 3) * _GL_WEIGHTS[None, :]).sum(axis=1) * np.abs(half)
    return seg, pts.size, int(bad.sum())


def _endpoint_check(model, curve: SampledCurve):
    a, b = curve.endpoints
    fv, _, bad = model.F_array(np.array([a, b]))
    if bad[0]:
        raise TransboundaryError("curve starts inside a component")
    if bad[1]:
        raise TransboundaryError("curve ends inside a component")
    return complex(fv[0]), complex(fv[1])


def transboundary_rhs(model, correspondence: ComponentCorrespondence,
                      curve: SampledCurve, detail: bool = False):
    """Right-hand side of the inequality for one curve.

    ``model`` needs ``F_array(u) -> (F(u), planar ||DF(u)||, outside mask)``.
    """
    _endpoint_check(model, curve)
    seg, nodes, dropped = _length_terms(model, curve)
    met = components_met(correspondence, curve)
    diam = _meet_index(correspondence).diameters
    length = math.fsum(seg)
    dterm = math.fsum(diam[met])
    out = RhsBreakdown(length + dterm, length, seg, met, dterm, nodes, dropped)
    return out if detail else out.value


def transboundary_lhs(model, curve: SampledCurve) -> float:
    fa, fb = _endpoint_check(model, curve)
    return chordal_distance(fa, fb)


# ---------------------------------------------------------------------------
# curve samplers for the strip model

FAMILIES = ("identity", "segment", "vertical", "rhombus", "deep")


@dataclass(frozen=True)
class BatchSpec:
    seed: int
    counts: dict
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9

    def __post_init__(self):
        unknown = set(self.counts) - set(FAMILIES)
        if unknown:
            raise TransboundaryError(f"unknown curve families {sorted(unknown)}")
        if any(int(c) < 0 for c in self.counts.values()):
            raise TransboundaryError("curve counts must be non-negative")

    @classmethod
    def balanced(cls, seed: int, total: int, **kw) -> "BatchSpec":
        base, extra = divmod(total, len(FAMILIES))
        counts = {f: base + (1 if k < extra else 0) for k, f in enumerate(FAMILIES)}
        return cls(seed, counts, **kw)

    def to_json(self) -> dict:
        return {"seed": self.seed, "counts": {f: int(self.counts.get(f, 0)) for f in FAMILIES},
                "rel_tol": self.rel_tol, "abs_tol": self.abs_tol}

    @classmethod
    def from_json(cls, obj: dict) -> "BatchSpec":
        try:
            return cls(int(obj["seed"]), {k: int(v) for k, v in obj["counts"].items()},
                       float(obj.get("rel_tol", 1e-6)), float(obj.get("abs_tol", 1e-9)))
        except (KeyError, TypeError, AttributeError) as exc:
            raise TransboundaryError(f"malformed batch spec: {exc}") from exc


def _z_path(z0: complex, z1: complex, k_max: int, per_cell: int = 8, cap: int = 20000):
    n = int(min(cap, max(8, math.ceil(abs(z1 - z0) * per_cell * k_max))))
    return z0 + (z1 - z0) * np.linspace(0.0, 1.0, n + 1)


def _row_at(model: StripMapModel, depth: float):
    tops = model._tops
    i = int(np.searchsorted(tops, depth, side="right")) - 1
    return model.rows[max(0, min(i, len(model.rows) - 1))]


def _deepest_k(model: StripMapModel, y_min: float) -> int:
    return _row_at(model, max(0.0, -y_min)).k


def _sample_z(model: StripMapModel, family: str, rng: np.random.Generator):
    L = float(model.L)
    if family == "identity":
        z0 = complex(rng.uniform(-0.5, 1.5), rng.uniform(0.0, 0.6))
        z1 = complex(rng.uniform(-0.5, 1.5), rng.uniform(0.0, 0.6))
        return _z_path(z0, z1, 1)
    if family == "vertical":
        x = rng.uniform(0.0, 1.0)
        y1 = -rng.uniform(0.0, 0.999 * L)
        x1 = x + rng.normal(0.0, 0.01)
        return _z_path(complex(x, rng.uniform(0.0, 0.3)), complex(x1, y1), _deepest_k(model, y1))
    if family == "rhombus":
        row = model.rows[int(rng.integers(len(model.rows)))]
        c = int(rng.integers(row.k))
        k = row.k
        y = -float(row.left_bottom) + rng.uniform(0.05, 0.95) / k
        z0 = complex((c + rng.uniform(0.0, 0.05)) / k, y)
        z1 = complex((c + rng.uniform(0.95, 1.0)) / k, y + rng.normal(0.0, 0.05) / k)
        return _z_path(z0, z1, k, per_cell=64)
    if family == "deep":
        m = len(model.rows)
        row = model.rows[int(rng.integers(max(0, m - 3), m))]
        k = row.k
        # hug the rhombus tips: tile height near the top or bottom vertex
        t = rng.choice([rng.uniform(0.0, 0.03), rng.uniform(0.97, 1.0), rng.uniform(0.0, 1.0)])
        y = -float(row.left_bottom) + t / k
        x0 = rng.uniform(0.0, 1.0)
        span = rng.uniform(0.02, 1.0)
        z0 = complex(x0, y)
        z1 = complex(x0 + span, y + rng.normal(0.0, 0.2) / k)
        return _z_path(z0, z1, k, per_cell=16)
    raise TransboundaryError(f"unknown family {family}")


def _sample_curve(model: StripMapModel, family: str, rng: np.random.Generator) -> SampledCurve:
    for _ in range(200):
        if family == "segment":
            a = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            b = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            u = a + (b - a) * np.linspace(0.0, 1.0, 257)
        else:
            u = exp_project(_sample_z(model, family, rng))
        keep = np.concatenate([[True], u[1:] != u[:-1]])
        u = u[keep]
        if u.size < 2:
            continue
        _, _, bad = model.F_array(u[[0, -1]])
        if not bad.any():
            return SampledCurve(u, "U", "U")
    raise TransboundaryError(f"could not place endpoints for family {family}")


def sample_curves(model: StripMapModel, spec: BatchSpec):
    """Deterministic ``(family, index, curve)`` triples; each curve has its own seed."""
    for f_idx, family in enumerate(FAMILIES):
        for j in range(int(spec.counts.get(family, 0))):
            rng = np.random.default_rng([spec.seed, f_idx, j])
            yield family, j, _sample_curve(model, family, rng)


# ---------------------------------------------------------------------------
# batch verification


@dataclass
class CurveOutcome:
    family: str
    index: int
    lhs: float
    rhs: float
    margin: float
    violated: bool
    vertices: int
    met: int


def _check_one(model, correspondence, family, index, curve, spec) -> CurveOutcome:
    lhs = transboundary_lhs(model, curve)
    r = transboundary_rhs(model, correspondence, curve, detail=True)
    margin = lhs - (r.value * (1.0 + spec.rel_tol) + spec.abs_tol)
    return CurveOutcome(family, index, lhs, r.value, margin, margin > 0,
                        curve.vertices.size, int(r.met.size))


def _summarise(outcomes: list[CurveOutcome], spec: BatchSpec) -> dict:
    outcomes = sorted(outcomes, key=lambda o: (FAMILIES.index(o.family), o.index))
    per_family = {}
    for f in FAMILIES:
        sub = [o for o in outcomes if o.family == f]
        if not sub:
            continue
        worst = max(sub, key=lambda o: o.margin)
        per_family[f] = {"curves": len(sub), "violations": sum(o.violated for o in sub),
                         "worst_margin": worst.margin, "worst_index": worst.index,
                         "min_rhs_over_lhs": min((o.rhs / o.lhs for o in sub if o.lhs > 0),
                                                 default=math.inf)}
    worst = max(outcomes, key=lambda o: o.margin) if outcomes else None
    return {
        "batch": spec.to_json(),
        "curves": len(outcomes),
        "violations": sum(o.violated for o in outcomes),
        "worst_margin": worst.margin if worst else None,
        "worst_curve": {"family": worst.family, "index": worst.index,
                        "lhs": worst.lhs, "rhs": worst.rhs} if worst else None,
        "families": per_family,
        "quadrature": {"vertices": int(sum(o.vertices for o in outcomes)),
                       "nodes_per_segment": 3,
                       "mean_components_met": (sum(o.met for o in outcomes) / len(outcomes)
                                               if outcomes else 0.0)},
        "note": ("a violation is an implementation alarm: the inequality only fails on "
                 "a curve family of modulus zero"),
    }


_WORKER: dict = {}


def _worker_init(N: int, samples: int):
    model = assemble_strip_map(N)
    _WORKER["model"] = model
    _WORKER["corr"] = strip_correspondence(model, samples)


def _worker_run(args):
    spec, family, indices = args
    model, corr = _WORKER["model"], _WORKER["corr"]
    f_idx = FAMILIES.index(family)
    out = []
    for j in indices:
        rng = np.random.default_rng([spec.seed, f_idx, j])
        curve = _sample_curve(model, family, rng)
        out.append(_check_one(model, corr, family, j, curve, spec))
    return out


def verify_inequality(model, correspondence, curves: Iterable, spec: BatchSpec | None = None
                      ) -> dict:
    """Check the inequality on ``(family, index, curve)`` triples or bare curves."""
    spec = spec or BatchSpec(0, {})
    outcomes = []
    for j, item in enumerate(curves):
        family, index, curve = item if isinstance(item, tuple) else ("segment", j, item)
        outcomes.append(_check_one(model, correspondence, family, index, curve, spec))
    return _summarise(outcomes, spec)


def verify_strip_model(N: int, spec: BatchSpec, workers: int | None = None,
                       samples: int = 32, chunk: int = 250) -> dict:
    """Sample and verify a seeded batch on the truncated strip model.

    Results do not depend on ``workers``: every curve carries its own seed.
    """
    workers = workers or 1
    tasks = []
    for family in FAMILIES:
        count = int(spec.counts.get(family, 0))
        for start in range(0, count, chunk):
            tasks.append((spec, family, list(range(start, min(count, start + chunk)))))
    if workers == 1:
        _worker_init(N, samples)
        results = [_worker_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(N, samples)) as pool:
            results = list(pool.map(_worker_run, tasks))
    report = _summarise([o for r in results for o in r], spec)
    report["model"] = {"N": N, "L": float(assemble_strip_map(N).L), "polygon_samples": samples}
    return report


def default_workers() -> int:
    env = os.environ.get("COFAT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise TransboundaryError("COFAT_WORKERS must be an integer") from exc
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# L^2 norms of weighted sums of disk indicators


def _disk_gram(centers: np.ndarray, radii: np.ndarray, weights: np.ndarray) -> float:
    """``|| sum_i w_i chi_{B(c_i, r_i)} ||_2^2`` from exact pairwise lens areas."""
    centers = np.asarray(centers, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    weights = np.asarray(weights, dtype=float)
    terms = list(weights ** 2 * math.pi * radii ** 2)
    if centers.size > 1:
        boxes = shapely.box(centers.real - radii, centers.imag - radii,
                            centers.real + radii, centers.imag + radii)
        left, right = shapely.STRtree(boxes).query(boxes, predicate="intersects")
        keep = left < right
        for i, j in zip(left[keep], right[keep]):
            area = lens_area(radii[i], radii[j], abs(centers[i] - centers[j]))
            if area > 0:
                terms.append(2.0 * weights[i] * weights[j] * area)
    return math.fsum(terms)


def _as_disk(obj):
    if isinstance(obj, DiskComponent):
        return complex(obj.center), float(obj.radius)
    c, r = obj
    return complex(c), float(r)


def bojarski_check(balls, sets, weights, a: float | None = None):
    """``(||sum b_i chi_Bi||, ||sum b_i chi_Di||, ratio)`` for disks ``D_i`` inside ``B_i``.

    Disks are ``DiskComponent`` or ``(center, radius)`` pairs. With ``a``
    given, ``area(B_i) <= a area(D_i)`` is enforced as well.
    """
    B = [_as_disk(b) for b in balls]
    D = [_as_disk(d) for d in sets]
    w = np.asarray(weights, dtype=float)
    if not len(B) == len(D) == w.size:
        raise TransboundaryError("balls, sets and weights must have equal length")
    for i, ((cb, rb), (cd, rd)) in enumerate(zip(B, D)):
        if rd <= 0 or rb <= 0:
            raise TransboundaryError(f"pair {i}: radii must be positive")
        if abs(cd - cb) + rd > rb * (1 + 1e-12):
            raise TransboundaryError(f"pair {i}: set is not contained in its ball")
        if a is not None and rb * rb > a * rd * rd * (1 + 1e-12):
            raise TransboundaryError(f"pair {i}: area(B) exceeds a * area(D)")
    lhs = math.sqrt(_disk_gram(np.array([c for c, _ in B]), np.array([r for _, r in B]), w))
    rhs = math.sqrt(_disk_gram(np.array([c for c, _ in D]), np.array([r for _, r in D]), w))
    return lhs, rhs, (lhs / rhs if rhs > 0 else math.inf)


def random_bojarski_family(rng: np.random.Generator, count: int = 100, a: float = 2.0,
                           r_range=(0.02, 0.2)):
    """Random balls in the unit square with sub-disks of area ``area(B)/a`` and weights."""
    centers = rng.uniform(0, 1, count) + 1j * rng.uniform(0, 1, count)
    radii = rng.uniform(*r_range, count)
    small = radii / math.sqrt(a)
    room = radii - small
    offs = room * np.sqrt(rng.uniform(0, 1, count)) * np.exp(2j * np.pi * rng.uniform(0, 1, count))
    balls = list(zip(centers, radii))
    sets = list(zip(centers + offs, small))
    return balls, sets, rng.uniform(0, 1, count)


def fit_bojarski_constant(a: float, seeds: Sequence[int], families: int = 20,
                          count: int = 100) -> dict:
    """Empirical ``c(a)`` per seed (largest ratio over random families)."""
    per_seed = []
    for s in seeds:
        rng = np.random.default_rng([int(s), int(round(a * 1000))])
        per_seed.append(max(bojarski_check(*random_bojarski_family(rng, count, a), a=a)[2]
                            for _ in range(families)))
    hi, lo = max(per_seed), min(per_seed)
    return {"a": a, "per_seed": per_seed, "c": hi, "spread": (hi - lo) / hi,
            "stable": (hi - lo) / hi <= 0.15}


# ---------------------------------------------------------------------------
# h_n and g_m


@dataclass
class HnGmResult:
    n: int
    norm_sq: float
    bound: float
    c: float
    ms: list
    tail_integrals: np.ndarray   # shape (curves, len(ms))
    disks: list


def _anchor(c) -> complex:
    if isinstance(c, DiskComponent):
        return complex(c.center)
    if isinstance(c, SlitComponent):
        return 0.5 * (c.start + c.end)
    if isinstance(c, PolygonComponent):
        g = complex(np.mean(c.vertices))
        return g if bool(c.contains(np.array([g]))[0]) else complex(c.vertices[0])
    return complex(c.boundary_samples(1)[0])


def h_disks(correspondence: ComponentCorrespondence, n: int):
    """``(index, centre, radius of 2B_{i,n}, coefficient)`` for each non-point component.

    ``W_i(n)`` is the ``diam(p_i)/(2(n+1))``-neighbourhood of ``p_i``, so
    ``diam W_i(n) = diam(p_i)(1 + 1/(n+1))``; ``B_{i,n}`` is centred at a point
    of ``p_i`` with radius ``diam W_i(n)`` (it contains ``W_i(n)``).
    """
    if n < 1:
        raise TransboundaryError("n must be >= 1")
    out = []
    for i, p in enumerate(correspondence.source.components):
        dp = p.planar_diameter()
        if dp == 0:
            continue  # a point: h has no mass there
        dq = correspondence.target.components[correspondence.mapping[i]].planar_diameter()
        dW = dp * (1.0 + 1.0 / (n + 1))
        out.append((i, _anchor(p), 2.0 * dW, dq / dW))
    return out


def _segments_in_disks(v: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Total length of the polyline inside each disk (exact per segment)."""
    a, b = v[:-1], v[1:]
    d = b - a
    L = np.abs(d)
    u = d / L
    out = np.zeros(centers.size)
    for start in range(0, a.size, 256):
        sl = slice(start, start + 256)
        p = a[sl, None] - centers[None, :]
        proj = -(p.real * u[sl, None].real + p.imag * u[sl, None].imag)
        dist2 = np.abs(p) ** 2 - proj ** 2
        half = np.sqrt(np.maximum(radii[None, :] ** 2 - dist2, 0.0))
        lo = np.maximum(0.0, proj - half)
        hi = np.minimum(L[sl, None], proj + half)
        inside = dist2 < radii[None, :] ** 2
        out += np.where(inside, np.maximum(0.0, hi - lo), 0.0).sum(axis=0)
    return out


def hn_gm_check(domain, correspondence: ComponentCorrespondence, n: int, m=(0,),
                curves: Sequence[SampledCurve] = ()) -> HnGmResult:
    """``||h_n||^2`` against ``sum diam(q_i)^2`` and ``int_gamma g_m ds`` per curve.

    Planar throughout. ``g_m`` keeps the terms with component index ``>= m``;
    its integrals are reverse cumulative sums of non-negative terms, hence
    non-increasing in ``m`` exactly.
    """
    if domain is not None and domain is not correspondence.source:
        raise TransboundaryError("domain must be the source of the correspondence")
    disks = h_disks(correspondence, n)
    ms = [int(x) for x in (m if isinstance(m, Iterable) else [m])]
    if disks:
        idx = np.array([d[0] for d in disks])
        cen = np.array([d[1] for d in disks])
        rad = np.array([d[2] for d in disks])
        coef = np.array([d[3] for d in disks])
        norm_sq = _disk_gram(cen, rad, coef)
    else:
        idx = np.zeros(0, dtype=int)
        cen, rad, coef = np.zeros(0, complex), np.zeros(0), np.zeros(0)
        norm_sq = 0.0
    bound = math.fsum(correspondence.target.components[correspondence.mapping[i]]
                      .planar_diameter() ** 2 for i in range(len(correspondence.source)))
    total = len(correspondence.source)
    tails = np.zeros((len(curves), len(ms)))
    for ci, curve in enumerate(curves):
        per = np.zeros(total + 1)
        if disks:
            per[idx] = coef * _segments_in_disks(curve.vertices, cen, rad)
        tail = np.cumsum(per[::-1])[::-1]   # tail[k] = sum_{i >= k}
        for mi, mm in enumerate(ms):
            tails[ci, mi] = tail[min(max(mm, 0), total)]
    c = norm_sq / bound if bound > 0 else math.inf
    return HnGmResult(n, norm_sq, bound, c, ms, tails, disks)
