"""Piecewise linear rhombus-to-slit model and its exponential projection.

Tile geometry (model choice). On ``[-1, 1]^2`` the closed rhombus ``R(n)`` has
vertices ``(0, +-1)`` and ``(+-(1 - 2^-n), 0)``. Each of the two components of
``Q(n) = [-1, 1]^2 minus R(n)`` is cut by the horizontal lines
``y = +-(2^j - 1)/(2^n - 1)``, ``j = 0..n``. The strip between consecutive
cuts has width ``2^(j-n)`` at its lower end and ``2^(j+1-n)`` at its upper
end and height about ``2^(j-n)``, so every trapezoid is a scaled copy of one
fixed shape (up to a factor tending to 1). Each trapezoid is split along the
diagonal from its lower-left vertex and mapped onto a ``1/n`` square of
the matching half of ``S(n) = ([-1/n, 1/n] minus {0}) x [-1, 1]``.

Row ``i`` uses ``k_i = i^2`` copies of ``Q(n_i)`` with ``n_i = i`` and a
translation zone of height ``delta_i = 1/k_i`` below it.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .domains import (DiskComponent, GeneralizedJordanDomain, PolygonComponent,
                      SlitComponent, fatness_margin)
from .geom_kernel import (TriangleMap, affine_from_triangles, chordal_distance, dilatation,
                   exp_lift, exp_project, signed_area)


class ModelError(ValueError):
    """Point outside the model domain or invalid construction parameter."""

    def __init__(self, message: str, component: tuple | None = None):
        super().__init__(message)
        self.component = component


# ---------------------------------------------------------------------------
# parameters


def parameters(i: int) -> tuple[int, int, Fraction, Fraction]:
    """``(k_i, n_i, delta_i, a_i)`` with ``a_i = sum_{j <= i} n_j / k_j``; ``a_0 = 0``."""
    if i < 0:
        raise ModelError("row index must be >= 0")
    a = sum((Fraction(1, j) for j in range(1, i + 1)), Fraction(0))
    if i == 0:
        return 0, 0, Fraction(0), a
    k = i * i
    return k, i, Fraction(1, k), a


@dataclass(frozen=True)
class RowSpec:
    index: int
    k: int
    n: int
    delta: Fraction
    left_top: Fraction   # the row occupies y in [-left_top - 1/k, -left_top] on the left
    right_top: Fraction  # and y in [-right_top - n/k, -right_top] on the right

    def __post_init__(self):
        if not (0 < self.delta <= Fraction(1, self.k)):
            raise ModelError("need 0 < delta <= 1/k")

    @property
    def left_bottom(self) -> Fraction:
        return self.left_top + Fraction(1, self.k)

    @property
    def right_bottom(self) -> Fraction:
        return self.right_top + Fraction(self.n, self.k)

    @property
    def left_next(self) -> Fraction:
        return self.left_bottom + self.delta

    @property
    def right_next(self) -> Fraction:
        return self.right_bottom + self.delta


# ---------------------------------------------------------------------------
# the tile Q(n) -> S(n)


def rhombus_half_width(n: int) -> Fraction:
    return 1 - Fraction(1, 2 ** n)


def cut_heights(n: int) -> list[Fraction]:
    return [Fraction(2 ** j - 1, 2 ** n - 1) for j in range(n + 1)]


@dataclass(frozen=True)
class TilePiece:
    side: str     # "left" or "right" component
    half: str     # "upper" or "lower"
    band: int     # trapezoid index j
    diagonal: int  # 0: triangle below the diagonal, 1: above
    source: tuple
    target: tuple
    map: TriangleMap


@dataclass
class TileMesh:
    n: int
    pieces: list
    cuts: list

    @property
    def max_dilatation(self) -> float:
        return max(dilatation(p.map) for p in self.pieces)

    def locate(self, x: float, y: float) -> TilePiece:
        """Piece containing the tile point (x, y); on shared edges the lowest index wins."""
        n = self.n
        a = float(rhombus_half_width(n))
        if abs(x) < a * (1.0 - abs(y)) and abs(y) < 1.0:
            raise ModelError("point inside the rhombus")
        if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
            raise ModelError("point outside the tile")
        side = "left" if x <= 0 else "right"
        half = "upper" if y >= 0 else "lower"
        j = min(bisect.bisect_right([float(c) for c in self.cuts], abs(y)) - 1, n - 1)
        base = self._index[(side, half, j)]
        for k in (base, base + 1):
            lam = _bary(self.pieces[k].source, x, y)
            if lam.min() >= -1e-12:
                return self.pieces[k]
        # round-off at the edges: nearest of the two triangles
        scores = [_bary(self.pieces[k].source, x, y).min() for k in (base, base + 1)]
        return self.pieces[base + int(np.argmax(scores))]

    def __post_init__(self):
        self._index = {}
        for k, p in enumerate(self.pieces):
            self._index.setdefault((p.side, p.half, p.band), k)
        # arrays for vectorised lookup: table[side, half, band] -> first piece index
        self.table = np.zeros((2, 2, self.n), dtype=np.int64)
        for (side, half, band), k in self._index.items():
            self.table[int(side == "right"), int(half == "lower"), band] = k
        self.linear = np.array([p.map.linear for p in self.pieces], dtype=float)
        self.shift = np.array([complex(p.map.shift) for p in self.pieces])
        self.src = np.array([p.source for p in self.pieces])
        self.cuts_float = np.array([float(c) for c in self.cuts])

    def locate_array(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorised ``locate`` (points inside the rhombus get -1)."""
        a = float(rhombus_half_width(self.n))
        inside = (np.abs(x) < a * (1.0 - np.abs(y))) & (np.abs(y) < 1.0)
        side = (x > 0).astype(np.int64)
        half = (y < 0).astype(np.int64)
        band = np.clip(np.searchsorted(self.cuts_float, np.abs(y), side="right") - 1,
                       0, self.n - 1)
        base = self.table[side, half, band]
        tri = self.src[base]
        ax, ay = tri[:, 0].real, tri[:, 0].imag
        bx, by = tri[:, 1].real, tri[:, 1].imag
        cx, cy = tri[:, 2].real, tri[:, 2].imag
        det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
        l1 = ((x - ax) * (cy - ay) - (cx - ax) * (y - ay)) / det
        l2 = ((bx - ax) * (y - ay) - (x - ax) * (by - ay)) / det
        first = np.minimum(np.minimum(1.0 - l1 - l2, l1), l2) >= -1e-12
        piece = np.where(first, base, base + 1)
        return np.where(inside, -1, piece)


def _opnorm(a: np.ndarray) -> np.ndarray:
    """Largest singular value of a stack of 2x2 matrices."""
    p = a[:, 0, 0] ** 2 + a[:, 0, 1] ** 2 + a[:, 1, 0] ** 2 + a[:, 1, 1] ** 2
    det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    return np.sqrt(0.5 * (p + np.sqrt(np.maximum(p * p - 4 * det * det, 0.0))))


def _bary(tri, x, y):
    (ax, ay), (bx, by), (cx, cy) = ((p.real, p.imag) for p in tri)
    det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
    l1 = ((x - ax) * (cy - ay) - (cx - ax) * (y - ay)) / det
    l2 = ((bx - ax) * (y - ay) - (x - ax) * (by - ay)) / det
    return np.array([1.0 - l1 - l2, l1, l2])


@lru_cache(maxsize=None)
def build_Q_subdivision(n: int) -> TileMesh:
    """Triangle mesh of Q(n) with exact affine maps onto the squares of S(n).

    ``4 n`` trapezoids (``2 n`` per component), two triangles each. ``n = 1``
    is allowed: the rhombus then has half-width 1/2.
    """
    if n < 1:
        raise ModelError("n must be >= 1")
    c = cut_heights(n)
    q = Fraction(1, n)
    pieces = []
    for side, sx in (("left", -1), ("right", 1)):
        for half, sy in (("upper", 1), ("lower", -1)):
            for j in range(n):
                w0, w1 = Fraction(2 ** j, 2 ** n), Fraction(2 ** (j + 1), 2 ** n)
                # corners (outer edge, inner edge) at the cut nearer the centre line
                # and at the cut farther from it
                near_out, near_in = (sx, sy * c[j]), (sx * (1 - w0), sy * c[j])
                far_out, far_in = (sx, sy * c[j + 1]), (sx * (1 - w1), sy * c[j + 1])
                t_near_out, t_near_in = (sx * q, sy * j * q), (0, sy * j * q)
                t_far_out, t_far_in = (sx * q, sy * (j + 1) * q), (0, sy * (j + 1) * q)
                corners = {  # (source, target) keyed by position in the trapezoid
                    "near_out": (near_out, t_near_out), "near_in": (near_in, t_near_in),
                    "far_out": (far_out, t_far_out), "far_in": (far_in, t_far_in)}
                # name the four corners by compass position
                pts = list(corners.values())
                bl = min(pts, key=lambda st: (st[0][1], st[0][0]))
                br = max((p for p in pts if p[0][1] == bl[0][1]), key=lambda st: st[0][0])
                top = [p for p in pts if p[0][1] != bl[0][1]]
                tl = min(top, key=lambda st: st[0][0])
                tr = max(top, key=lambda st: st[0][0])
                for d, tri in enumerate(((bl, br, tr), (bl, tr, tl))):
                    src = tuple(p[0] for p in tri)
                    dst = tuple(p[1] for p in tri)
                    if signed_area(src) <= 0 or signed_area(dst) <= 0:
                        raise AssertionError("mesh orientation")
                    m = affine_from_triangles(src, dst)
                    pieces.append(TilePiece(side, half, j, d,
                                            tuple(complex(float(x), float(y)) for x, y in src),
                                            tuple(complex(float(x), float(y)) for x, y in dst), m))
    return TileMesh(n, pieces, c)


def tile_dilatation(n: int) -> float:
    return build_Q_subdivision(n).max_dilatation


# ---------------------------------------------------------------------------
# assembled strip model


@dataclass
class StripMapModel:
    rows: list
    N: int
    L: Fraction
    L_prime: Fraction
    meshes: dict = field(default_factory=dict)

    def __post_init__(self):
        self._tops = [float(r.left_top) for r in self.rows]
        for r in self.rows:
            self.meshes.setdefault(r.n, build_Q_subdivision(r.n))

    # -- strip map -----------------------------------------------------------

    def _locate(self, z: complex):
        """Return (kind, data) for the piece containing z (x already reduced to [0, 1])."""
        y = z.imag
        if y >= 0:
            return "identity", None
        depth = -y
        if depth > float(self.L):
            raise ModelError("point below the truncation level", ("disk",))
        i = bisect.bisect_right(self._tops, depth) - 1
        row = self.rows[i]
        if depth >= float(row.left_bottom) and depth > float(row.left_top):
            return "zone", row
        return "tile", row

    def evaluate_with_jacobian(self, z: complex):
        z = complex(z)
        shift = math.floor(z.real)
        if z.real == shift and shift > 0:
            shift -= 1  # keep x = 1 on the unit strip
        zr = z - shift
        kind, row = self._locate(zr)
        if kind == "identity":
            return z, np.eye(2)
        if kind == "zone":
            return z + 1j * float(row.left_top - row.right_top
                                  + Fraction(1, row.k) - Fraction(row.n, row.k)), np.eye(2)
        k, n = row.k, row.n
        c = min(int(math.floor(zr.real * k)), k - 1)
        tx = 2 * k * (zr.real - c / k) - 1
        ty = 2 * k * (zr.imag + float(row.left_bottom)) - 1
        tx, ty = min(1.0, max(-1.0, tx)), min(1.0, max(-1.0, ty))
        try:
            piece = self.meshes[n].locate(tx, ty)
        except ModelError as exc:
            raise ModelError(f"point inside rhombus (row {row.index}, copy {c})",
                             (row.index, c)) from exc
        xi = piece.map(complex(tx, ty))
        s = n / (2 * k)
        w = complex(c / k + (xi.real + 1 / n) * s,
                    -float(row.right_bottom) + (xi.imag + 1) * s) + shift
        return w, n * piece.map.linear

    def __call__(self, z):
        return self.evaluate_with_jacobian(z)[0]

    def evaluate_array(self, z):
        """Vectorised evaluation: ``(w, jacobians, outside)``.

        ``outside`` flags points inside a rhombus or below the truncation
        level; their ``w`` is nan.
        """
        z = np.asarray(z, dtype=complex).ravel()
        shift = np.floor(z.real)
        shift = np.where((z.real == shift) & (shift > 0), shift - 1, shift)
        x, y = z.real - shift, z.imag
        w = np.full(z.shape, np.nan + 0j)
        jac = np.zeros((z.size, 2, 2))
        bad = np.zeros(z.size, dtype=bool)
        ident = y >= 0
        w[ident] = z[ident]
        jac[ident] = np.eye(2)
        depth = -y
        bad |= ~ident & (depth > float(self.L))
        rest = np.flatnonzero(~ident & ~bad)
        row_of = np.searchsorted(np.array(self._tops), depth[rest], side="right") - 1
        for r in np.unique(row_of):
            row = self.rows[r]
            sel = rest[row_of == r]
            d = depth[sel]
            zone = (d >= float(row.left_bottom)) & (d > float(row.left_top))
            zs = sel[zone]
            off = float(row.left_top - row.right_top + Fraction(1, row.k) - Fraction(row.n, row.k))
            w[zs] = z[zs] + 1j * off
            jac[zs] = np.eye(2)
            ts = sel[~zone]
            if ts.size == 0:
                continue
            k, n = row.k, row.n
            mesh = self.meshes[n]
            c = np.minimum(np.floor(x[ts] * k), k - 1)
            tx = np.clip(2 * k * (x[ts] - c / k) - 1, -1.0, 1.0)
            ty = np.clip(2 * k * (y[ts] + float(row.left_bottom)) - 1, -1.0, 1.0)
            piece = mesh.locate_array(tx, ty)
            hole = piece < 0
            bad[ts[hole]] = True
            ok = ~hole
            pc = piece[ok]
            lin = mesh.linear[pc]
            xi = (lin[:, 0, 0] * tx[ok] + lin[:, 0, 1] * ty[ok]
                  + 1j * (lin[:, 1, 0] * tx[ok] + lin[:, 1, 1] * ty[ok]) + mesh.shift[pc])
            sc = n / (2 * k)
            w[ts[ok]] = (c[ok] / k + (xi.real + 1 / n) * sc
                         + 1j * (-float(row.right_bottom) + (xi.imag + 1) * sc) + shift[ts[ok]])
            jac[ts[ok]] = n * lin
        w[bad] = np.nan
        return w, jac, bad

    def F_array(self, u):
        """Vectorised ``F``: ``(v, planar ||DF||, outside)`` for an array of points."""
        u = np.asarray(u, dtype=complex).ravel()
        small = np.abs(u) <= self.inner_radius
        z = exp_lift(np.where(small, 1.0, u))
        w, jac, bad = self.evaluate_array(z)
        bad |= small
        v = np.where(bad, np.nan, exp_project(np.where(bad, 0, w)))
        norm = _opnorm(jac) * np.abs(v) / np.abs(u)
        return v, norm, bad

    def value_and_jacobian(self, z):
        return self.evaluate_with_jacobian(z)

    # -- projected map -------------------------------------------------------

    @property
    def inner_radius(self) -> float:
        return math.exp(-2 * math.pi * float(self.L))

    @property
    def inner_radius_image(self) -> float:
        return math.exp(-2 * math.pi * float(self.L_prime))

    def evaluate_F(self, u: complex, branch: int = 0) -> complex:
        u = complex(u)
        if abs(u) <= self.inner_radius:
            raise ModelError("|u| <= exp(-2 pi L_N): inside the truncated disk", ("disk",))
        return exp_project(self(exp_lift(u, branch)))

    def F_with_derivative(self, u: complex):
        """``(F(u), ||DF(u)||)`` with the planar operator norm."""
        u = complex(u)
        if abs(u) <= self.inner_radius:
            raise ModelError("inside the truncated disk", ("disk",))
        w, jac = self.evaluate_with_jacobian(exp_lift(u))
        v = exp_project(w)
        return v, abs(v) / abs(u) * float(np.linalg.svd(jac, compute_uv=False)[0])

    # -- geometry of the pieces ----------------------------------------------

    def rhombus_polygon(self, row: RowSpec, copy: int, samples: int = 64) -> np.ndarray:
        """Vertices of the rhombus of a tile in strip coordinates (dense on each edge)."""
        a = float(rhombus_half_width(row.n))
        corners = np.array([1j, -a, -1j, a], dtype=complex)  # counter-clockwise
        t = np.arange(samples) / samples
        edges = [corners[q] + (corners[(q + 1) % 4] - corners[q]) * t for q in range(4)]
        tile = np.concatenate(edges)
        k = row.k
        return (copy / k + (tile.real + 1) / (2 * k)) + 1j * (-float(row.left_bottom)
                                                             + (tile.imag + 1) / (2 * k))

    def slit_segment(self, row: RowSpec, copy: int) -> tuple[complex, complex]:
        x = (copy + 0.5) / row.k
        return complex(x, -float(row.right_bottom)), complex(x, -float(row.right_top))

    def projected_rhombus(self, row: RowSpec, copy: int, samples: int = 64) -> PolygonComponent:
        poly = exp_project(self.rhombus_polygon(row, copy, samples))
        return PolygonComponent(poly)

    def projected_slit(self, row: RowSpec, copy: int) -> SlitComponent:
        a, b = self.slit_segment(row, copy)
        return SlitComponent(exp_project(a), exp_project(b))

    def components(self, samples: int = 32):
        """Matching component lists of U_N and V_N (projected rhombi/slits, then the disk)."""
        src, dst = [], []
        for row in self.rows:
            for c in range(row.k):
                src.append(self.projected_rhombus(row, c, samples))
                dst.append(self.projected_slit(row, c))
        src.append(DiskComponent(0j, self.inner_radius))
        dst.append(DiskComponent(0j, self.inner_radius_image))
        return src, dst

    def domains(self, samples: int = 32):
        src, dst = self.components(samples)
        tail = ell2_tail_bound(self.N)
        return (GeneralizedJordanDomain(src, truncation=self.N, validate=False),
                GeneralizedJordanDomain(dst, tail_rule="counterexample", tail_bound=tail,
                                        truncation=self.N, validate=False))

    # -- serialisation -------------------------------------------------------

    def to_json(self) -> dict:
        rows = [{"index": r.index, "k": r.k, "n": r.n, "delta": str(r.delta),
                 "left_top": str(r.left_top), "right_top": str(r.right_top)} for r in self.rows]
        meshes = {}
        for n, mesh in sorted(self.meshes.items()):
            meshes[str(n)] = [{
                "side": p.side, "half": p.half, "band": p.band, "diagonal": p.diagonal,
                "source": [[z.real, z.imag] for z in p.source],
                "target": [[z.real, z.imag] for z in p.target],
                "linear": p.map.linear.tolist(), "shift": [p.map.shift.real, p.map.shift.imag],
            } for p in mesh.pieces]
        return {"N": self.N, "L": str(self.L), "L_prime": str(self.L_prime),
                "L_float": float(self.L), "L_prime_float": float(self.L_prime),
                "rows": rows, "meshes": meshes,
                "model_choices": {
                    "rhombus": "vertices (0,+-1), (+-(1-2^-n), 0)",
                    "cuts": "y = +-(2^j-1)/(2^n-1), j=0..n",
                    "diagonal": "from the lower-left trapezoid vertex",
                    "delta": "1/k_i"}}


def assemble_strip_map(N: int) -> StripMapModel:
    if N < 1:
        raise ModelError("N must be >= 1")
    rows = []
    A, B = Fraction(0), Fraction(0)
    for i in range(1, N + 1):
        k, n, delta, _ = parameters(i)
        row = RowSpec(i, k, n, delta, A, B)
        rows.append(row)
        A, B = row.left_next, row.right_next
    return StripMapModel(rows, N, A, B)


# ---------------------------------------------------------------------------
# reports


def slit_image_diameters(model: StripMapModel, copies: int = 2) -> dict:
    """Chordal diameter of the projected slits per row and the fitted constant C."""
    rows = []
    for row in model.rows:
        diams = []
        for c in sorted({0, row.k - 1} if copies > 1 else {0}):
            a, b = model.slit_segment(row, c)
            diams.append(chordal_distance(exp_project(a), exp_project(b)))
        a_prev = float(parameters(row.index - 1)[3])
        bound = math.exp(-2 * math.pi * a_prev) * row.n / row.k
        rows.append({"row": row.index, "diameter": max(diams), "bound_unit": bound,
                     "ratio": max(diams) / bound,
                     "outer_modulus": math.exp(-2 * math.pi * float(row.right_top)),
                     "inner_modulus": math.exp(-2 * math.pi * float(row.right_bottom))})
    C = max(r["ratio"] for r in rows)
    return {"rows": rows, "C": C}


def dilatation_profile(model: StripMapModel) -> dict:
    per_row = {r.index: tile_dilatation(r.n) for r in model.rows}
    return {"rows": per_row, "zones": 1.0, "identity": 1.0, "sup": max(per_row.values())}


def sup_tile_dilatation(n_max: int = 64, n_min: int = 2) -> tuple[float, int]:
    values = [(tile_dilatation(n), n) for n in range(n_min, n_max + 1)]
    return max(values)


def ell2_tail_bound(N: int) -> float:
    """Bound for sum_{i > N} exp(-4 pi a_{i-1}) via a_{i-1} >= log i."""
    p = 4 * math.pi
    return N ** (1 - p) / (p - 1)


def series_report(N: int) -> dict:
    if N < 1:
        raise ModelError("N must be >= 1")
    inv_sq = math.fsum(1.0 / (i * i) for i in range(1, N + 1))
    em_tail = 1.0 / N - 1.0 / (2 * N * N) + 1.0 / (6 * N ** 3) - 1.0 / (30 * N ** 5)
    harmonic = 0.0
    a_prev = 0.0
    ell2_terms = []
    first_over_10 = None
    for i in range(1, N + 1):
        ell2_terms.append(math.exp(-4 * math.pi * a_prev))
        harmonic += 1.0 / i
        a_prev = harmonic
        if first_over_10 is None and harmonic > 10:
            first_over_10 = i
    if first_over_10 is None:
        # keep summing past N only to report the crossing index
        i, h = N, harmonic
        while h <= 10:
            i += 1
            h += 1.0 / i
        first_over_10 = i
    ell2 = math.fsum(ell2_terms)
    return {
        "N": N,
        "sum_inv_k": {"partial": inv_sq, "tail_estimate": em_tail, "total": inv_sq + em_tail,
                      "tail_interval": [1.0 / (N + 1), 1.0 / N]},
        "sum_n_over_k": {"partial": harmonic, "first_index_exceeding_10": first_over_10},
        "ell2": {"partial": ell2, "tail_bound": ell2_tail_bound(N),
                 "total_upper": ell2 + ell2_tail_bound(N)},
    }


def fatness_transfer_report(model: StripMapModel, samples: int = 48, rel: float = 0.01) -> dict:
    """Fatness of one projected rhombus per row (copies of a row are rotations of each other)."""
    rows = []
    flat_cache = {}
    for row in model.rows:
        if row.n not in flat_cache:
            a = float(rhombus_half_width(row.n))
            flat_cache[row.n] = fatness_margin(PolygonComponent(np.array([1j, -a, -1j, a])),
                                               rel=rel).value
        comp = model.projected_rhombus(row, 0, samples)
        metric = "planar" if comp.planar_diameter() < 0.25 else "spherical"
        if metric == "planar":
            centroid = np.mean(comp.vertices)
            comp = PolygonComponent(comp.vertices - centroid)
        tau = fatness_margin(comp, metric=metric, rel=rel).value
        rows.append({"row": row.index, "tau": tau, "tau_flat": flat_cache[row.n],
                     "metric": metric, "ratio": tau / flat_cache[row.n]})
    return {"rows": rows, "min_tau": min(r["tau"] for r in rows)}
