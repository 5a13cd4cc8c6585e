"""The ten acceptance checks, shared by the test-suite and ``cofat report``.

Each ``criterion_k()`` returns a :class:`CriterionResult` with a pass flag
and the numbers behind it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import counterexample as cx
from . import modulus as mod
from . import schottky as sk
from . import transboundary as tb
from .domains import DiskComponent, fatness_margin

# golden values, recorded on the first verified run
GOLDEN_K_SUP = 2.618033988749896          # attained at n = 63
GOLDEN_FATNESS_MIN = 0.3444875600790369   # row 1 of the N = 20 model

ANNULUS_TOL = 1e-2


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title}"

    def to_json(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": bool(self.passed),
                "details": self.details}


def _timed(number, title, fn):
    t0 = time.perf_counter()
    passed, details = fn()
    out = CriterionResult(number, title, bool(passed), details, time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    def run():
        d = {}
        t = time.perf_counter()
        sq = mod.solve_modulus(mod.rectangle_grid(1, 1, 128))
        d["square"] = {"modulus": sq.modulus, "seconds": time.perf_counter() - t}
        rect = mod.solve_modulus(mod.rectangle_grid(2, 1, 128))
        d["rectangle_2x1"] = {"modulus": rect.modulus}
        t = time.perf_counter()
        ann = mod.solve_modulus(mod.annulus_grid(1.0, math.e, 256), mod.CurveFamilySpec(16),
                                ANNULUS_TOL)
        d["annulus"] = {"modulus": ann.modulus, "upper": ann.upper, "target": 2 * math.pi,
                        "seconds": time.perf_counter() - t, "tol": ANNULUS_TOL}
        ok = (abs(sq.modulus - 1.0) <= 0.02 and d["square"]["seconds"] < 60
              and abs(rect.modulus - 0.5) <= 0.02 * 0.5
              and abs(ann.modulus - 2 * math.pi) <= 0.05 * 2 * math.pi
              and d["annulus"]["seconds"] < 300)
        return ok, d
    return _timed(1, "discrete modulus golden values", run)


def _random_instance(rng: np.random.Generator) -> tuple[mod.GridDomain, np.ndarray]:
    nx, ny = int(rng.integers(8, 17)), int(rng.integers(8, 17))
    mask = np.ones((ny, nx), dtype=bool)
    a1 = int(rng.integers(0, ny - 2))
    b1 = int(rng.integers(a1 + 1, ny))
    a2 = int(rng.integers(0, ny - 2))
    b2 = int(rng.integers(a2 + 1, ny))
    f1 = np.arange(a1, b1 + 1) * nx
    f2 = np.arange(a2, b2 + 1) * nx + nx - 1
    interior = np.array([j * nx + i for j in range(ny) for i in range(1, nx - 1)])
    e = rng.choice(interior, size=int(rng.integers(1, 3 * ny)), replace=False)
    return mod.GridDomain(nx, ny, 1.0 / max(nx, ny), mask, f1, f2), e


def criterion_2(instances: int = 50, budgets=(0, 1, 2, 3), tol: float = 1e-4) -> CriterionResult:
    """Checked with the certified intervals ``[lower, upper]`` of each solve."""
    def run():
        rng = np.random.default_rng(2024)
        exceptions = []
        for k in range(instances):
            grid, e = _random_instance(rng)
            full = mod.solve_modulus(grid, tol=tol)
            prev = None
            for m in budgets:
                r = mod.restricted_modulus(grid, e, m, tol)
                if r.lower > full.upper:
                    exceptions.append({"instance": k, "budget": m, "kind": "exceeds full"})
                if prev is not None and prev.lower > r.upper:
                    exceptions.append({"instance": k, "budget": m, "kind": "decrease"})
                prev = r
        return not exceptions, {"instances": instances, "budgets": list(budgets),
                                "exceptions": exceptions}
    return _timed(2, "restriction monotonicity", run)


def _probe_grids(sizes):
    return [mod.rectangle_grid(1, 1, n) for n in sizes]


def criterion_3(sizes=(16, 32, 64), tol: float = 1e-6) -> CriterionResult:
    def run():
        pts = [complex(0.3, 0.4), complex(0.5, 0.5), complex(0.7, 0.25)]
        points = mod.cned_probe(_probe_grids(sizes), lambda g: mod.rasterize_points(g, pts),
                                budgets=(1,), tol=tol)
        seg = mod.cned_probe(_probe_grids(sizes),
                             lambda g: mod.rasterize_segment(g, complex(0.5, 0.1),
                                                             complex(0.5, 0.9)),
                             budgets=(0,), tol=tol)
        p_ratios = [r.ratio for r in points["rows"]]
        s_ratios = [r.ratio for r in seg["rows"]]
        ok = all(abs(x - 1.0) <= 1e-6 for x in p_ratios) and s_ratios[-1] <= 0.5
        return ok, {"h": [1.0 / n for n in sizes], "points_m1": p_ratios,
                    "segment_m0": s_ratios}
    return _timed(3, "CNED probe consistency", run)


def criterion_4(N: int = 100_000) -> CriterionResult:
    def run():
        t = time.perf_counter()
        rep = cx.series_report(N)
        sec = time.perf_counter() - t
        err = abs(rep["sum_inv_k"]["total"] - math.pi ** 2 / 6)
        ok = (err <= 1e-9 and rep["sum_n_over_k"]["first_index_exceeding_10"] <= 12400
              and math.isfinite(rep["ell2"]["total_upper"]) and sec < 10)
        return ok, {"report": rep, "inv_sq_error": err, "seconds": sec}
    return _timed(4, "series of the counterexample parameters", run)


def criterion_5() -> CriterionResult:
    def run():
        K, n = cx.sup_tile_dilatation(64, 2)
        return K == GOLDEN_K_SUP, {"sup": K, "at_n": n, "golden": GOLDEN_K_SUP}
    return _timed(5, "uniform tile dilatation", run)


def criterion_6(Ns=(10, 20, 40)) -> CriterionResult:
    def run():
        Cs = {N: cx.slit_image_diameters(cx.assemble_strip_map(N))["C"] for N in Ns}
        hi, lo = max(Cs.values()), min(Cs.values())
        return (hi - lo) / hi <= 0.10, {"C": Cs, "spread": (hi - lo) / hi}
    return _timed(6, "slit diameter bound", run)


def criterion_7(curves: int = 10_000, seed: int = 7, workers: int | None = None
                ) -> CriterionResult:
    def run():
        t = time.perf_counter()
        rep = tb.verify_strip_model(10, tb.BatchSpec.balanced(seed, curves), workers=workers)
        sec = time.perf_counter() - t
        ok = rep["curves"] >= 10_000 and rep["violations"] == 0 and sec < 600
        return ok, {"violations": rep["violations"], "curves": rep["curves"],
                    "worst_margin": rep["worst_margin"], "seconds": sec}
    return _timed(7, "transboundary inequality", run)


def criterion_8(seeds=range(10)) -> CriterionResult:
    def run():
        fits = {a: tb.fit_bojarski_constant(a, list(seeds)) for a in (2.0, 4.0)}
        one = tb.bojarski_check([(0j, 1.0)], [(0j, 1.0)], [1.0])[2]
        disjoint = [(complex(3 * k, 0), 1.0) for k in range(5)]
        fam = tb.bojarski_check(disjoint, disjoint, [0.5, 1, 2, 3, 4])[2]
        ok = (all(f["stable"] for f in fits.values())
              and abs(one - 1) <= 1e-9 and abs(fam - 1) <= 1e-9)
        return ok, {"fits": {str(a): f for a, f in fits.items()},
                    "equality_single": one, "equality_disjoint": fam}
    return _timed(8, "ball-to-set L2 comparison", run)


def criterion_9(configs: int = 100, depth: int = 8, seed: int = 9) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        words = [w for w in sk.enumerate_reduced_words(3, depth + 1) if len(w) == depth + 1]
        failures = []
        w_fail = []
        for c in range(configs):
            circles = sk.random_configuration(rng, 3)
            for w in words:
                chain = sk.nested_disk_sequence(w, depth, circles)
                if not (chain.nested and chain.strictly_decreasing):
                    failures.append({"config": c, "word": list(w)})
            # W regions: separate the circles enough for n = 1 .. 4
            spread = [sk.Circle(3 * ci.center, ci.radius) for ci in circles]
            for n in range(1, 5):
                try:
                    W = sk.build_W_regions(spread, n)
                except sk.SchottkyError:
                    continue
                for b, wr in zip(spread, W):
                    inner = sk.disk_inside(b, wr, strict=True)
                    outer = sk.disk_inside(wr, b.scaled(1 + 1 / n), strict=True)
                    if not (inner and outer):
                        w_fail.append({"config": c, "n": n})
        ok = not failures and not w_fail
        return ok, {"configs": configs, "sequences_per_config": len(words),
                    "nesting_failures": failures[:10], "w_failures": w_fail[:10]}
    return _timed(9, "Schottky nesting and W regions", run)


def criterion_10(N: int = 20) -> CriterionResult:
    def run():
        rep = cx.fatness_transfer_report(cx.assemble_strip_map(N))
        disk = fatness_margin(DiskComponent(0j, 1.0)).value
        ok = rep["min_tau"] >= GOLDEN_FATNESS_MIN * (1 - 1e-9) and rep["min_tau"] > 0 \
            and disk >= 0.7
        return ok, {"min_tau": rep["min_tau"], "golden": GOLDEN_FATNESS_MIN,
                    "disk": disk, "rows": rep["rows"]}
    return _timed(10, "fatness of the projected rhombi", run)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


def run_all(selected=None) -> list[CriterionResult]:
    return [CRITERIA[k]() for k in (selected or sorted(CRITERIA))]
