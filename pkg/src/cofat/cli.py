"""Command-line entry point: ``cofat <command> ...`` (or ``python -m cofat``).

Every command writes one JSON report (CSV for raster/tabular dumps) whose
``config_hash`` is the SHA-256 of the canonical JSON of the knobs. Apart
from the top-level ``timestamp`` field, reports are byte-identical for
identical knobs.

Exit codes: 0 ok, 1 rejected precondition or knob out of range,
2 no convergence, 3 file I/O, 4 malformed JSON input, 5 bad command line.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_PRECONDITION = 1
EXIT_CONVERGENCE = 2
EXIT_IO = 3
EXIT_BAD_JSON = 4
EXIT_USAGE = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# helpers


def jsonable(obj):
    """Convert results to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def config_hash(config: dict) -> str:
    canon = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _config(args) -> dict:
    skip = {"func", "out", "csv", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def emit(args, result: dict) -> None:
    config = _config(args)
    report = {"command": config.get("command"), "config": jsonable(config),
              "config_hash": config_hash(config), "result": jsonable(result),
              "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    _write(getattr(args, "out", None), json.dumps(report, sort_keys=True, indent=2) + "\n")


def emit_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    _write(path, buf.getvalue())


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON in {path}: {exc}", EXIT_BAD_JSON) from exc


def _range(name, value, lo=None, hi=None):
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise CliError(f"--{name} must lie in [{lo}, {hi}], got {value}", EXIT_PRECONDITION)
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _rect(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        return float(w), float(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text}") from exc


def _points(text: str) -> list[complex]:
    try:
        out = []
        for item in text.split(";"):
            if item.strip():
                x, y = item.split(",")
                out.append(complex(float(x), float(y)))
        return out
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'x,y;x,y;...', got {text}") from exc


def _workers(args) -> int:
    from .transboundary import TransboundaryError, default_workers
    if getattr(args, "workers", None) is not None:
        return _range("workers", args.workers, 1, 1024)
    try:
        return default_workers()
    except TransboundaryError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc


# ---------------------------------------------------------------------------
# commands


def cmd_modulus(args):
    from . import modulus as mod
    _range("tol", args.tol, 1e-12, 0.5)
    if args.input:
        try:
            grid, family = mod.grid_from_json(read_json(args.input))
        except ValueError as exc:
            raise CliError(str(exc), EXIT_PRECONDITION) from exc
        if args.connectivity is not None:
            family = mod.CurveFamilySpec(args.connectivity, family.budget)
    else:
        _range("grid", args.grid, 2, 4096)
        if args.annulus:
            inner, outer = args.annulus
            if not 0 < inner < outer:
                raise CliError("--annulus needs 0 < inner < outer", EXIT_PRECONDITION)
            grid = mod.annulus_grid(inner, outer, args.grid)
            conn = args.connectivity or 16
        else:
            w, h = args.rect
            if w <= 0 or h <= 0:
                raise CliError("--rect sides must be positive", EXIT_PRECONDITION)
            grid = mod.rectangle_grid(w, h, args.grid)
            conn = args.connectivity or 4
        if args.exceptional:
            grid = grid.with_exceptional(mod.rasterize_points(grid, args.exceptional))
        family = mod.CurveFamilySpec(conn, args.budget)
    result = mod.solve_modulus(grid, family, args.tol)
    emit(args, {"grid": {"nx": grid.nx, "ny": grid.ny, "h": grid.h},
                "connectivity": family.connectivity, "budget": family.budget,
                **mod.result_to_json(result, args.density)})


def cmd_cned_probe(args):
    from . import modulus as mod
    for n in args.schedule:
        _range("schedule", n, 4, 1024)
    _range("tol", args.tol, 1e-12, 0.5)
    grids = [mod.rectangle_grid(1, 1, n) for n in args.schedule]
    if args.case == "points":
        pts = args.points or [complex(0.3, 0.4), complex(0.5, 0.5), complex(0.7, 0.25)]
        exc = lambda g: mod.rasterize_points(g, pts)  # noqa: E731
        budgets = args.budget if args.budget is not None else [1]
    else:
        a, b = complex(0.5, 0.1), complex(0.5, 0.9)
        exc = lambda g: mod.rasterize_segment(g, a, b)  # noqa: E731
        budgets = args.budget if args.budget is not None else [0]
    rep = mod.cned_probe(grids, exc, budgets=budgets, tol=args.tol)
    rows = [{"h": r.h, "budget": r.budget, "restricted": r.restricted,
             "unrestricted": r.unrestricted, "ratio": r.ratio} for r in rep["rows"]]
    emit(args, {"rows": rows, "consistent_with_cned": rep["consistent_with_cned"],
                "note": rep["note"]})


def cmd_fatness(args):
    from .domains import DiskComponent, GeneralizedJordanDomain, fatness_margin
    _range("rel", args.rel, 1e-6, 0.5)
    if args.domain:
        domain = GeneralizedJordanDomain.from_json(read_json(args.domain))
        comps = domain.components
    else:
        comps = [DiskComponent(0j, _range("disk", args.disk, 1e-12, None))]
    rows = []
    for i, c in enumerate(comps):
        est = fatness_margin(c, metric=args.metric, rel=args.rel)
        rows.append({"component": i, "kind": c.kind, "tau": est.value, "center": est.center,
                     "radius": est.radius, "metric": est.metric})
    taus = [r["tau"] for r in rows]
    emit(args, {"components": rows, "min_tau": min(taus) if taus else None})


def cmd_counterexample(args):
    from . import counterexample as cx
    sub = args.action
    if sub == "build":
        model = cx.assemble_strip_map(_range("rows", args.rows, 1, 200))
        emit(args, {"L": model.to_json()["L_float"], "L_prime": float(model.L_prime),
                    "model": model.to_json()})
    elif sub == "report":
        model = cx.assemble_strip_map(_range("rows", args.rows, 1, 200))
        diam = cx.slit_image_diameters(model)
        fat = {r["row"]: r["tau"] for r in cx.fatness_transfer_report(model)["rows"]}
        table = [(r["row"], cx.tile_dilatation(model.rows[r["row"] - 1].n), r["diameter"],
                  r["bound_unit"] * diam["C"], fat[r["row"]]) for r in diam["rows"]]
        if args.csv:
            emit_csv(args.csv, ["row", "K_max", "slit_diameter", "bound", "tau"], table)
        emit(args, {"C": diam["C"], "rows": [dict(zip(
            ["row", "K_max", "slit_diameter", "bound", "tau"], t)) for t in table]})
    elif sub == "series":
        emit(args, cx.series_report(_range("N", args.N, 1, 10**7)))
    elif sub == "dilatation":
        K, n = cx.sup_tile_dilatation(_range("n-max", args.n_max, 2, 256), 2)
        emit(args, {"sup": K, "at_n": n,
                    "per_n": {m: cx.tile_dilatation(m) for m in range(2, args.n_max + 1)}})
    elif sub == "diameters":
        Cs = {N: cx.slit_image_diameters(cx.assemble_strip_map(_range("rows", N, 1, 200)))["C"]
              for N in args.rows_list}
        hi, lo = max(Cs.values()), min(Cs.values())
        emit(args, {"C": Cs, "spread": (hi - lo) / hi})
    elif sub == "fatness":
        rep = cx.fatness_transfer_report(cx.assemble_strip_map(_range("rows", args.rows, 1, 200)))
        emit(args, rep)


def cmd_transboundary(args):
    from . import counterexample as cx
    from . import transboundary as tb
    if args.action == "verify":
        rows = _range("rows", args.rows, 1, 60)
        if args.batch:
            spec = tb.BatchSpec.from_json(read_json(args.batch))
        else:
            if args.seed is None:
                raise CliError("--seed is required for randomized commands", EXIT_PRECONDITION)
            spec = tb.BatchSpec.balanced(args.seed, _range("curves", args.curves, 1, 10**7),
                                         rel_tol=args.rel_tol, abs_tol=args.abs_tol)
        emit(args, tb.verify_strip_model(rows, spec, workers=_workers(args)))
    elif args.action == "hn":
        model = cx.assemble_strip_map(_range("rows", args.rows, 1, 60))
        corr = tb.strip_correspondence(model)
        out = {}
        for n in args.n:
            r = tb.hn_gm_check(corr.source, corr, _range("n", n, 1, 10**6))
            out[n] = {"norm_sq": r.norm_sq, "bound": r.bound, "c": r.c}
        cs = [v["c"] for v in out.values()]
        emit(args, {"per_n": out, "spread": (max(cs) - min(cs)) / max(cs)})
    elif args.action == "bojarski":
        if args.seeds is None:
            raise CliError("--seeds is required for randomized commands", EXIT_PRECONDITION)
        _range("a", args.a, 1.0, 1e6)
        emit(args, tb.fit_bojarski_constant(args.a, list(range(_range("seeds", args.seeds, 1,
                                                                          10**4)))))


def _load_circles(path):
    from .domains import DiskComponent, GeneralizedJordanDomain
    from .geom_kernel import Circle
    domain = GeneralizedJordanDomain.from_json(read_json(path), validate=False)
    if not all(isinstance(c, DiskComponent) for c in domain.components):
        raise CliError("Schottky input accepts circle components only", EXIT_PRECONDITION)
    return [Circle(c.center, c.radius) for c in domain.components]


def cmd_schottky(args):
    from . import schottky as sk
    if args.action == "classify":
        circles = _load_circles(args.domain)
        nx, ny = args.raster
        _range("raster", nx * ny, 1, 10**7)
        _range("cap", args.cap, 0, 64)
        _range("eps", args.eps, 1e-300, 1.0)
        x0, x1, y0, y1 = args.bbox
        rows = sk.classify_raster(circles, (x0, x1), (y0, y1), nx, ny, args.cap, args.eps)
        if args.csv:
            emit_csv(args.csv, ["x", "y", "label", "depth"], rows)
        counts = {}
        for r in rows:
            counts[r[2]] = counts.get(r[2], 0) + 1
        emit(args, {"points": len(rows), "counts": counts})
    elif args.action == "nesting":
        import numpy as _np
        if args.seed is None:
            raise CliError("--seed is required for randomized commands", EXIT_PRECONDITION)
        rng = _np.random.default_rng(args.seed)
        depth = _range("depth", args.depth, 1, 12)
        words = [w for w in sk.enumerate_reduced_words(3, depth + 1) if len(w) == depth + 1]
        bad = 0
        for _ in range(_range("configs", args.configs, 1, 10**5)):
            circles = sk.random_configuration(rng, 3)
            for w in words:
                ch = sk.nested_disk_sequence(w, depth, circles)
                bad += not (ch.nested and ch.strictly_decreasing)
        emit(args, {"configs": args.configs, "sequences": len(words) * args.configs,
                    "failures": bad})
    elif args.action == "w":
        circles = _load_circles(args.domain)
        W = sk.build_W_regions(circles, _range("n", args.n, 1, 10**6))
        out = []
        for b, w in zip(circles, W):
            out.append({"center": b.center, "radius": b.radius, "w_radius": w.radius,
                        "closure_inside_W": sk.disk_inside(b, w),
                        "W_inside_enlarged": sk.disk_inside(w, b.scaled(1 + 1 / args.n)),
                        "eccentricity": 1.0})
        emit(args, {"n": args.n, "regions": out})


def cmd_report(args):
    from . import acceptance
    chosen = args.criteria or sorted(acceptance.CRITERIA)
    for k in chosen:
        _range("criteria", k, 1, 10)
    results = []
    for k in chosen:
        r = acceptance.CRITERIA[k]()
        print(r.line(), file=sys.stderr)
        results.append(r.to_json())
    emit(args, {"criteria": results, "all_passed": all(r["passed"] for r in results)})
    if not all(r["passed"] for r in results):
        raise CliError("acceptance criteria failed", EXIT_CONVERGENCE)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cofat", description="Circle-domain rigidity toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", default=None, help="report path (default: stdout)")
        return sp

    m = common(sub.add_parser("modulus", help="discrete modulus of a grid family"))
    m.add_argument("--grid", type=int, default=128, help="cells per unit (rectangles) or "
                   "cells across (annulus)")
    shape = m.add_mutually_exclusive_group()
    shape.add_argument("--rect", type=_rect, default=(1.0, 1.0), help="WxH, crossed left to right")
    shape.add_argument("--annulus", type=_float_list, help="INNER,OUTER radii")
    shape.add_argument("--input", help="grid problem JSON")
    m.add_argument("--connectivity", type=int, choices=(4, 8, 16))
    m.add_argument("--budget", type=int, default=None)
    m.add_argument("--exceptional", type=_points, help="points of E: 'x,y;x,y'")
    m.add_argument("--tol", type=float, default=1e-3)
    m.add_argument("--density", action="store_true", help="include the density payload")
    m.set_defaults(func=cmd_modulus)

    c = common(sub.add_parser("cned-probe", help="restricted/unrestricted modulus table"))
    c.add_argument("--case", choices=("points", "segment"), required=True)
    c.add_argument("--schedule", type=_int_list, default=[16, 32, 64])
    c.add_argument("--budget", type=_int_list, default=None)
    c.add_argument("--points", type=_points, default=None)
    c.add_argument("--tol", type=float, default=1e-6)
    c.set_defaults(func=cmd_cned_probe)

    f = common(sub.add_parser("fatness", help="fatness margins of domain components"))
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--domain", help="domain JSON")
    g.add_argument("--disk", type=float, help="radius of a disk centred at 0")
    f.add_argument("--metric", choices=("planar", "spherical", "auto"), default="planar")
    f.add_argument("--rel", type=float, default=0.01)
    f.set_defaults(func=cmd_fatness)

    ce = sub.add_parser("counterexample", help="the strip-map counterexample")
    cs = ce.add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = common(cs.add_parser("build"))
    b.add_argument("--rows", type=int, required=True)
    r = common(cs.add_parser("report"))
    r.add_argument("--rows", type=int, required=True)
    r.add_argument("--csv", default=None, help="per-row CSV path")
    s = common(cs.add_parser("series"))
    s.add_argument("--N", type=int, default=100_000)
    d = common(cs.add_parser("dilatation"))
    d.add_argument("--n-max", type=int, default=64)
    dm = common(cs.add_parser("diameters"))
    dm.add_argument("--rows", dest="rows_list", type=_int_list, default=[10, 20, 40])
    ft = common(cs.add_parser("fatness"))
    ft.add_argument("--rows", type=int, default=20)
    ce.set_defaults(func=cmd_counterexample)

    t = sub.add_parser("transboundary", help="transboundary inequality harness")
    ts = t.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = common(ts.add_parser("verify"))
    v.add_argument("--rows", type=int, default=10)
    v.add_argument("--curves", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--batch", default=None, help="batch spec JSON (overrides --curves/--seed)")
    v.add_argument("--rel-tol", type=float, default=1e-6)
    v.add_argument("--abs-tol", type=float, default=1e-9)
    v.add_argument("--workers", type=int, default=None)
    hn = common(ts.add_parser("hn"))
    hn.add_argument("--rows", type=int, default=20)
    hn.add_argument("--n", type=_int_list, default=[1, 2, 4])
    bj = common(ts.add_parser("bojarski"))
    bj.add_argument("--a", type=float, default=2.0)
    bj.add_argument("--seeds", type=int, default=None)
    t.set_defaults(func=cmd_transboundary)

    sc = sub.add_parser("schottky", help="reflection group tools")
    ss = sc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    cl = common(ss.add_parser("classify"))
    cl.add_argument("--domain", required=True)
    cl.add_argument("--bbox", type=_float_list, default=[-4.0, 4.0, -4.0, 4.0])
    cl.add_argument("--raster", type=_int_list, default=[64, 64])
    cl.add_argument("--cap", type=int, default=16)
    cl.add_argument("--eps", type=float, default=1e-9)
    cl.add_argument("--csv", default=None, help="raster CSV path (x, y, label, depth)")
    ne = common(ss.add_parser("nesting"))
    ne.add_argument("--configs", type=int, default=100)
    ne.add_argument("--depth", type=int, default=8)
    ne.add_argument("--seed", type=int, default=None)
    w = common(ss.add_parser("w"))
    w.add_argument("--domain", required=True)
    w.add_argument("--n", type=int, default=1)
    sc.set_defaults(func=cmd_schottky)

    rp = common(sub.add_parser("report", help="run acceptance criteria"))
    rp.add_argument("--criteria", type=_int_list, default=None)
    rp.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    from .counterexample import ModelError
    from .domains import DomainError
    from .geom_kernel import GeometryError
    from .modulus import ModulusError
    from .schottky import SchottkyError
    from .transboundary import TransboundaryError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "modulus" and args.annulus is not None and len(args.annulus) != 2:
        print("cofat: --annulus needs INNER,OUTER", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "schottky" and args.action == "classify" and (
            len(args.bbox) != 4 or len(args.raster) != 2):
        print("cofat: --bbox needs 4 numbers and --raster 2 integers", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except CliError as exc:
        print(f"cofat: {exc}", file=sys.stderr)
        return exc.code
    except ModulusError as exc:
        print(f"cofat: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ModelError, DomainError, GeometryError, SchottkyError, TransboundaryError,
            ValueError) as exc:
        print(f"cofat: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"cofat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
