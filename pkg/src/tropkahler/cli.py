"""Command line entry point: ``tropkahler <subcommand> --input cubic ...``."""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .degeneration import FamilyParameter
from .harness import (DocumentError, Table, _context, amoeba_svg, cell_id, csv_text, emit, evaluate, load,
                      realize, run_sweep, sample_plans, subdivision_svg, sweep_tables)
from .hyperbolic import compare_limit_metric, pants_grid
from .lattice import Cell, certify_dominance_threshold, cover_degree, strata
from .metric import volume_normalization
from .moment import MomentError, edge_datum, interior_samples, moment_polytope, scaling_experiment


def _grid(text: str | None):
    if not text:
        return None
    out = []
    for part in text.split(","):
        bits = part.split(":")
        out.append((float(bits[0]), float(bits[1]) if len(bits) > 1 else 0.0))
    return tuple(out)


def _doc(args):
    doc = load(args.input)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.kappa is not None:
        changes["kappa"] = args.kappa
    if args.t_grid:
        changes["t_grid"] = _grid(args.t_grid)
    if getattr(args, "per_chart", None):
        changes["per_chart"] = args.per_chart
    return doc.with_(**changes) if changes else doc


def _cell(text: str) -> Cell:
    return Cell.of(_cell_order(text))


def _out(args, tables: dict, svgs: dict | None = None):
    if args.out_dir:
        for path in emit(tables, args.out_dir, args.format, svgs):
            print(path)
    else:
        for name, table in tables.items():
            if len(tables) > 1:
                print(f"# {name}")
            sys.stdout.write(csv_text(table))


def cmd_subdivide(args):
    fam = _doc(args).family()
    z = fam.subdivision
    rep = strata(z)
    rows = []
    for info in rep.strata:
        c = info.cell
        rows.append([cell_id(c.ordered), c.dimension, c.is_simplex, c in z.top,
                     cover_degree(c) if c.is_simplex and len(c) > 1 else 1, info.interior])
    table = Table(["cell", "dimension", "simplex", "top", "cover_degree", "interior"], rows)
    svgs = {"subdivision": subdivision_svg(fam)} if fam.rank == 2 else {}
    _out(args, {"subdivision": table}, svgs)


def cmd_certify(args):
    fam = _doc(args).family()
    thr = certify_dominance_threshold(fam.polytope, fam.heights, fam.subdivision)
    if thr.unconstrained:
        row = ["unconstrained", "", "", ""]
    else:
        row = [str(thr.value), cell_id(thr.witness.ordered), str(thr.gap), str(thr.spread)]
    _out(args, {"threshold": Table(["a", "witness", "gap", "spread"], [row])})


def cmd_sample(args):
    doc = _doc(args)
    ctx = _context(doc)
    rows = []
    for r, th in doc.t_grid:
        t = FamilyParameter(r, th)
        for plan in sample_plans(ctx.family, doc):
            p = realize(ctx.family, plan, t)
            x = p.point
            rows.append([r, th, plan.index, cell_id(plan.order),
                         " ".join(repr(float(v)) for v in x.log_abs),
                         " ".join(repr(float(v)) for v in x.arg), float(p.residual)])
    _out(args, {"samples": Table(["t", "theta", "sample", "chart", "log_abs", "arg", "residual"], rows)})


def cmd_metric(args):
    doc = _doc(args).with_(curvature=False)
    ctx = _context(doc)
    const = volume_normalization(ctx.family.rank, float(ctx.kappa)) if ctx.family.rank >= 2 else float("nan")
    rows = []
    for r, th in doc.t_grid:
        for plan in sample_plans(ctx.family, doc):
            row = evaluate(ctx, plan, FamilyParameter(r, th))
            rows.append([row.t, row.sample, row.terminal, row.phi, row.ratio_min, row.ratio_max,
                         const, ctx.kappa, row.error])
    _out(args, {"metric": Table(["t", "sample", "terminal", "phi", "ratio_min", "ratio_max",
                                 "phi_constant", "kappa", "error"], rows)})


def cmd_sweep(args):
    res = run_sweep(_doc(args), workers=args.workers)
    _out(args, sweep_tables(res))


def cmd_moment(args):
    doc = _doc(args)
    z = doc.family().subdivision
    if args.edge:
        edges = [_cell(args.edge)]
    else:
        edges = sorted(c for c in z.cells if len(c) == 2 and len(z.cells_containing(c.members, True)) == 2)
    taus = [float(x) for x in args.tau_grid.split(",")]
    rng = np.random.default_rng(doc.seed)
    poly_rows, scal_rows = [], []
    for e in edges:
        try:
            d = edge_datum(e, z)
            poly = moment_polytope(d, 1.0)
        except MomentError as exc:
            poly_rows.append([cell_id(e.ordered), "", "", "", str(exc)])
            continue
        verts = "" if poly.vertices is None else " ".join(
            "(" + ",".join(repr(float(c)) for c in v) + ")" for v in poly.vertices)
        poly_rows.append([cell_id(e.ordered), str(d.min_height), poly.bounded, verts, ""])
        if poly.bounded:
            ex = scaling_experiment(d, taus, interior_samples(d, args.samples, rng))
            for s in ex.shifts:
                scal_rows.append([cell_id(e.ordered), s.tau, s.shift, s.spread, ex.exponent, ex.match])
    _out(args, {"polytope": Table(["edge", "min_height", "bounded", "vertices", "error"], poly_rows),
                "scaling": Table(["edge", "tau", "shift", "spread", "fitted_exponent", "match"], scal_rows)})


def _cell_order(text: str):
    return tuple(tuple(int(c) for c in m.split(",")) for m in text.split(";"))


def cmd_hyperbolic(args):
    doc = _doc(args)
    order = _cell_order(args.chart) if args.chart else sorted(doc.family().subdivision.top)[0].ordered
    rep = compare_limit_metric(order, pants_grid(args.grid), doc.kappa)
    rows = [[row.z.real, row.z.imag, row.limit_density, row.einstein_density, row.ratio] for row in rep.rows]
    lo, hi = rep.window
    print(f"# window [{lo!r}, {hi!r}] einstein_factor {rep.einstein_factor!r}", file=sys.stderr)
    _out(args, {"hyperbolic": Table(["z_re", "z_im", "limit_density", "einstein_density", "ratio"], rows)})


def cmd_amoeba(args):
    doc = _doc(args)
    fam = doc.family()
    r, th = doc.t_grid[0] if not args.t else (args.t, 0.0)
    t = FamilyParameter(r, th)
    pts = []
    for plan in sample_plans(fam, doc):
        pts.append(realize(fam, plan, t).point.log_abs)
    table = Table([f"log_abs_{i + 1}" for i in range(fam.rank)], [list(map(float, p)) for p in pts])
    svgs = {"amoeba": amoeba_svg(fam, t, pts)} if fam.rank == 2 else {}
    _out(args, {"amoeba": table}, svgs)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tropkahler", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", default="cubic", help="document path or bundled name")
        p.add_argument("--seed", type=int)
        p.add_argument("--t-grid", help="comma-separated |t| values, optionally r:theta")
        p.add_argument("--kappa", type=float)
        p.add_argument("--out-dir")
        p.add_argument("--format", choices=("csv", "svg"), default="csv")
        return p

    common(sub.add_parser("subdivide")).set_defaults(fn=cmd_subdivide)
    common(sub.add_parser("certify-a")).set_defaults(fn=cmd_certify)
    p = common(sub.add_parser("sample"))
    p.add_argument("--per-chart", type=int)
    p.set_defaults(fn=cmd_sample)
    p = common(sub.add_parser("metric-report"))
    p.add_argument("--per-chart", type=int)
    p.set_defaults(fn=cmd_metric)
    p = common(sub.add_parser("sweep"))
    p.add_argument("--per-chart", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)
    p = common(sub.add_parser("moment"))
    p.add_argument("--edge", help="e.g. '1,1;1,0'")
    p.add_argument("--tau-grid", default="10,100,1000")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(fn=cmd_moment)
    p = common(sub.add_parser("hyperbolic-compare"))
    p.add_argument("--chart", help="ordered top cell, e.g. '1,1;1,0;2,0'")
    p.add_argument("--grid", type=int, default=20)
    p.set_defaults(fn=cmd_hyperbolic)
    p = common(sub.add_parser("amoeba"))
    p.add_argument("--t", type=float)
    p.add_argument("--per-chart", type=int)
    p.set_defaults(fn=cmd_amoeba)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (DocumentError, MomentError, OSError) as exc:
        print(f"tropkahler {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
