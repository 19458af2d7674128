"""Problem documents, seeded sweeps, frame probes and report emission."""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .degeneration import (ChartError, Family, FamilyParameter, FiberError, HypersurfacePoint,
                           continue_fiber, solve_fiber)
from .lattice import HeightFunction, Point, certify_dominance_threshold
from .metric import (MetricError, StencilError, fiber_density, gauss_curvature, kahler_form,
                     metric_report)
from .tropical import DEFAULT_KAPPA, dominance, dominant_set, in_own_chart, tropical_curve

BUNDLED = ("cubic", "unit_simplex", "square_diagonal")


class DocumentError(ValueError):
    def __init__(self, line: int | None, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# documents


@dataclass(frozen=True)
class ProblemDocument:
    name: str
    rank: int
    heights: dict                       # Point -> Fraction
    seed: int
    kappa: float = DEFAULT_KAPPA
    t_grid: tuple[tuple[float, float], ...] = tuple((10.0 ** -k, 0.0) for k in range(2, 9))
    per_chart: int = 6
    depth: float = 0.95
    curvature: bool = True
    lines: dict = field(default_factory=dict, compare=False)   # Point -> source line

    def family(self) -> Family:
        return Family(HeightFunction(dict(self.heights)))

    def with_(self, **changes) -> "ProblemDocument":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(changes)
        return ProblemDocument(**vals)


def _parse_number(text: str, line: int, what: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise DocumentError(line, f"cannot read {what} {text.strip()!r}") from None


def parse(text: str) -> ProblemDocument:
    """Read the keyed-section text format (``[problem]``, ``[points]``, ``[t-grid]``, ``[samples]``)."""
    section = None
    seen: set[str] = set()
    problem: dict[str, tuple[str, int]] = {}
    samples: dict[str, tuple[str, int]] = {}
    points: dict = {}
    where: dict = {}
    grid: list[tuple[float, float]] = []
    known = {"problem", "points", "t-grid", "samples"}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise DocumentError(no, f"malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in known:
                raise DocumentError(no, f"unknown section [{section}]")
            if section in seen:
                raise DocumentError(no, f"section [{section}] repeated")
            seen.add(section)
            continue
        if section is None:
            raise DocumentError(no, "content before the first section")
        if section in ("problem", "samples"):
            if "=" not in line:
                raise DocumentError(no, "expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            (problem if section == "problem" else samples)[k] = (v, no)
        elif section == "points":
            if "=" not in line:
                raise DocumentError(no, "expected 'coordinates = height'")
            lhs, rhs = line.split("=", 1)
            try:
                m = tuple(int(c) for c in lhs.split())
            except ValueError:
                raise DocumentError(no, f"lattice coordinates must be integers: {lhs.strip()!r}") from None
            if m in points:
                raise DocumentError(no, f"duplicate point {m} (first given on line {where[m]})")
            points[m] = _parse_number(rhs, no, "height")
            where[m] = no
        else:
            parts = line.split()
            if len(parts) not in (1, 2):
                raise DocumentError(no, "t-grid lines are 'r' or 'r theta'")
            try:
                r = float(parts[0])
                th = float(parts[1]) if len(parts) == 2 else 0.0
            except ValueError:
                raise DocumentError(no, f"cannot read t value {line!r}") from None
            if not 0.0 < r < 1.0:
                raise DocumentError(no, f"|t| = {r} is not in (0, 1)")
            grid.append((r, th))

    if not points:
        raise DocumentError(None, "no lattice points given")
    if "seed" not in problem:
        raise DocumentError(None, "[problem] must set a seed")
    rank_default = len(next(iter(points)))
    rank_text, rank_line = problem.get("rank", (str(rank_default), None))
    try:
        rank = int(rank_text)
    except ValueError:
        raise DocumentError(rank_line, f"rank must be an integer, got {rank_text!r}") from None
    for m, no in where.items():
        if len(m) != rank:
            raise DocumentError(no, f"point {m} does not have {rank} coordinates")
    try:
        seed = int(problem["seed"][0])
    except ValueError:
        raise DocumentError(problem["seed"][1], "seed must be an integer") from None
    kw: dict = {}
    if "kappa" in problem:
        kw["kappa"] = float(_parse_number(problem["kappa"][0], problem["kappa"][1], "kappa"))
        if kw["kappa"] <= 0:
            raise DocumentError(problem["kappa"][1], "kappa must be positive")
    if grid:
        kw["t_grid"] = tuple(grid)
    if "per-chart" in samples:
        kw["per_chart"] = int(samples["per-chart"][0])
    if "depth" in samples:
        kw["depth"] = float(samples["depth"][0])
    if "curvature" in samples:
        kw["curvature"] = samples["curvature"][0].lower() in ("yes", "true", "1")
    doc = ProblemDocument(problem.get("name", ("unnamed", 0))[0], rank, points, seed, lines=where, **kw)
    from .lattice import lattice_points
    hull = set(lattice_points(list(points)).points)
    missing = sorted(hull - set(points))
    if missing:
        raise DocumentError(None, f"heights missing for lattice points {missing}")
    return doc


def load(source: str | os.PathLike) -> ProblemDocument:
    """Parse a file path or the name of a bundled document."""
    name = str(source)
    if name in BUNDLED:
        return parse(resources.files("tropkahler").joinpath("data", f"{name}.txt").read_text())
    return parse(Path(source).read_text())


# ---------------------------------------------------------------------------
# sampling


def cell_id(members: Iterable[Point]) -> str:
    return ";".join(",".join(str(c) for c in m) for m in members)


@dataclass(frozen=True)
class SamplePlan:
    """A point fixed in tropical units: ``log|z_j| = -depth_j * reach_j * log(1/|t|)``."""

    index: int
    order: tuple[Point, ...]
    depths: tuple[float, ...]
    phases: tuple[float, ...]


def chart_reach(chart, j: int) -> float:
    """How far ``log|z_j|`` can drop, in units of ``log(1/|t|)``, before another monomial
    overtakes ``z_j`` (other free coordinates held at modulus one)."""
    d = math.inf
    for i in range(len(chart.family)):
        if chart.in_cell[i]:
            continue
        c = chart.coords[i, j]
        if c < 1:
            d = min(d, chart.gauge[i] / (1.0 - c))
    return d


FIXED_RANGE = 3.0   # log-radius range used when nothing limits a coordinate


def sample_plans(family: Family, doc: ProblemDocument) -> list[SamplePlan]:
    rng = np.random.default_rng(doc.seed)
    plans = []
    l = family.rank
    for s in sorted(family.subdivision.top):
        perms = sorted(itertools.permutations(s.ordered))
        for k in range(doc.per_chart):
            order = perms[k % len(perms)]
            depths = tuple(float(x) for x in doc.depth * rng.uniform(0.0, 1.0, l - 1))
            phases = tuple(float(x) for x in rng.uniform(-math.pi, math.pi, l - 1))
            plans.append(SamplePlan(len(plans), order, depths, phases))
    return plans


def realize(family: Family, plan: SamplePlan, t: FamilyParameter) -> HypersurfacePoint:
    chart = family.chart(plan.order)
    big_l = -math.log(t.r)
    logs = []
    for j, (dep, ph) in enumerate(zip(plan.depths, plan.phases), start=1):
        reach = chart_reach(chart, j)
        u = -dep * (reach * big_l if math.isfinite(reach) else FIXED_RANGE)
        logs.append(complex(u, ph))
    return solve_fiber(t, chart, logs, policy="tropically-nearest", log_input=True)[0]


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    t: float
    theta: float
    sample: int
    chart: str
    log_abs: str
    arg: str
    dominant_set: str
    terminal: str
    residual: float
    phi: float
    ratio_min: float
    ratio_max: float
    abs_curvature: float
    error: str

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list[str]:
        return [_fmt(getattr(self, f.name)) for f in fields(self)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


@dataclass(frozen=True)
class _Context:
    family: Family
    a: float
    kappa: float
    curvature: bool


def _context(doc: ProblemDocument) -> _Context:
    fam = doc.family()
    if not fam.generic:
        raise ValueError("sweep needs a generic subdivision")
    thr = certify_dominance_threshold(fam.polytope, fam.heights, fam.subdivision)
    # any positive exponent is certified when every subset is a face
    a = 1.0 if thr.unconstrained else float(thr.value)
    return _Context(fam, a, doc.kappa, doc.curvature and fam.rank == 2)


def evaluate(ctx: _Context, plan: SamplePlan, t: FamilyParameter) -> SweepRow:
    nan = math.nan
    base = dict(t=t.r, theta=t.theta, sample=plan.index, chart=cell_id(plan.order))
    try:
        p = realize(ctx.family, plan, t)
    except (FiberError, ChartError, ValueError) as exc:
        return SweepRow(**base, log_abs="", arg="", dominant_set="", terminal="", residual=nan,
                        phi=nan, ratio_min=nan, ratio_max=nan, abs_curvature=nan,
                        error=type(exc).__name__)
    x = p.point
    out = dict(base, log_abs=" ".join(repr(float(v)) for v in x.log_abs),
               arg=" ".join(repr(float(v)) for v in x.arg), residual=float(p.residual))
    err = ""
    dom = term = ""
    phi = lo = hi = curv = nan
    try:
        dom = cell_id(dominant_set(ctx.family, t, x, ctx.a).ordered)
        q, filt = in_own_chart(p, ctx.a)
        term = cell_id(filt.terminal.ordered)
        rep = metric_report(t, q, ctx.kappa)
        phi, lo, hi = rep.phi, rep.ratio_min, rep.ratio_max
        if ctx.curvature:
            z2 = complex(np.exp(q.logz[1]))
            curv = abs(gauss_curvature(fiber_density(t, q, ctx.kappa), z2, h=1e-2 * abs(z2)))
    except (MetricError, ChartError, FiberError, StencilError, ValueError, AssertionError) as exc:
        err = type(exc).__name__
    return SweepRow(**out, dominant_set=dom, terminal=term, phi=phi, ratio_min=lo, ratio_max=hi,
                    abs_curvature=curv, error=err)


_WORKER: dict = {}


def _init_worker(doc: ProblemDocument):
    _WORKER["ctx"] = _context(doc)


def _task(args):
    plan, r, th = args
    return evaluate(_WORKER["ctx"], plan, FamilyParameter(r, th))


@dataclass(frozen=True)
class SweepSummary:
    per_t: tuple[dict, ...]
    cauchy: tuple[dict, ...]


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    summary: SweepSummary
    a: float
    kappa: float


def summarize(rows: Sequence[SweepRow], grid: Sequence[tuple[float, float]]) -> SweepSummary:
    per_t = []
    for r, th in grid:
        sel = [x for x in rows if x.t == r and x.theta == th]
        ok = [x for x in sel if not x.error]
        windows = {}
        for x in ok:
            if x.terminal:
                lo, hi = windows.get(x.terminal, (math.inf, 0.0))
                windows[x.terminal] = (min(lo, x.ratio_min), max(hi, x.ratio_max))
        curv = [x.abs_curvature for x in ok if not math.isnan(x.abs_curvature)]
        per_t.append(dict(t=r, theta=th, rows=len(sel), errors=len(sel) - len(ok),
                          max_abs_phi=max((abs(x.phi) for x in ok), default=math.nan),
                          max_abs_curvature=max(curv, default=math.nan),
                          windows=dict(sorted(windows.items()))))
    cauchy = []
    for a, b in zip(per_t, per_t[1:]):
        common = sorted(set(a["windows"]) & set(b["windows"]))
        dw = max((max(abs(a["windows"][s][i] - b["windows"][s][i]) / abs(b["windows"][s][i])
                      for i in (0, 1)) for s in common), default=math.nan)
        cauchy.append(dict(t=b["t"], phi=abs(a["max_abs_phi"] - b["max_abs_phi"]) / abs(b["max_abs_phi"]),
                           window=dw))
    return SweepSummary(tuple(per_t), tuple(cauchy))


def run_sweep(doc: ProblemDocument, workers: int = 1) -> SweepResult:
    """Evaluate every (t, sample) pair; rows come back in grid-major order whatever ``workers`` is."""
    ctx = _context(doc)
    plans = sample_plans(ctx.family, doc)
    tasks = [(plan, r, th) for r, th in doc.t_grid for plan in plans]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(doc,)) as ex:
            rows = list(ex.map(_task, tasks, chunksize=16))
    else:
        rows = [evaluate(ctx, plan, FamilyParameter(r, th)) for plan, r, th in tasks]
    return SweepResult(tuple(rows), summarize(rows, doc.t_grid), ctx.a, ctx.kappa)


# ---------------------------------------------------------------------------
# frame probe


@dataclass(frozen=True)
class FrameReport:
    matrix: np.ndarray          # g(W_j, W_k-bar) for W_j = a_{m_j} z_j d/dz_j, j >= 2
    determinant: float
    derivative_norm: float      # max |W_j g(W_k, W_l-bar)| by central differences


def frame_properness_probe(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA,
                           step: float = 1e-3) -> FrameReport:
    chart = p.chart
    fam = chart.family
    l = chart.l

    def frame_matrix(q: HypersurfacePoint) -> np.ndarray:
        d = dominance(fam, t, q.point, kappa).a
        aj = np.array([d[fam.index[m]] for m in chart.order[2:]])
        return np.outer(aj, aj) * kahler_form(t, q, kappa).log_matrix

    g0 = frame_matrix(p)
    aj = np.array([dominance(fam, t, p.point, kappa).a[fam.index[m]] for m in chart.order[2:]])
    worst = 0.0
    for j in range(l - 1):
        diffs = []
        for direction in (1.0, 1j):
            shifted = []
            for sgn in (1.0, -1.0):
                rest = p.logz[1:].copy()
                rest[j] += sgn * direction * step
                try:
                    q = continue_fiber(t, chart, rest, p.logz[0])
                except FiberError as exc:
                    raise StencilError(str(exc)) from exc
                if abs(q.logz[0] - p.logz[0]) > 0.5:
                    raise StencilError("fiber continuation jumped branch")
                shifted.append(frame_matrix(q))
            diffs.append((shifted[0] - shifted[1]) / (2 * step))
        # W_j = a_j d/dzeta_j = (a_j / 2)(d/dx - i d/dy)
        wj = 0.5 * aj[j] * (diffs[0] - 1j * diffs[1])
        worst = max(worst, float(np.abs(wj).max()))
    return FrameReport(g0, float(np.linalg.det(g0).real), worst)


# ---------------------------------------------------------------------------
# emission


@dataclass(frozen=True)
class Table:
    header: Sequence[str]
    rows: Sequence[Sequence]


def csv_text(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> Table:
    rows = list(csv.reader(io.StringIO(text)))
    return Table(rows[0], rows[1:])


def sweep_tables(result: SweepResult) -> dict[str, Table]:
    rows = Table(SweepRow.header(), [r.values() for r in result.rows])
    summ = []
    for d in result.summary.per_t:
        for cell, (lo, hi) in d["windows"].items():
            summ.append([d["t"], d["theta"], d["rows"], d["errors"], d["max_abs_phi"],
                         d["max_abs_curvature"], cell, lo, hi])
    summary = Table(["t", "theta", "rows", "errors", "max_abs_phi", "max_abs_curvature",
                     "terminal", "window_min", "window_max"], summ)
    cauchy = Table(["t", "phi_rel_change", "window_rel_change"],
                   [[c["t"], c["phi"], c["window"]] for c in result.summary.cauchy])
    return {"sweep": rows, "summary": summary, "cauchy": cauchy}


def _svg(width: int, height: int, body: Sequence[str]) -> str:
    return "\n".join([f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                      f'viewBox="0 0 {width} {height}">', *body, "</svg>", ""])


def subdivision_svg(family: Family, size: int = 400) -> str:
    if family.rank != 2:
        raise ValueError("pictures are drawn for rank 2")
    pts = np.array(family.points, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    scale = (size - 40) / max(float((hi - lo).max()), 1.0)

    def xy(m):
        return 20 + (m[0] - lo[0]) * scale, size - 20 - (m[1] - lo[1]) * scale

    body = []
    for s in sorted(family.subdivision.top):
        ring = " ".join("%.2f,%.2f" % xy(m) for m in _ccw(s.ordered))
        body.append(f'<polygon class="top-cell" points="{ring}" fill="#dde8f4" stroke="#234" stroke-width="1.5"/>')
    for m in family.points:
        x, y = xy(m)
        body.append(f'<circle class="lattice-point" cx="{x:.2f}" cy="{y:.2f}" r="3" fill="#234"/>')
    return _svg(size, size, body)


def _ccw(members: Sequence[Point]) -> list[Point]:
    c = np.mean(np.array(members, dtype=float), axis=0)
    return sorted(members, key=lambda m: math.atan2(m[1] - c[1], m[0] - c[0]))


def amoeba_svg(family: Family, t: FamilyParameter, points: Sequence[np.ndarray], size: int = 500) -> str:
    """Rescaled amoeba points ``log|x| / log(1/|t|)`` over the tropical curve."""
    curve = tropical_curve(family)
    big_l = -math.log(t.r)
    ys = np.array([np.asarray(p) / big_l for p in points]) if len(points) else np.zeros((0, 2))
    verts = np.array(list(curve.vertices.values()))
    allp = np.vstack([verts, ys]) if len(ys) else verts
    lo, hi = allp.min(axis=0) - 1.0, allp.max(axis=0) + 1.0
    scale = (size - 20) / float((hi - lo).max())

    def xy(v):
        return 10 + (v[0] - lo[0]) * scale, size - 10 - (v[1] - lo[1]) * scale

    body = []
    for y in ys:
        x0, y0 = xy(y)
        body.append(f'<circle class="amoeba" cx="{x0:.2f}" cy="{y0:.2f}" r="1.2" fill="#b33" fill-opacity="0.5"/>')
    for p, q in curve.segments:
        (x0, y0), (x1, y1) = xy(p), xy(q)
        body.append(f'<line class="trop-edge" x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="#222"/>')
    for p, d in curve.rays:
        (x0, y0), (x1, y1) = xy(p), xy(p + 2.0 * d)
        body.append(f'<line class="trop-ray" x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="#222"/>')
    for v in curve.vertices.values():
        x0, y0 = xy(v)
        body.append(f'<circle class="trop-vertex" cx="{x0:.2f}" cy="{y0:.2f}" r="3" fill="#222"/>')
    return _svg(size, size, body)


def emit(tables: Mapping[str, Table], out_dir: str | os.PathLike, fmt: str = "csv",
         svgs: Mapping[str, str] | None = None) -> list[Path]:
    """Write ``<name>.csv`` for every table (always) and ``<name>.svg`` pictures when ``fmt == 'svg'``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for name, table in tables.items():
        path = out / f"{name}.csv"
        path.write_text(csv_text(table))
        written.append(path)
    if fmt == "svg":
        for name, text in (svgs or {}).items():
            path = out / f"{name}.svg"
            path.write_text(text)
            written.append(path)
    elif fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    return written
