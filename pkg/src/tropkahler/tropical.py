"""Dominance data at a torus point: normalized weights, dominant sets and the
greedy filtration that selects the top simplex governing the point."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .degeneration import Family, FamilyParameter, HypersurfacePoint, TorusPoint
from .lattice import Cell, Point, normalize_gauge, rank

TIE_TOL = 1e-12
# Smallest round value for which the metric stays positive on every pair of pants
# in rank 2 (positivity fails below about 3.7). Rank 3 needs about 5.5, so pass a
# larger kappa there.
DEFAULT_KAPPA = 5.0


@dataclass(frozen=True)
class DominanceData:
    """``eta_m = |t^{w_m} s_m|^2 / sum |t^{w_m'} s_m'|^2`` and ``a_m = kappa - log eta_m``."""

    points: tuple[Point, ...]
    log_eta: np.ndarray
    kappa: float

    @property
    def eta(self) -> np.ndarray:
        return np.exp(self.log_eta)

    @property
    def a(self) -> np.ndarray:
        return self.kappa - self.log_eta

    def __getitem__(self, m: Point) -> float:
        return float(self.eta[self.points.index(m)])


def dominance(family: Family, t: FamilyParameter, x: TorusPoint, kappa: float = DEFAULT_KAPPA) -> DominanceData:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    two_l = 2.0 * family.log_terms(t, x).real
    return DominanceData(family.points, two_l - logsumexp(two_l), kappa)


def dominant_set(family: Family, t: FamilyParameter, x: TorusPoint, a: float) -> Cell:
    """Lattice points with ``eta_m > |t|^a``; may be empty when ``|t|^a >= max eta``."""
    if a <= 0:
        raise ValueError("a must be positive")
    d = dominance(family, t, x)
    cut = float(a) * np.log(t.r)
    return Cell(frozenset(m for m, le in zip(family.points, d.log_eta) if le > cut))


@dataclass(frozen=True)
class Filtration:
    chain: tuple[Cell, ...]
    log_levels: tuple[float, ...]      # log t_1 >= log t_2 >= ...
    terminal: Cell
    tie: bool = False                  # a step had two maximizers within TIE_TOL
    exponents_c: tuple[float, ...] = ()  # eta_m >= t_k^{c_k} on S_k (measured)
    exponents_b: tuple[float, ...] = ()  # t_k^{b_k} >= eta_m on the new layer (measured)

    @property
    def levels(self) -> np.ndarray:
        return np.exp(np.array(self.log_levels))


def filtration(family: Family, t: FamilyParameter, x: TorusPoint, a: float) -> Filtration:
    """Grow the dominant set greedily by the largest ``eta`` among incident cells."""
    z = family.subdivision
    s1 = dominant_set(family, t, x, a)
    if not z.contains(s1.members):
        raise ValueError(f"dominant set {s1} is not a cell of the subdivision")
    log_eta = dominance(family, t, x).log_eta
    idx = family.index
    chain = [s1]
    levels = [float(a) * np.log(t.r)]
    tie = False
    current = s1.members
    while True:
        cand = set()
        for c in z.cells_containing(current, top_only=True):
            cand |= c.members - current
        if not cand:
            break
        ranked = sorted(cand, key=lambda m: (-log_eta[idx[m]], m))
        best = ranked[0]
        if len(ranked) > 1 and abs(log_eta[idx[ranked[1]]] - log_eta[idx[best]]) <= TIE_TOL * max(1.0, abs(log_eta[idx[best]])):
            tie = True
        current = current | {best}
        chain.append(Cell(current))
        levels.append(float(log_eta[idx[best]]))
    terminal = chain[-1]
    if terminal not in z.top:
        raise AssertionError(f"filtration ended at non-top cell {terminal}")
    cs, bs = _measured_exponents(family, chain, levels, log_eta)
    return Filtration(tuple(chain), tuple(levels), terminal, tie, cs, bs)


def _measured_exponents(family, chain, levels, log_eta):
    idx = family.index
    cs, bs = [], []
    prev_span: list = []
    for cell, lt in zip(chain, levels):
        mem = cell.ordered
        if lt >= 0 or not mem:
            cs.append(float("nan"))
            bs.append(float("nan"))
            continue
        cs.append(max(log_eta[idx[m]] / lt for m in mem))
        base = mem[0]
        span = [tuple(a - b for a, b in zip(m, base)) for m in mem[1:]]
        layer = []
        for m in family.points:
            if m in cell.members:
                continue
            v = tuple(a - b for a, b in zip(m, base))
            in_now = rank(span + [v]) == rank(span)
            in_prev = bool(prev_span) and rank(prev_span + [v]) == rank(prev_span)
            if in_now and not in_prev:
                layer.append(m)
        bs.append(min((log_eta[idx[m]] / lt for m in layer), default=float("nan")))
        prev_span = span
    return tuple(cs), tuple(bs)


def tropicalization(family: Family, t: FamilyParameter, x: TorusPoint) -> np.ndarray:
    """``log(eta_m) / (2 log|t|)``: equal to the heights up to an affine function."""
    return dominance(family, t, x).log_eta / (2.0 * np.log(t.r))


def affine_fit_residual(family: Family, values: Sequence[float]) -> float:
    """Max deviation of ``values - w`` from its least-squares affine fit."""
    diff = np.asarray(values, dtype=float) - family.w
    design = np.hstack([family.exponents, np.ones((len(family), 1))])
    coef, *_ = np.linalg.lstsq(design, diff, rcond=None)
    return float(np.max(np.abs(design @ coef - diff)))


def log_map(x: TorusPoint) -> np.ndarray:
    return np.array(x.log_abs, dtype=float)


def tropical_gap(family: Family, t: FamilyParameter, x: TorusPoint) -> float:
    """Distance-like gap between the two largest tropical terms, in units of ``log(1/|t|)``.

    Zero exactly on the tropical hypersurface; the amoeba of ``X_t`` lies in the
    region where the gap is at most ``log(|Delta| - 1) / log(1/|t|)``.
    """
    vals = np.sort(family.log_terms(t, x).real)[::-1]
    return float((vals[0] - vals[1]) / -np.log(t.r))


@dataclass(frozen=True)
class BoundedTermsRow:
    family: str
    m: Point | None
    j: int
    value: float


def bounded_terms_report(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> list[BoundedTermsRow]:
    """Evaluate the representative bounded terms at a point in its own chart.

    Families: ``inv_a`` = 1/a_{m_j}; ``z`` and ``z_a`` = |z_j| and |z_j a_{m_j}|;
    ``mono`` and ``mono_a`` = |t^{w_m} z^m| and that times a_{m_j} (j in I_m);
    ``ratio`` = a_{m_j} / a_m for m outside the chart simplex.
    """
    chart = p.chart
    fam = chart.family
    d = dominance(fam, t, p.point, kappa)
    a = d.a
    idx = fam.index
    rows: list[BoundedTermsRow] = []
    if len(fam) == 1:
        return rows
    aj = [a[idx[m]] for m in chart.order]
    for j in range(1, chart.l + 1):
        zj = abs(np.exp(p.logz[j - 1]))
        rows.append(BoundedTermsRow("inv_a", chart.order[j], j, 1.0 / aj[j]))
        rows.append(BoundedTermsRow("z", chart.order[j], j, zj))
        rows.append(BoundedTermsRow("z_a", chart.order[j], j, zj * aj[j]))
    logs = chart.log_terms(t, p.logz)
    for i, m in enumerate(fam.points):
        if chart.in_cell[i]:
            continue
        mono = float(np.exp(logs[i].real))
        rows.append(BoundedTermsRow("mono", m, 0, mono))
        for j in range(1, chart.l + 1):
            if chart.coords[i, j - 1] != 0:
                rows.append(BoundedTermsRow("mono_a", m, j, mono * aj[j]))
                rows.append(BoundedTermsRow("ratio", m, j, aj[j] / a[i]))
    return rows


def bounded_terms_max(rows: Sequence[BoundedTermsRow]) -> dict[str, float]:
    out: dict[str, float] = {}
    for r in rows:
        out[r.family] = max(out.get(r.family, 0.0), abs(r.value))
    return out


def chart_order(family: Family, t: FamilyParameter, x: TorusPoint, cell: Cell) -> tuple[Point, ...]:
    """Members of ``cell`` by decreasing ``eta`` (so ``1 >= |z_1| >= ... >= |z_l|``)."""
    log_eta = dominance(family, t, x).log_eta
    idx = family.index
    return tuple(sorted(cell.members, key=lambda m: (-log_eta[idx[m]], m)))


def in_own_chart(p: HypersurfacePoint, a: float) -> tuple[HypersurfacePoint, Filtration]:
    """Re-express ``p`` in the chart of its terminal simplex, ordered by dominance."""
    fam = p.chart.family
    x = p.point
    filt = filtration(fam, p.t, x, a)
    return p.in_chart(chart_order(fam, p.t, x, filt.terminal)), filt


@dataclass(frozen=True)
class TropicalCurve:
    """Limit of the rescaled amoeba ``log|x| / log(1/|t|)`` for rank 2.

    One vertex per top simplex, a segment per interior edge and a ray per
    boundary edge of the subdivision.
    """

    vertices: dict
    segments: tuple[tuple[np.ndarray, np.ndarray], ...]
    rays: tuple[tuple[np.ndarray, np.ndarray], ...]   # (start, unit direction)

    def distance(self, y: Sequence[float]) -> float:
        y = np.asarray(y, dtype=float)
        best = math.inf
        for p, q in self.segments:
            d = q - p
            s = float(np.clip((y - p) @ d / (d @ d), 0.0, 1.0))
            best = min(best, float(np.linalg.norm(y - p - s * d)))
        for p, d in self.rays:
            s = max(0.0, float((y - p) @ d))
            best = min(best, float(np.linalg.norm(y - p - s * d)))
        return best

    @property
    def min_edge(self) -> float:
        return min((float(np.linalg.norm(q - p)) for p, q in self.segments), default=math.inf)


def tropical_curve(family: Family) -> TropicalCurve:
    if family.rank != 2:
        raise ValueError("tropical curve drawing is for rank 2")
    z = family.subdivision
    verts = {}
    for s in sorted(z.top):
        _, f = normalize_gauge(family.heights, s)
        verts[s] = np.array([float(u) for u in f.linear])
    segs, rays = [], []
    for e in sorted(c for c in z.cells if len(c.members) == 2):
        tops = [s for s in sorted(z.top) if e.members <= s.members]
        if len(tops) == 2:
            segs.append((verts[tops[0]], verts[tops[1]]))
        elif len(tops) == 1:
            a, b = (np.array(m, dtype=float) for m in e.ordered)
            (other,) = tops[0].members - e.members
            n = np.array([-(b - a)[1], (b - a)[0]])
            if n @ (np.array(other, dtype=float) - a) > 0:
                n = -n
            rays.append((verts[tops[0]], n / np.linalg.norm(n)))
    return TropicalCurve(verts, tuple(segs), tuple(rays))
