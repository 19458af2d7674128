"""The family ``s_t = sum_m t^{w_m} s_m`` on a complex torus.

Moduli are kept in log space throughout: torus points are stored as
``(log|z|, arg z)`` and monomials are evaluated as complex logarithms, so
``t^{w_m}`` may span hundreds of decades without overflow.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .lattice import (Cell, HeightFunction, LatticePolytope, Point, Subdivision,
                      cover_degree, is_generic, lattice_points, normalize_gauge,
                      regular_subdivision, smith_normal_form)


class FiberError(ValueError):
    """The restricted Laurent polynomial has no usable roots."""


class ChartError(ValueError):
    """A chart cannot be built or is degenerate at the requested point."""


class Scaled(NamedTuple):
    """A complex number ``mantissa * exp(log_scale)``."""

    mantissa: complex
    log_scale: float

    @property
    def value(self) -> complex:
        return self.mantissa * math.exp(self.log_scale)

    @property
    def log_abs(self) -> float:
        return math.log(abs(self.mantissa)) + self.log_scale if self.mantissa else -math.inf


@dataclass(frozen=True)
class FamilyParameter:
    """``t = r e^{i theta}``; real powers use the fixed branch ``r^w e^{i w theta}``."""

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"r must lie in (0, 1), got {self.r}")

    @property
    def log(self) -> complex:
        return complex(math.log(self.r), self.theta)

    def power(self, w) -> complex:
        """Complex logarithm of ``t^w``."""
        return float(w) * self.log


@dataclass(frozen=True)
class TorusPoint:
    log_abs: np.ndarray
    arg: np.ndarray

    @classmethod
    def from_complex(cls, z: Sequence[complex]) -> "TorusPoint":
        z = np.asarray(z, dtype=complex)
        if np.any(z == 0):
            raise ValueError("torus coordinates must be non-zero")
        return cls(np.log(np.abs(z)), np.angle(z))

    @classmethod
    def from_log(cls, logz: Sequence[complex]) -> "TorusPoint":
        logz = np.asarray(logz, dtype=complex)
        return cls(logz.real.copy(), np.mod(logz.imag + np.pi, 2 * np.pi) - np.pi)

    @property
    def log(self) -> np.ndarray:
        return self.log_abs + 1j * self.arg

    def to_complex(self) -> np.ndarray:
        return np.exp(self.log)

    def __len__(self) -> int:
        return len(self.log_abs)


class Family:
    """Degeneration datum: lattice points, heights and their subdivision."""

    def __init__(self, heights: HeightFunction, polytope: LatticePolytope | None = None,
                 subdivision: Subdivision | None = None):
        pts = sorted(heights.values)
        if polytope is None:
            polytope = lattice_points(pts)
        if set(polytope.points) != set(pts):
            raise ValueError("heights must be given on exactly the lattice points of the hull")
        self.heights = heights
        self.polytope = polytope
        self.points: tuple[Point, ...] = polytope.points
        self.rank = polytope.rank
        self.exponents = np.array(self.points, dtype=float).reshape(len(self.points), self.rank)
        self.w = np.array(heights.as_float(self.points))
        self.index = {m: i for i, m in enumerate(self.points)}
        self.subdivision = subdivision if subdivision is not None else regular_subdivision(polytope, heights)
        self._charts: dict = {}

    @classmethod
    def from_mapping(cls, values: Mapping, tolerance: float | None = None) -> "Family":
        return cls(HeightFunction.from_mapping(values, tolerance))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def generic(self) -> bool:
        return is_generic(self.subdivision)

    def log_terms(self, t: FamilyParameter, x: TorusPoint) -> np.ndarray:
        """Complex logarithms of ``t^{w_m} s_m(x)`` for every lattice point."""
        return self.w * t.log + self.exponents @ x.log

    def chart(self, order: Sequence[Point]) -> "Chart":
        key = tuple(tuple(m) for m in order)
        if key not in self._charts:
            self._charts[key] = Chart(self, key)
        return self._charts[key]


class Chart:
    """Coordinates ``z_i = t^{w_{m_i}} s_{m_i} / t^{w_{m_0}} s_{m_0}`` on a top simplex.

    ``order = (m_0, ..., m_l)``; every lattice point is written as
    ``m - m_0 = sum_i c_i(m) (m_i - m_0)`` with integer ``c(m)``, which needs
    a unimodular simplex. ``gauge`` holds the heights normalized to vanish on
    the simplex.
    """

    def __init__(self, family: Family, order: tuple[Point, ...]):
        l = family.rank
        cell = Cell(frozenset(order))
        if len(order) != l + 1 or cell not in family.subdivision.top:
            raise ChartError(f"{order} is not a top cell of the subdivision")
        if cover_degree(cell) != 1:
            raise ChartError(f"chart simplex {cell} has cover degree {cover_degree(cell)}; "
                             "only unimodular charts are supported")
        self.family = family
        self.order = order
        self.cell = cell
        m0 = np.array(order[0], dtype=float)
        basis = np.array([np.array(m) - m0 for m in order[1:]], dtype=float).T
        self.basis = basis
        coords = np.linalg.solve(basis, (family.exponents - m0).T).T
        self.coords = np.rint(coords)
        wn, f = normalize_gauge(family.heights, cell)
        self.gauge_functional = f
        self.gauge_exact = wn
        self.gauge = np.array([float(wn[m]) for m in family.points])
        self.in_cell = np.array([m in cell.members for m in family.points])

    @property
    def l(self) -> int:
        return self.family.rank

    def reordered(self, order: Sequence[Point]) -> "Chart":
        return self.family.chart(order)

    def log_terms(self, t: FamilyParameter, logz: np.ndarray) -> np.ndarray:
        """Complex logs of the terms of ``s_t / (t^{w_{m_0}} s_{m_0})`` at chart point ``log z``."""
        return self.gauge * t.log + self.coords @ logz

    def from_torus(self, t: FamilyParameter, x: TorusPoint) -> np.ndarray:
        lt = self.family.log_terms(t, x)
        i0 = self.family.index[self.order[0]]
        logz = np.array([lt[self.family.index[m]] - lt[i0] for m in self.order[1:]])
        return logz.real + 1j * (np.mod(logz.imag + np.pi, 2 * np.pi) - np.pi)

    def to_torus(self, t: FamilyParameter, logz: np.ndarray) -> TorusPoint:
        # z_i = t^{<u, m_i - m_0>} x^{m_i - m_0}, so B^T log x = log z - (B^T u) log t
        u = np.array([float(c) for c in self.gauge_functional.linear])
        rhs = np.asarray(logz) - (self.basis.T @ u) * t.log
        return TorusPoint.from_log(np.linalg.solve(self.basis.T, rhs))


@dataclass(frozen=True)
class HypersurfacePoint:
    chart: Chart
    logz: np.ndarray          # complex logs of (z_1, ..., z_l)
    t: FamilyParameter
    residual: float

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.logz)

    @property
    def point(self) -> TorusPoint:
        return self.chart.to_torus(self.t, self.logz)

    def in_chart(self, order: Sequence[Point]) -> "HypersurfacePoint":
        """The same point expressed in another chart on the same family."""
        chart = self.chart.family.chart(order)
        lt = self.chart.log_terms(self.t, self.logz)
        idx = chart.family.index
        logz = np.array([lt[idx[m]] - lt[idx[chart.order[0]]] for m in chart.order[1:]])
        logz = logz.real + 1j * (np.mod(logz.imag + np.pi, 2 * np.pi) - np.pi)
        return HypersurfacePoint(chart, logz, self.t, self.residual)


# ---------------------------------------------------------------------------
# scaled evaluation


def _scaled_sum(logs: np.ndarray) -> Scaled:
    if len(logs) == 0:
        return Scaled(0j, 0.0)
    top = float(np.max(logs.real))
    return Scaled(complex(np.sum(np.exp(logs - top))), top)


def defining_sum(family: Family, t: FamilyParameter, x: TorusPoint) -> Scaled:
    """``s_t(x)`` with the largest term's modulus factored out."""
    return _scaled_sum(family.log_terms(t, x))


def relative_residual(logs: np.ndarray) -> float:
    s = _scaled_sum(logs)
    return abs(s.mantissa)


def embedding(family: Family, t: FamilyParameter, x: TorusPoint) -> np.ndarray:
    """Homogeneous coordinates ``[t^{w_m} s_m(x)]`` scaled so the largest modulus is 1."""
    lt = family.log_terms(t, x)
    return np.exp(lt - np.max(lt.real))


def limit_embedding(family: Family, cell: Cell, x: TorusPoint) -> np.ndarray:
    """Limit coordinates ``s_m(x)`` on ``cell`` and zero elsewhere, max-modulus normalized.

    ``x`` lives on the torus translated by the gauge that makes the heights
    vanish on ``cell`` (see :func:`gauge_translate`).
    """
    logs = np.full(len(family), -np.inf + 0j)
    for m in cell.members:
        i = family.index[m]
        logs[i] = family.exponents[i] @ x.log
    top = np.max(logs.real)
    out = np.zeros(len(family), dtype=complex)
    mask = np.isfinite(logs.real)
    out[mask] = np.exp(logs[mask] - top)
    return out


def gauge_translate(family: Family, cell: Cell, t: FamilyParameter, x_limit: TorusPoint) -> TorusPoint:
    """Torus point ``x`` of ``X_t``'s ambient torus matching ``x_limit`` in the cell's gauge."""
    _, f = normalize_gauge(family.heights, cell)
    u = np.array([float(c) for c in f.linear])
    return TorusPoint.from_log(x_limit.log - u * t.log)


def fubini_study_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(math.acos(min(1.0, abs(np.vdot(a, b)))))


def deck_transformations(cell: Cell) -> list[np.ndarray]:
    """Characters ``v`` (mod Z^l) with ``<v, m - m_0>`` integral on the simplex.

    Multiplying a torus point by ``exp(2 pi i v)`` fixes the limit embedding of
    the cell; there are exactly ``cover_degree(cell)`` of them.
    """
    pts = cell.ordered
    diffs = [[a - b for a, b in zip(p, pts[0])] for p in pts[1:]]
    if not diffs:
        return [np.zeros(len(pts[0]))]
    u, d, v = smith_normal_form(diffs)   # u @ diffs @ v = d  (rows of diffs are edge vectors)
    k = len(diffs)
    n = len(pts[0])
    diag = [d[i][i] for i in range(min(k, n))]
    if n != k:
        raise ValueError("deck transformations are computed for full-dimensional simplices")
    # v-coordinates: <diffs_i, v y> = (u^{-1} d)_i . y, integral iff d_jj y_j in Z
    elements = [np.zeros(n)]
    vm = np.array(v, dtype=float)
    for j, dj in enumerate(diag):
        new = []
        for e in elements:
            for s in range(dj):
                y = np.zeros(n)
                y[j] = s / dj
                new.append(e + vm @ y)
        elements = new
    return [np.mod(e, 1.0) for e in elements]


# ---------------------------------------------------------------------------
# roots of Laurent polynomials


def _combine(exps: Sequence[int], logc: Sequence[complex]) -> dict[int, Scaled]:
    groups: dict[int, list[complex]] = {}
    for k, lc in zip(exps, logc):
        groups.setdefault(int(k), []).append(complex(lc))
    return {k: _scaled_sum(np.array(v)) for k, v in groups.items()}


def _upper_hull(xs: Sequence[float], ys: Sequence[float]) -> list[int]:
    idx: list[int] = []
    for i in range(len(xs)):
        while len(idx) >= 2:
            a, b = idx[-2], idx[-1]
            if (ys[b] - ys[a]) * (xs[i] - xs[a]) <= (ys[i] - ys[a]) * (xs[b] - xs[a]):
                idx.pop()
            else:
                break
        idx.append(i)
    return idx


def _eval_log(ks: np.ndarray, logc: np.ndarray, zeta: complex):
    terms = logc + ks * zeta
    top = np.max(terms.real)
    e = np.exp(terms - top)
    return np.sum(e), np.sum(ks * e), float(np.max(np.abs(e)))


def polish_root(ks: np.ndarray, logc: np.ndarray, zeta: complex, tol: float = 1e-14,
                maxiter: int = 80) -> tuple[complex, float]:
    """Newton iteration in ``log z``; returns ``(log z, relative residual)``."""
    best = (zeta, math.inf)
    for _ in range(maxiter):
        f, df, big = _eval_log(ks, logc, zeta)
        res = abs(f) / big
        if res < best[1]:
            best = (zeta, res)
        if res < tol or df == 0:
            break
        step = f / df
        if abs(step) > 2.0:
            step *= 2.0 / abs(step)
        zeta = zeta - step
    return best


def laurent_roots(exps: Sequence[int], logc: Sequence[complex], tol: float = 1e-10) -> list[tuple[complex, float]]:
    """All non-zero roots of ``sum_k c_k z^k`` given ``log c_k``.

    Roots are seeded blockwise from the Newton polygon of ``(k, log|c_k|)`` with
    a balanced companion matrix per block, then polished by Newton's method on
    the full polynomial. Returns ``(log z, relative residual)`` pairs.
    """
    comb = {k: s for k, s in _combine(exps, logc).items() if s.mantissa != 0}
    if not comb:
        raise FiberError("restriction is identically zero")
    if len(comb) == 1:
        raise FiberError("restriction is a monomial: no roots in C*")
    ks_sorted = sorted(comb)
    kmin = ks_sorted[0]
    ks = np.array([k - kmin for k in ks_sorted], dtype=float)
    lc = np.array([cmath.log(comb[k].mantissa) + comb[k].log_scale for k in ks_sorted])
    hull = _upper_hull(list(ks), list(lc.real))
    # root log-magnitudes for each hull edge
    edges = []
    for a, b in zip(hull[:-1], hull[1:]):
        rho = (lc[a].real - lc[b].real) / (ks[b] - ks[a])
        edges.append((a, b, rho))
    # merge edges whose magnitudes are close, their roots interact
    blocks = [[edges[0]]]
    for e in edges[1:]:
        if abs(e[2] - blocks[-1][-1][2]) < 4.0:
            blocks[-1].append(e)
        else:
            blocks.append([e])
    seeds: list[complex] = []
    for blk in blocks:
        a, b = blk[0][0], blk[-1][1]
        rho = float(np.mean([e[2] for e in blk]))
        sel = (ks >= ks[a]) & (ks <= ks[b])
        kk = ks[sel] - ks[a]
        scaled = lc[sel] + kk * rho
        scaled = scaled - np.max(scaled.real)
        deg = int(kk.max())
        coeffs = np.zeros(deg + 1, dtype=complex)
        for k, c in zip(kk.astype(int), np.exp(scaled)):
            coeffs[deg - k] += c
        for y in np.roots(coeffs):
            if y != 0:
                seeds.append(cmath.log(y) + rho)
    out = []
    for s in seeds:
        zeta, res = polish_root(ks, lc, s)
        out.append((complex(zeta.real, (zeta.imag + math.pi) % (2 * math.pi) - math.pi), res))
    bad = [r for _, r in out if r > tol]
    if bad:
        raise FiberError(f"root polish failed: residual {max(bad):.2e} > {tol:.0e}")
    return out


def _restriction(chart: Chart, t: FamilyParameter, log_rest: np.ndarray):
    exps = chart.coords[:, 0].astype(int)
    logc = chart.gauge * t.log + chart.coords[:, 1:] @ log_rest
    return exps, logc


def solve_fiber(t: FamilyParameter, chart: Chart, z_rest: Sequence[complex], policy: str = "all",
                tol: float = 1e-10, log_input: bool = False) -> list[HypersurfacePoint]:
    """Points of ``X_t`` in a chart with ``z_2 .. z_l`` fixed.

    ``policy`` is ``"all"`` or ``"tropically-nearest"`` (the root closest to
    ``z_1 = -(1 + z_2 + ... + z_l)``).
    """
    z_rest = np.asarray(z_rest, dtype=complex)
    log_rest = z_rest if log_input else np.log(z_rest)
    if len(log_rest) != chart.l - 1:
        raise ValueError(f"expected {chart.l - 1} fixed coordinates")
    exps, logc = _restriction(chart, t, log_rest)
    roots = laurent_roots(exps, logc, tol)
    pts = [HypersurfacePoint(chart, np.concatenate([[zeta], log_rest]), t, res) for zeta, res in roots]
    if policy == "all":
        return sorted(pts, key=lambda p: (-p.logz[0].real, p.logz[0].imag))
    if policy == "tropically-nearest":
        pred = -(1.0 + np.sum(np.exp(log_rest)))
        return [min(pts, key=lambda p: abs(np.exp(p.logz[0]) - pred))]
    raise ValueError(f"unknown policy {policy!r}")


def continue_fiber(t: FamilyParameter, chart: Chart, log_rest: np.ndarray, zeta_guess: complex,
                   tol: float = 1e-12) -> HypersurfacePoint:
    """Newton-continue the root ``log z_1`` from a nearby guess."""
    exps, logc = _restriction(chart, t, np.asarray(log_rest, dtype=complex))
    comb = _combine(exps, logc)
    ks_sorted = sorted(comb)
    ks = np.array(ks_sorted, dtype=float)
    lc = np.array([cmath.log(comb[k].mantissa) + comb[k].log_scale if comb[k].mantissa else -np.inf
                   for k in ks_sorted])
    keep = np.isfinite(lc.real)
    zeta, res = polish_root(ks[keep], lc[keep], zeta_guess, tol=1e-15)
    if res > tol:
        raise FiberError(f"continuation failed: residual {res:.2e}")
    return HypersurfacePoint(chart, np.concatenate([[zeta], log_rest]), t, res)


def holomorphic_volume_coeff(t: FamilyParameter, p: HypersurfacePoint) -> Scaled:
    """``c`` with ``Omega_{t,m_0} = c prod_{i>=2} dz_i/z_i`` on ``X_t``."""
    chart = p.chart
    lt = chart.log_terms(t, p.logz)
    c1 = chart.coords[:, 0]
    mask = c1 != 0
    logs = lt[mask] + np.log(np.abs(c1[mask])) + 1j * np.where(c1[mask] < 0, np.pi, 0.0)
    d = _scaled_sum(logs)
    if abs(d.mantissa) < 1e-13:
        raise ChartError("logarithmic derivative in z_1 vanishes: chart degenerate at this point")
    return Scaled(1.0 / d.mantissa, -d.log_scale)
