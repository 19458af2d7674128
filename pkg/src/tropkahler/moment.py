"""Toric model near an edge of the subdivision: the quotient lattice, the
polytope ``{x : <m_hat, x> + tau w_m >= 0}`` and the potential
``rho_tau = log sum_S prod_{m in S} a_m^{-2}`` written in moment coordinates,
where ``a_m = 2 (<m_hat, x> + tau w_m)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .lattice import Cell, Point, Subdivision, best_gauge, smith_normal_form


class MomentError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeDatum:
    edge: Cell
    projection: tuple[tuple[int, ...], ...]   # rows: integer map M -> M_hat
    rays: tuple[Point, ...]                    # lattice points around the edge (not on it)
    hat_rays: tuple[tuple[int, ...], ...]      # their images in M_hat
    heights: tuple[Fraction, ...]              # gauge-normalized heights of ``rays``
    hat_cells: tuple[tuple[int, ...], ...]     # indices into ``rays``, one tuple per incident top cell
    min_height: Fraction | float               # w-tilde > 0 (inf when nothing is off the edge)

    @property
    def hat_rank(self) -> int:
        return len(self.projection)

    @property
    def degenerate(self) -> bool:
        return self.hat_rank == 0


def edge_datum(edge: Cell, z: Subdivision) -> EdgeDatum:
    members = edge.ordered
    if len(members) != 2 or not z.contains(edge.members):
        raise MomentError(f"{edge} is not an edge of the subdivision")
    tops = z.cells_containing(edge.members, top_only=True)
    if not tops:
        raise MomentError(f"{edge} lies in no top cell")
    gap, f = best_gauge(z.polytope.points, z.heights, edge.members)
    if not gap > 0:
        raise MomentError(f"gauge failure: minimum normalized height {gap} is not positive")
    m0, m1 = members
    v = [b - a for a, b in zip(m0, m1)]
    u, d, _ = smith_normal_form([[x] for x in v])
    if d[0][0] != 1:
        raise MomentError("edge direction is not primitive")
    proj = tuple(tuple(row) for row in u[1:])
    rays = sorted({m for s in tops for m in s.members} - edge.members)

    def pi(m):
        diff = [a - b for a, b in zip(m, m0)]
        return tuple(sum(r * x for r, x in zip(row, diff)) for row in proj)

    heights = tuple(z.heights[m] - f(m) for m in rays)
    cells = tuple(sorted(tuple(sorted(rays.index(m) for m in s.members - edge.members)) for s in tops))
    return EdgeDatum(edge, proj, tuple(rays), tuple(pi(m) for m in rays), heights, cells,
                     Fraction(gap) if math.isfinite(gap) else gap)


@dataclass(frozen=True)
class MomentPolytope:
    normals: np.ndarray       # rows m_hat
    offsets: np.ndarray       # tau * w_m
    tau: float
    bounded: bool
    vertices: np.ndarray | None

    def slacks(self, x: Sequence[float]) -> np.ndarray:
        return self.normals @ np.asarray(x, dtype=float) + self.offsets

    def contains(self, x: Sequence[float], strict: bool = False) -> bool:
        s = self.slacks(x)
        return bool(np.all(s > 0) if strict else np.all(s >= 0))


def _is_bounded(normals: np.ndarray) -> bool:
    n = normals.shape[1]
    for i in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[i] = -sign
            res = linprog(c, A_ub=-normals, b_ub=np.zeros(len(normals)), bounds=[(-1, 1)] * n)
            if res.status == 0 and -res.fun > 1e-12:
                return False
    return True


def _vertices(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    n = normals.shape[1]
    out = []
    for idx in itertools.combinations(range(len(normals)), n):
        a = normals[list(idx)]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, -offsets[list(idx)])
        if np.all(normals @ x + offsets >= -1e-9) and not any(np.allclose(x, y) for y in out):
            out.append(x)
    return np.array(sorted(out, key=tuple))


def moment_polytope(d: EdgeDatum, tau: float) -> MomentPolytope:
    if tau <= 0:
        raise ValueError("tau must be positive")
    if d.degenerate:
        raise MomentError("quotient lattice is zero: rank-1 family has no edge polytope")
    normals = np.array(d.hat_rays, dtype=float)
    offsets = tau * np.array([float(h) for h in d.heights])
    bounded = _is_bounded(normals)
    verts = _vertices(normals, offsets) if bounded and d.hat_rank <= 3 else None
    return MomentPolytope(normals, offsets, float(tau), bounded, verts)


def slack_values(d: EdgeDatum, tau, x: Sequence) -> list:
    """``a_m / 2 = <m_hat, x> + tau w_m`` in exact arithmetic for rational input."""
    return [sum(Fraction(a) * Fraction(b) for a, b in zip(mh, x)) + Fraction(tau) * h
            for mh, h in zip(d.hat_rays, d.heights)]


def toric_potential(d: EdgeDatum, tau: float, x: Sequence[float]) -> float:
    normals = np.array(d.hat_rays, dtype=float)
    slack = normals @ np.asarray(x, dtype=float) + tau * np.array([float(h) for h in d.heights])
    if np.any(slack <= 0):
        raise MomentError("point is not interior to the polytope")
    log_a = np.log(2.0 * slack)
    return float(logsumexp([-2.0 * log_a[list(c)].sum() for c in d.hat_cells]))


@dataclass(frozen=True)
class ScalingShift:
    tau: float
    shift: float      # mean of rho_tau(x) - rho_1(x / tau)
    spread: float     # max deviation from the mean


def scaling_shift(d: EdgeDatum, tau: float, samples: Sequence[Sequence[float]]) -> ScalingShift:
    """``samples`` are points of the polytope at scale ``tau``."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    diffs = np.array([toric_potential(d, tau, x) - toric_potential(d, 1.0, np.asarray(x) / tau)
                      for x in samples])
    c = float(diffs.mean())
    return ScalingShift(float(tau), c, float(np.max(np.abs(diffs - c))))


@dataclass(frozen=True)
class ScalingExperiment:
    shifts: tuple[ScalingShift, ...]
    exponent: float                   # slope of C(tau) against -2 log tau
    candidates: dict                  # label -> value
    match: str

    @property
    def spread(self) -> float:
        return max(s.spread for s in self.shifts)


def interior_samples(d: EdgeDatum, n: int, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
    """Uniform samples of the unit-scale polytope, keeping slacks above ``margin`` times the max slack."""
    poly = moment_polytope(d, 1.0)
    if not poly.bounded:
        raise MomentError("polytope is unbounded")
    lo, hi = poly.vertices.min(axis=0), poly.vertices.max(axis=0)
    out = []
    cap = margin * float(max(poly.slacks(v).max() for v in poly.vertices))
    while len(out) < n:
        x = rng.uniform(lo, hi)
        if np.all(poly.slacks(x) > cap):
            out.append(x)
    return np.array(out)


def scaling_experiment(d: EdgeDatum, taus: Sequence[float], unit_samples: np.ndarray) -> ScalingExperiment:
    shifts = tuple(scaling_shift(d, tau, tau * unit_samples) for tau in taus)
    xs = -2.0 * np.log(np.array([s.tau for s in shifts]))
    ys = np.array([s.shift for s in shifts])
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 1 else float(ys[0] / xs[0])
    l = d.hat_rank + 1
    cands = {"l-1": float(l - 1), "l+1": float(l + 1)}
    match = min(cands, key=lambda k: abs(cands[k] - slope))
    return ScalingExperiment(shifts, slope, cands, match)
