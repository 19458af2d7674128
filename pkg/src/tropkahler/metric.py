"""The approximate Kahler metric on ``X_t`` and its limit on a pair of pants.

Everything is a function of ``u = log|z|`` in a chart, so the ambient complex
Hessian in ``zeta = log z`` is a quarter of the real Hessian in ``u``. The
real Hessian is assembled in closed form from

    a_m = kappa - log eta_m,   h = kappa^2 sum_S prod_{m in S} a_m^{-2},
    Phi = log h + log sum_m |t^{w_m} s_m / s_{m_0}|^2,

and the Kahler form is ``omega = (i / 2pi) d dbar Phi`` restricted to the fiber.
Forms are stored in the logarithmic basis ``dz_i / z_i`` (i >= 2), which keeps
entries O(1) when some ``|z_i|`` is tiny.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .degeneration import (Chart, ChartError, Family, FamilyParameter, HypersurfacePoint,
                           TorusPoint, continue_fiber, holomorphic_volume_coeff, solve_fiber)
from .lattice import Cell, HeightFunction, Point
from .tropical import DEFAULT_KAPPA


class MetricError(ValueError):
    """The metric is not positive definite or cannot be evaluated at this point."""


class StencilError(ValueError):
    """A finite-difference stencil left the domain of the evaluator."""


@dataclass(frozen=True)
class HermitianForm:
    """``omega = i sum_{jk} M_jk dzeta_j ^ dzeta_k-bar`` with ``zeta = log z`` (free coordinates)."""

    log_matrix: np.ndarray
    logz: np.ndarray               # complex logs of z_2..z_l
    order: tuple[Point, ...]
    scale: float = 0.0             # the form is exp(scale) times the stored matrix

    @property
    def dimension(self) -> int:
        return self.log_matrix.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Coefficients in the basis ``dz_i``."""
        z = np.exp(self.logz)
        return math.exp(self.scale) * self.log_matrix / np.outer(z, np.conj(z))

    def hermitian_defect(self) -> float:
        m = self.log_matrix
        return float(np.linalg.norm(m - m.conj().T) / max(np.linalg.norm(m), 1e-300))

    def eigenvalues(self) -> np.ndarray:
        return math.exp(self.scale) * np.linalg.eigvalsh(self.log_matrix)


@dataclass(frozen=True)
class WeightData:
    log_h: float
    lambda_S: dict
    lambda_m: dict
    kappa: float

    @property
    def h(self) -> float:
        return math.exp(self.log_h)


@dataclass(frozen=True)
class MetricReport:
    omega: HermitianForm
    reference: HermitianForm
    ratio_min: float
    ratio_max: float
    phi: float
    phi_constant: float
    kappa: float


# ---------------------------------------------------------------------------
# closed-form ambient derivatives


@dataclass
class _Ambient:
    a: np.ndarray
    grad_a: np.ndarray        # rows: d a_m / d u
    lse: float                # log sum_m exp(ell_m)
    log_h: float
    lambdas: np.ndarray
    hess: np.ndarray          # real Hessian of Phi in u


def _ambient(coords: np.ndarray, ell: np.ndarray, tops: Sequence[np.ndarray], kappa: float) -> _Ambient:
    """``ell_m = 2 Re log(term_m)``, linear in ``u`` with gradient ``2 c(m)``."""
    lse = logsumexp(ell)
    eta = np.exp(ell - lse)
    cbar = eta @ coords
    dc = coords - cbar
    q = 4.0 * (dc.T * eta) @ dc
    a = kappa - (ell - lse)
    g = -2.0 * dc
    # b_S = -2 sum_{m in S} log a_m
    b = np.array([-2.0 * np.sum(np.log(a[s])) for s in tops])
    lb = logsumexp(b)
    lam = np.exp(b - lb)
    l = coords.shape[1]
    grads = np.empty((len(tops), l))
    hess_log_h = np.zeros((l, l))
    for k, s in enumerate(tops):
        gs = g[s] / a[s, None]
        grads[k] = -2.0 * gs.sum(axis=0)
        hb = -2.0 * (q * np.sum(1.0 / a[s]) - gs.T @ gs)
        hess_log_h += lam[k] * (hb + np.outer(grads[k], grads[k]))
    mean = lam @ grads
    hess_log_h -= np.outer(mean, mean)
    return _Ambient(a, g, float(lse), float(2 * math.log(kappa) + lb), lam, hess_log_h + q)


def _tops(family: Family) -> list[np.ndarray]:
    if not family.generic:
        raise MetricError("metric requires a generic (simplicial) subdivision")
    return [np.array([family.index[m] for m in s.ordered]) for s in sorted(family.subdivision.top)]


def _restrict(coords: np.ndarray, logs: np.ndarray, amb: _Ambient, order, logz_free) -> HermitianForm:
    """Restrict ``(1/8pi) Hess`` to the fiber ``sum_m exp(logs_m) = 0`` with z_1 solved."""
    l = coords.shape[1]
    w = np.exp(logs - logs.real.max())
    d = coords.T @ w
    if abs(d[0]) < 1e-13 * max(np.abs(d).max(), 1.0):
        raise ChartError("fiber is not a graph over the free coordinates here")
    tang = np.zeros((l, l - 1), dtype=complex)
    tang[0] = -d[1:] / d[0]
    tang[1:] = np.eye(l - 1)
    m = tang.T @ (amb.hess / (8 * math.pi)) @ tang.conj()
    m = 0.5 * (m + m.conj().T)
    return HermitianForm(m, np.asarray(logz_free, dtype=complex).copy(), order)


def _check_positive(form: HermitianForm) -> HermitianForm:
    ev = np.linalg.eigvalsh(form.log_matrix)
    if not np.all(ev > 0):
        raise MetricError(f"form is not positive definite (eigenvalues {ev})")
    return form


# ---------------------------------------------------------------------------
# public operations


def weights(family: Family, t: FamilyParameter, x: TorusPoint, kappa: float = DEFAULT_KAPPA) -> WeightData:
    tops = _tops(family)
    ell = 2.0 * family.log_terms(t, x).real
    lse = logsumexp(ell)
    a = kappa - (ell - lse)
    b = np.array([-2.0 * np.sum(np.log(a[s])) for s in tops])
    lb = logsumexp(b)
    lam = np.exp(b - lb)
    cells = sorted(family.subdivision.top)
    lam_S = {c: float(v) for c, v in zip(cells, lam)}
    lam_m = {m: float(sum(v for c, v in lam_S.items() if m in c.members)) for m in family.points}
    return WeightData(float(2 * math.log(kappa) + lb), lam_S, lam_m, kappa)


def potential(family: Family, t: FamilyParameter, x: TorusPoint, kappa: float = DEFAULT_KAPPA,
              anchor: Point | None = None) -> float:
    """``log h_t + log sum_m |t^{w_m} s_m / t^{w_{m_0}} s_{m_0}|^2`` for the anchor ``m_0``."""
    anchor = family.points[0] if anchor is None else tuple(anchor)
    ell = 2.0 * family.log_terms(t, x).real
    return weights(family, t, x, kappa).log_h + float(logsumexp(ell - ell[family.index[anchor]]))


def _fiber_potential(chart: Chart, t: FamilyParameter, logz: np.ndarray, kappa: float, tops) -> float:
    ell = 2.0 * chart.log_terms(t, logz).real
    lse = logsumexp(ell)
    a = kappa - (ell - lse)
    b = [-2.0 * np.sum(np.log(a[s])) for s in tops]
    return float(2 * math.log(kappa) + logsumexp(b) + lse)


def kahler_form(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> HermitianForm:
    chart = p.chart
    if chart.l < 2:
        raise MetricError("X_t is zero-dimensional for rank 1")
    logs = chart.log_terms(t, p.logz)
    amb = _ambient(chart.coords, 2.0 * logs.real, _tops(chart.family), kappa)
    return _check_positive(_restrict(chart.coords, logs, amb, chart.order, p.logz[1:]))


def reference_form(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> HermitianForm:
    """Diagonal ``(1/pi) a_{m_i}^{-2}`` in the log basis, i.e. ``(1/pi)(a_{m_i}|z_i|)^{-2}`` in ``dz_i``."""
    chart = p.chart
    fam = chart.family
    ell = 2.0 * chart.log_terms(t, p.logz).real
    a = kappa - (ell - logsumexp(ell))
    ai = np.array([a[fam.index[m]] for m in chart.order[2:]])
    return HermitianForm(np.diag(1.0 / (math.pi * ai ** 2)).astype(complex), p.logz[1:].copy(), chart.order)


def quasi_isometry_ratio(a: HermitianForm, b: HermitianForm) -> tuple[float, float]:
    """Extreme generalized eigenvalues of ``a`` relative to ``b``."""
    if a.log_matrix.shape != b.log_matrix.shape:
        raise ValueError("dimension mismatch")
    if a.order != b.order or not np.allclose(a.logz, b.logz, atol=1e-12):
        raise ValueError("forms live in different charts or at different points")
    try:
        ev = scipy.linalg.eigh(a.log_matrix, b.log_matrix, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("second form is not positive definite") from exc
    f = math.exp(a.scale - b.scale)
    return float(ev[0] * f), float(ev[-1] * f)


def _raw_ricci(t: FamilyParameter, p: HypersurfacePoint, kappa: float) -> float:
    chart = p.chart
    form = kahler_form(t, p, kappa)
    sign, logdet = np.linalg.slogdet(form.log_matrix)
    if sign.real <= 0:
        raise MetricError("non-positive determinant")
    logs = chart.log_terms(t, p.logz)
    ell = 2.0 * logs.real
    log_h = _fiber_potential(chart, t, p.logz, kappa, _tops(chart.family)) - logsumexp(ell)
    c = holomorphic_volume_coeff(t, p)
    vol = log_h + logsumexp(ell) + 2.0 * c.log_abs
    return float(-(math.lgamma(chart.l) + logdet + form.scale * form.dimension) + vol)


@lru_cache(maxsize=None)
def volume_normalization(l: int, kappa: float) -> float:
    """Constant making the Ricci potential vanish at the symmetric point of the
    constant family ``1 + z_1 + ... + z_l``."""
    pts = [tuple([0] * l)] + [tuple(int(i == j) for i in range(l)) for j in range(l)]
    fam = Family(HeightFunction.from_mapping({m: 0 for m in pts}))
    chart = fam.chart(tuple(pts))
    t = FamilyParameter(0.5)
    roots = np.exp(2j * math.pi * np.arange(1, l + 1) / (l + 1))
    p = HypersurfacePoint(chart, np.log(roots), t, 0.0)
    return -_raw_ricci(t, p, kappa)


def ricci_potential(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> float:
    """``phi_t`` with ``e^{-phi} = omega^{l-1} / V_t``; the additive volume constant is
    ``volume_normalization(l, kappa)``."""
    return _raw_ricci(t, p, kappa) + volume_normalization(p.chart.l, float(kappa))


def metric_report(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> MetricReport:
    om = kahler_form(t, p, kappa)
    ref = reference_form(t, p, kappa)
    lo, hi = quasi_isometry_ratio(om, ref)
    return MetricReport(om, ref, lo, hi, ricci_potential(t, p, kappa),
                        volume_normalization(p.chart.l, float(kappa)), kappa)


# ---------------------------------------------------------------------------
# limit metric on a pair of pants


def limit_point_residual(logz: np.ndarray) -> float:
    z = np.exp(np.asarray(logz))
    return float(abs(1.0 + z.sum()) / max(1.0, np.abs(z).max()))


def limit_metric(cell: Cell | Sequence[Point], logz: Sequence[complex], kappa: float = DEFAULT_KAPPA,
                 tol: float = 1e-10) -> HermitianForm:
    """The limit form on ``{1 + z_1 + ... + z_l = 0}`` in the chart of an ordered
    unimodular top simplex; ``logz`` are the complex logs of ``z_1..z_l``."""
    order = tuple(cell.ordered) if isinstance(cell, Cell) else tuple(tuple(m) for m in cell)
    logz = np.asarray(logz, dtype=complex)
    l = len(order) - 1
    if len(logz) != l or l < 2:
        raise MetricError("limit metric needs l >= 2 chart coordinates")
    res = limit_point_residual(logz)
    if res > tol:
        raise MetricError(f"point is not on the limit pair of pants (residual {res:.2e})")
    coords = np.vstack([np.zeros(l), np.eye(l)])
    logs = np.concatenate([[0.0], logz])
    amb = _ambient(coords, 2.0 * logs.real, [np.arange(l + 1)], kappa)
    return _check_positive(_restrict(coords, logs, amb, order, logz[1:]))


def limit_point(z_rest: Sequence[complex]) -> np.ndarray:
    """Complex logs of ``(z_1, ..., z_l)`` with ``z_1 = -1 - z_2 - ... - z_l``."""
    z_rest = np.asarray(z_rest, dtype=complex)
    z1 = -1.0 - z_rest.sum()
    if z1 == 0:
        raise MetricError("z_1 = 0 is a puncture")
    return np.log(np.concatenate([[z1], z_rest]))


def relative_difference(a: HermitianForm, b: HermitianForm) -> float:
    """Spectral-norm distance of ``a`` from ``b`` relative to ``b``."""
    return float(np.linalg.norm(a.log_matrix - b.log_matrix, 2) / np.linalg.norm(b.log_matrix, 2))


@dataclass(frozen=True)
class ConvergenceReport:
    t_values: tuple[float, ...]
    errors: tuple[float, ...]     # sup over the grid of the relative difference, per t

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    @property
    def final(self) -> float:
        return self.errors[-1]


def chartwise_convergence(family: Family, order: Sequence[Point], grid: Sequence[complex],
                          t_values: Sequence[float], kappa: float = DEFAULT_KAPPA) -> ConvergenceReport:
    """Sup over a fixed ``z_2`` grid (l = 2) of the distance between the fiber form at
    each ``t`` and the limit form, both in the chart of ``order``."""
    chart = family.chart(order)
    limits = [limit_metric(order, limit_point([z2]), kappa) for z2 in grid]
    errs = []
    for r in t_values:
        t = FamilyParameter(r)
        e = 0.0
        for z2, g0 in zip(grid, limits):
            p = solve_fiber(t, chart, [z2], policy="tropically-nearest")[0]
            e = max(e, relative_difference(kahler_form(t, p, kappa), g0))
        errs.append(e)
    return ConvergenceReport(tuple(float(r) for r in t_values), tuple(errs))


# ---------------------------------------------------------------------------
# finite differences


@dataclass(frozen=True)
class FDCheck:
    analytic: np.ndarray
    finite_difference: np.ndarray
    rel_error: float
    condition: float          # |Phi| / (h^2 |Hess|): roundoff amplification of the stencil
    step: float


def _romberg(values: Sequence[np.ndarray]) -> np.ndarray:
    """Richardson table for an O(h^2) scheme evaluated at h, h/2, h/4, ..."""
    table = [np.asarray(v) for v in values]
    k = 1
    while len(table) > 1:
        f = 4.0 ** k
        table = [(f * table[i + 1] - table[i]) / (f - 1) for i in range(len(table) - 1)]
        k += 1
    return table[0]


def fd_fiber_hessian(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA,
                     step: float = 0.1, levels: int = 3) -> FDCheck:
    """Finite-difference ``(1/2pi) d dbar`` of the potential along the fiber, in ``log z_2..log z_l``."""
    chart = p.chart
    tops = _tops(chart.family)
    analytic = kahler_form(t, p, kappa).log_matrix
    n = chart.l - 1
    logs = chart.log_terms(t, p.logz)
    w = np.exp(logs - logs.real.max())
    d = chart.coords.T @ w
    slope = -d[1:] / d[0]
    base = p.logz
    fmax = [0.0]

    def f(delta: np.ndarray) -> float:
        rest = base[1:] + delta
        guess = base[0] + slope @ delta
        q = continue_fiber(t, chart, rest, guess)
        if abs(q.logz[0] - guess) > 0.5:
            raise StencilError("fiber continuation jumped branch")
        v = _fiber_potential(chart, t, q.logz, kappa, tops)
        fmax[0] = max(fmax[0], abs(v))
        return v

    def hess(h: float) -> np.ndarray:
        f0 = f(np.zeros(n, dtype=complex))
        dirs = [np.eye(n)[a] * h for a in range(n)] + [1j * np.eye(n)[a] * h for a in range(n)]
        r = np.zeros((2 * n, 2 * n))
        for i in range(2 * n):
            r[i, i] = (f(dirs[i]) - 2 * f0 + f(-dirs[i])) / h ** 2
            for j in range(i):
                v = (f(dirs[i] + dirs[j]) - f(dirs[i] - dirs[j]) - f(-dirs[i] + dirs[j])
                     + f(-dirs[i] - dirs[j])) / (4 * h ** 2)
                r[i, j] = r[j, i] = v
        xx, yy, xy = r[:n, :n], r[n:, n:], r[:n, n:]
        return 0.25 * ((xx + yy) + 1j * (xy - xy.T)) / (2 * math.pi)

    steps = [step / 2 ** k for k in range(levels)]
    fd = _romberg([hess(h) for h in steps])
    norm = np.linalg.norm(analytic)
    cond = fmax[0] / (steps[-1] ** 2 * norm * 2 * math.pi)
    return FDCheck(analytic, fd, float(np.linalg.norm(fd - analytic) / norm), float(cond), step)


def laplacian(fn: Callable[[complex], float], z: complex, h: float = 1e-2, levels: int = 3) -> float:
    def lap(hh):
        return (fn(z + hh) + fn(z - hh) + fn(z + 1j * hh) + fn(z - 1j * hh) - 4 * fn(z)) / hh ** 2
    return float(_romberg([lap(h / 2 ** k) for k in range(levels)]))


def gauss_curvature(density: Callable[[complex], float], z: complex, h: float = 1e-2,
                    domain: Callable[[complex], bool] | None = None) -> float:
    """Gaussian curvature of ``g = 2 lambda |dz|^2``: ``K = -Laplacian(log lambda) / (4 lambda)``."""
    if domain is not None:
        for s in (h, -h, 1j * h, -1j * h, 0):
            if not domain(z + s):
                raise StencilError(f"stencil point {z + s} leaves the chart")

    def loglam(w):
        v = density(w)
        if not (v > 0 and math.isfinite(v)):
            raise StencilError(f"density not positive at {w}")
        return math.log(v)

    return -laplacian(loglam, z, h) / (4.0 * density(z))


def fiber_density(t: FamilyParameter, p: HypersurfacePoint, kappa: float = DEFAULT_KAPPA) -> Callable[[complex], float]:
    """For ``l = 2``: ``z_2 -> lambda`` with ``omega_t = i lambda dz_2 ^ dz_2-bar`` near ``p``."""
    chart = p.chart
    if chart.l != 2:
        raise MetricError("densities are defined for l = 2 only")
    z1_log = p.logz[0]

    def density(z2: complex) -> float:
        q = continue_fiber(t, chart, np.array([np.log(z2)]), z1_log)
        if abs(q.logz[0] - z1_log) > 1.0:
            raise StencilError("fiber continuation jumped branch")
        return float(kahler_form(t, q, kappa).matrix[0, 0].real)

    return density


def limit_density(order: Sequence[Point], kappa: float = DEFAULT_KAPPA) -> Callable[[complex], float]:
    """For ``l = 2``: ``z_2 -> lambda`` of the limit form on ``{1 + z_1 + z_2 = 0}``."""
    def density(z2: complex) -> float:
        return float(limit_metric(order, limit_point([z2]), kappa).matrix[0, 0].real)
    return density
