"""The complete hyperbolic metric on the thrice-punctured sphere ``C - {0, 1}``.

The modular function ``z = lambda(tau)`` is inverted through complete elliptic
integrals, ``tau = i K(1 - z) / K(z)``, and the upper half-plane metric
``|d tau| / Im tau`` is pulled back. The resulting line element is

    rho(z) = pi / (4 |z| |1 - z| Re(K(1 - z) conj K(z))),

with ``K`` in the parameter convention ``K(m) = pi / (2 AGM(1, sqrt(1 - m)))``.
Densities follow ``g = 2 lambda |dz|^2``, so ``lambda = rho^2 / 2``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lattice import Cell, Point, cover_degree
from .metric import gauss_curvature, laplacian, limit_density
from .tropical import DEFAULT_KAPPA

PUNCTURE_TOL = 1e-8


class PunctureError(ValueError):
    """Point too close to a puncture for a reliable evaluation."""


def agm(a: complex, b: complex, tol: float = 1e-16) -> complex:
    """Arithmetic-geometric mean with the right choice of square root at each step."""
    a, b = complex(a), complex(b)
    for _ in range(64):
        an = 0.5 * (a + b)
        g = cmath.sqrt(a * b)
        if abs(an - g) > abs(an + g):
            g = -g
        a, b = an, g
        if abs(a - b) <= tol * abs(a):
            break
    return a


def ellip_k(m: complex) -> complex:
    """Complete elliptic integral of the first kind, parameter ``m = k^2``."""
    if m == 1:
        raise PunctureError("K is singular at m = 1")
    return math.pi / (2.0 * agm(1.0, cmath.sqrt(1.0 - m)))


def ellip_k_series(m: complex, terms: int = 400) -> complex:
    """Hypergeometric series ``(pi/2) sum ((1/2)_n / n!)^2 m^n`` for ``|m| < 1``."""
    total, c, p = 0.0 + 0.0j, 1.0, 1.0 + 0.0j
    for n in range(terms):
        total += c * c * p
        c *= (n + 0.5) / (n + 1)
        p *= m
        if abs(c * c * p) < 1e-18 * abs(total):
            break
    return 0.5 * math.pi * total


# (map, |derivative|) sending C - {0,1} to itself
_ANHARMONIC = (
    (lambda z: z, lambda z: 1.0),
    (lambda z: 1 - z, lambda z: 1.0),
    (lambda z: 1 / z, lambda z: 1 / abs(z) ** 2),
    (lambda z: 1 / (1 - z), lambda z: 1 / abs(1 - z) ** 2),
    (lambda z: z / (z - 1), lambda z: 1 / abs(z - 1) ** 2),
    (lambda z: (z - 1) / z, lambda z: 1 / abs(z) ** 2),
)


def _rho_lens(w: complex) -> float:
    k1, k2 = ellip_k(w), ellip_k(1 - w)
    return math.pi / (4.0 * abs(w) * abs(1 - w) * (k2 * k1.conjugate()).real)


def hyperbolic_line_element(z: complex) -> float:
    """``rho`` with ``rho |dz|`` the curvature -1 metric on ``C - {0, 1}``."""
    z = complex(z)
    if abs(z) < PUNCTURE_TOL or abs(1 - z) < PUNCTURE_TOL or abs(z) > 1 / PUNCTURE_TOL:
        raise PunctureError(f"{z} is within {PUNCTURE_TOL} of a puncture")
    best = min(_ANHARMONIC, key=lambda fd: max(abs(fd[0](z)), abs(1 - fd[0](z))))
    return _rho_lens(best[0](z)) * best[1](z)


def hyperbolic_density(z: complex) -> float:
    """``lambda`` with ``g = 2 lambda |dz|^2`` of curvature -1."""
    return 0.5 * hyperbolic_line_element(z) ** 2


def poincare_disk_density(z: complex) -> float:
    r2 = abs(z) ** 2
    if r2 >= 1:
        raise ValueError("outside the unit disk")
    return 2.0 / (1.0 - r2) ** 2


def einstein_factor(z: complex = 0.3 + 0.2j, h: float = 1e-2) -> float:
    """Scale ``c`` such that ``c * lambda`` solves ``Ric = -omega`` for ``omega = i lambda dz ^ dz-bar``
    and ``Ric = -(i / 2pi) d dbar log lambda``, calibrated on the Poincare disk."""
    lap = laplacian(lambda w: math.log(poincare_disk_density(w)), z, h)
    return lap / (8.0 * math.pi * poincare_disk_density(z))


def cusp_constant(r: float) -> float:
    """``sqrt(2 lambda) |z| log(1/|z|)`` at ``z = r``; tends to 1 at a cusp."""
    return hyperbolic_line_element(r) * r * math.log(1.0 / r)


@dataclass(frozen=True)
class ComparisonRow:
    z: complex
    limit_density: float
    einstein_density: float

    @property
    def ratio(self) -> float:
        return self.limit_density / self.einstein_density


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    einstein_factor: float
    kappa: float

    @property
    def window(self) -> tuple[float, float]:
        r = [row.ratio for row in self.rows]
        return min(r), max(r)


def pants_grid(n: int, log_radius: float = 2.0, arg_margin: float = 0.15) -> list[complex]:
    """``n x n`` grid in the chart coordinate ``z_2`` of ``{1 + z_1 + z_2 = 0}``, away from
    the punctures ``z_2 = 0, -1, infinity``."""
    rad = np.exp(np.linspace(-log_radius, log_radius, n))
    ang = np.linspace(-math.pi + arg_margin, math.pi - arg_margin, n)
    return [complex(r * np.exp(1j * a)) for r in rad for a in ang]


def compare_limit_metric(cell: Cell | Sequence[Point], grid: Iterable[complex],
                         kappa: float = DEFAULT_KAPPA) -> ComparisonReport:
    """Pointwise ratio of the limit density to the Einstein-normalized hyperbolic density."""
    order = tuple(cell.ordered) if isinstance(cell, Cell) else tuple(tuple(m) for m in cell)
    if len(order) != 3:
        raise ValueError("comparison is defined for l = 2")
    deg = cover_degree(Cell(frozenset(order)))
    if deg != 1:
        raise ValueError(f"cell has cover degree {deg}; the limit is not the thrice-punctured sphere")
    c = einstein_factor()
    dens = limit_density(order, kappa)
    rows = []
    for z2 in grid:
        # z_2 -> w = -z_2 sends the punctures {0, -1, inf} to {0, 1, inf}
        rows.append(ComparisonRow(z2, dens(z2), c * hyperbolic_density(-z2)))
    return ComparisonReport(tuple(rows), c, kappa)


def curvature(z: complex, h: float | None = None) -> float:
    if h is None:
        # the natural length scale is the distance to the nearest puncture (|z| for infinity)
        h = 1e-2 * min(abs(z), abs(1 - z))
    return gauss_curvature(hyperbolic_density, z, h)
