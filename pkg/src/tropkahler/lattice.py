"""Exact lattice-polytope combinatorics.

Lattice points are plain integer tuples. Heights are :class:`fractions.Fraction`
and every face decision is an exact sign test; float heights are accepted only
together with an explicit tie tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterable, Mapping, Sequence

Point = tuple[int, ...]


# ---------------------------------------------------------------------------
# exact linear algebra helpers


def _solve(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction] | None:
    """Solve a square system exactly; ``None`` when singular."""
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / p
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def rank(vectors: Iterable[Sequence]) -> int:
    """Rank of a list of rational vectors."""
    rows = [[Fraction(x) for x in v] for v in vectors]
    r = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col] / rows[r][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        r += 1
    return r


def affine_rank(points: Sequence[Point]) -> int:
    """Dimension of the affine hull (``-1`` for the empty set)."""
    if not points:
        return -1
    p0 = points[0]
    return rank([tuple(a - b for a, b in zip(p, p0)) for p in points[1:]]) if len(points) > 1 else 0


def _det_int(mat: Sequence[Sequence[int]]) -> int:
    n = len(mat)
    if n == 0:
        return 1
    a = [[Fraction(x) for x in row] for row in mat]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return int(det)


def smith_normal_form(mat: Sequence[Sequence[int]]):
    """Return ``(U, D, V)`` with ``U @ mat @ V == D`` diagonal, ``U``/``V`` unimodular.

    Diagonal entries are non-negative and each divides the next.
    """
    m = len(mat)
    n = len(mat[0]) if m else 0
    d = [list(map(int, row)) for row in mat]
    u = [[int(i == j) for j in range(m)] for i in range(m)]
    v = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(a, i, j):
        a[i], a[j] = a[j], a[i]

    def swap_cols(a, i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]

    def add_row(a, src, dst, k):  # row_dst += k * row_src
        a[dst] = [x + k * y for x, y in zip(a[dst], a[src])]

    def add_col(a, src, dst, k):
        for row in a:
            row[dst] += k * row[src]

    t = 0
    while t < min(m, n):
        nz = [(abs(d[i][j]), i, j) for i in range(t, m) for j in range(t, n) if d[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        swap_rows(d, t, i), swap_rows(u, t, i)
        swap_cols(d, t, j), swap_cols(v, t, j)
        done = False
        while not done:
            done = True
            for i in range(t + 1, m):
                q = d[i][t] // d[t][t]
                if q:
                    add_row(d, t, i, -q), add_row(u, t, i, -q)
                if d[i][t]:
                    swap_rows(d, t, i), swap_rows(u, t, i)
                    done = False
            for j in range(t + 1, n):
                q = d[t][j] // d[t][t]
                if q:
                    add_col(d, t, j, -q), add_col(v, t, j, -q)
                if d[t][j]:
                    swap_cols(d, t, j), swap_cols(v, t, j)
                    done = False
            if done:
                # divisibility of the trailing block
                bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                            if d[i][j] % d[t][t]), None)
                if bad is not None:
                    add_row(d, bad[0], t, 1), add_row(u, bad[0], t, 1)
                    done = False
        if d[t][t] < 0:
            d[t] = [-x for x in d[t]]
            u[t] = [-x for x in u[t]]
        t += 1
    return u, d, v


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class LatticePolytope:
    vertices: tuple[Point, ...]
    points: tuple[Point, ...]
    rank: int

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class HeightFunction:
    """Heights ``w_m`` on the lattice points of a polytope.

    ``tolerance`` is ``None`` for exact rational heights; float heights need an
    explicit tie tolerance and mark every derived object as approximate.
    """

    values: Mapping[Point, Fraction]
    tolerance: float | None = None

    @classmethod
    def from_mapping(cls, values: Mapping[Point, object], tolerance: float | None = None):
        conv = {}
        for m, w in values.items():
            if isinstance(w, float) and tolerance is None:
                raise ValueError("float heights need an explicit tie tolerance")
            conv[tuple(int(c) for c in m)] = Fraction(w)
        return cls(conv, tolerance)

    def __getitem__(self, m: Point) -> Fraction:
        return self.values[m]

    @property
    def exact(self) -> bool:
        return self.tolerance is None

    def as_float(self, points: Sequence[Point]) -> list[float]:
        return [float(self.values[m]) for m in points]


@dataclass(frozen=True)
class AffineFunctional:
    linear: tuple[Fraction, ...]
    constant: Fraction

    def __call__(self, m: Sequence[int]) -> Fraction:
        return self.constant + sum((a * b for a, b in zip(self.linear, m)), Fraction(0))


@dataclass(frozen=True)
class Cell:
    members: frozenset[Point]

    def __lt__(self, other: "Cell") -> bool:
        return (len(self.members), self.ordered) < (len(other.members), other.ordered)

    @classmethod
    def of(cls, members: Iterable[Sequence[int]]) -> "Cell":
        return cls(frozenset(tuple(int(c) for c in m) for m in members))

    @property
    def ordered(self) -> tuple[Point, ...]:
        return tuple(sorted(self.members))

    @property
    def dimension(self) -> int:
        return affine_rank(self.ordered)

    @property
    def is_simplex(self) -> bool:
        return len(self.members) == self.dimension + 1

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, m) -> bool:
        return m in self.members

    def __repr__(self) -> str:
        return f"Cell({list(self.ordered)})"


@dataclass(frozen=True)
class Subdivision:
    polytope: LatticePolytope
    heights: HeightFunction
    top: tuple[Cell, ...]
    cells: frozenset[Cell]
    approximate: bool = False

    def contains(self, members: Iterable[Point]) -> bool:
        """Face-membership test; the empty set counts as the empty face."""
        s = frozenset(members)
        return not s or Cell(s) in self.cells

    @property
    def rank(self) -> int:
        return self.polytope.rank

    def cells_containing(self, members: Iterable[Point], top_only: bool = False) -> list[Cell]:
        s = frozenset(members)
        pool = self.top if top_only else self.cells
        return sorted(c for c in pool if s <= c.members)

    @property
    def used_points(self) -> frozenset[Point]:
        return frozenset().union(*(c.members for c in self.top))


@dataclass(frozen=True)
class Cone:
    rays: tuple[Point, ...]
    cell: Cell | None = None

    @property
    def dimension(self) -> int:
        return rank(self.rays) if self.rays else 0

    def contains(self, v: Sequence[float], tol: float = 1e-10) -> bool:
        """Numerical membership of a real vector (non-negative least squares)."""
        import numpy as np
        from scipy.optimize import nnls

        if not self.rays:
            return bool(np.allclose(v, 0.0, atol=tol))
        a = np.array(self.rays, dtype=float).T
        coef, res = nnls(a, np.asarray(v, dtype=float))
        return res <= tol * max(1.0, float(np.linalg.norm(v)))


@dataclass(frozen=True)
class Fan:
    apex: Point
    cones: tuple[Cone, ...]

    @property
    def maximal(self) -> tuple[Cone, ...]:
        top = max(c.dimension for c in self.cones)
        return tuple(c for c in self.cones if c.dimension == top)

    def covers(self, v: Sequence[float]) -> bool:
        return any(c.contains(v) for c in self.maximal)


# ---------------------------------------------------------------------------
# polytopes


def _as_points(vertices: Iterable[Sequence[int]]) -> list[Point]:
    pts = [tuple(int(c) for c in v) for v in vertices]
    if not pts:
        raise ValueError("empty vertex list")
    if len({len(p) for p in pts}) != 1:
        raise ValueError("vertices of mixed dimension")
    return pts


def _affine_coordinates(points: Sequence[Point]):
    """Express points in rational affine coordinates of their affine hull.

    Returns ``(coords, dim)`` where ``coords[i]`` has length ``dim``.
    """
    base = points[0]
    diffs = [tuple(a - b for a, b in zip(p, base)) for p in points]
    basis: list[Point] = []
    for d in diffs:
        if rank(basis + [d]) > len(basis):
            basis.append(d)
    dim = len(basis)
    if dim == 0:
        return [() for _ in points], 0
    # pick dim coordinate axes on which the basis is invertible
    n = len(base)
    axes = next(ax for ax in itertools.combinations(range(n), dim)
                if _det_int([[b[a] for a in ax] for b in basis]) != 0)
    coords = [tuple(Fraction(d[a]) for a in axes) for d in diffs]
    return coords, dim


def _halfspaces(coords: Sequence[tuple[Fraction, ...]], dim: int):
    """Facet inequalities ``a.x + c >= 0`` of the hull of full-dimensional points."""
    out = set()
    for sub in itertools.combinations(range(len(coords)), dim):
        pts = [coords[i] for i in sub]
        if dim > 1 and rank([tuple(a - b for a, b in zip(p, pts[0])) for p in pts[1:]]) < dim - 1:
            continue
        # normal vector: nullspace of the difference matrix, via cofactors
        diffs = [tuple(a - b for a, b in zip(p, pts[0])) for p in pts[1:]]
        normal = []
        for k in range(dim):
            minor = [[d[j] for j in range(dim) if j != k] for d in diffs]
            normal.append((-1) ** k * _det_frac(minor))
        if all(x == 0 for x in normal):
            continue
        c = -sum(a * b for a, b in zip(normal, pts[0]))
        vals = [sum(a * b for a, b in zip(normal, p)) + c for p in coords]
        if all(v >= 0 for v in vals):
            out.add(_normalize_ineq(normal, c))
        elif all(v <= 0 for v in vals):
            out.add(_normalize_ineq([-x for x in normal], -c))
    return sorted(out)


def _det_frac(mat):
    n = len(mat)
    if n == 0:
        return Fraction(1)
    a = [[Fraction(x) for x in row] for row in mat]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


def _normalize_ineq(normal, c):
    scale = max(abs(x) for x in normal)
    return tuple(x / scale for x in normal), c / scale


def lattice_points(vertices: Iterable[Sequence[int]]) -> LatticePolytope:
    """All integer points of the convex hull of ``vertices``."""
    pts = sorted(set(_as_points(vertices)))
    n = len(pts[0])
    coords, dim = _affine_coordinates(pts)
    base = pts[0]
    lo = [min(p[i] for p in pts) for i in range(n)]
    hi = [max(p[i] for p in pts) for i in range(n)]
    if dim == 0:
        return LatticePolytope(tuple(pts), tuple(pts), n)
    ineqs = _halfspaces(coords, dim)
    inside = []
    for cand in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        d = tuple(a - b for a, b in zip(cand, base))
        if rank([tuple(p2 - b for p2, b in zip(p, base)) for p in pts[1:]] + [d]) > dim:
            continue
        x = _project(d, pts, dim)
        if all(sum(a * b for a, b in zip(nv, x)) + c >= 0 for nv, c in ineqs):
            inside.append(cand)
    verts = [p for p in pts if _is_vertex(p, pts)]
    return LatticePolytope(tuple(sorted(verts)), tuple(sorted(inside)), n)


def _project(d: Point, pts: Sequence[Point], dim: int) -> tuple[Fraction, ...]:
    base = pts[0]
    basis: list[Point] = []
    for p in pts[1:]:
        v = tuple(a - b for a, b in zip(p, base))
        if rank(basis + [v]) > len(basis):
            basis.append(v)
    n = len(base)
    axes = next(ax for ax in itertools.combinations(range(n), dim)
                if _det_int([[b[a] for a in ax] for b in basis]) != 0)
    return tuple(Fraction(d[a]) for a in axes)


def _is_vertex(p: Point, pts: Sequence[Point]) -> bool:
    others = [q for q in pts if q != p]
    if not others:
        return True
    return not in_convex_hull(p, others)


def in_convex_hull(p: Sequence[int], pts: Sequence[Point]) -> bool:
    """Exact membership of ``p`` in conv(pts) via Caratheodory enumeration."""
    pts = list(pts)
    n = len(p)
    for k in range(1, min(len(pts), n + 1) + 1):
        for sub in itertools.combinations(pts, k):
            if affine_rank(list(sub)) != k - 1:
                continue
            lam = _barycentric(p, list(sub))
            if lam is not None and all(x >= 0 for x in lam):
                return True
    return False


def _barycentric(p, simplex):
    """Affine coordinates of ``p`` w.r.t. an affinely independent ``simplex``."""
    k = len(simplex)
    n = len(p)
    # least-squares free exact solve: pick k independent equations among n+1
    rows = [[Fraction(s[i]) for s in simplex] for i in range(n)] + [[Fraction(1)] * k]
    rhs = [Fraction(x) for x in p] + [Fraction(1)]
    for eqs in itertools.combinations(range(n + 1), k):
        sol = _solve([rows[e] for e in eqs], [rhs[e] for e in eqs])
        if sol is not None:
            ok = all(sum(r * s for r, s in zip(rows[e], sol)) == rhs[e] for e in range(n + 1))
            return sol if ok else None
    return None


# ---------------------------------------------------------------------------
# gauge


def normalize_gauge(w: HeightFunction, cell: Cell | Iterable[Point]) -> tuple[HeightFunction, AffineFunctional]:
    """Subtract the affine functional agreeing with ``w`` on a simplex.

    For lower-dimensional cells the functional is completed by zero slopes on
    coordinate directions transverse to the cell.
    """
    members = list(cell.ordered if isinstance(cell, Cell) else sorted(cell))
    if not members:
        raise ValueError("empty cell")
    if affine_rank(members) != len(members) - 1:
        raise ValueError("cell is not affinely independent")
    f = _interpolating_functional(members, [w[m] for m in members])
    values = {m: w[m] - f(m) for m in w.values}
    return HeightFunction(values, w.tolerance), f


def _interpolating_functional(members: Sequence[Point], values: Sequence[Fraction]) -> AffineFunctional:
    n = len(members[0])
    m0 = members[0]
    dirs = [tuple(a - b for a, b in zip(m, m0)) for m in members[1:]]
    # complete with coordinate axes, slope 0 along them
    extra = []
    for i in range(n):
        e = tuple(int(i == j) for j in range(n))
        if rank(dirs + extra + [e]) > len(dirs) + len(extra):
            extra.append(e)
    rows = [list(map(Fraction, d)) for d in dirs + extra]
    rhs = [Fraction(v) - Fraction(values[0]) for v in values[1:]] + [Fraction(0)] * len(extra)
    u = _solve(rows, rhs) if rows else []
    c = Fraction(values[0]) - sum((a * b for a, b in zip(u, m0)), Fraction(0))
    return AffineFunctional(tuple(u), c)


@lru_cache(maxsize=64)
def _hull_faces(points: tuple[Point, ...]) -> frozenset[frozenset[Point]]:
    """Point sets of the proper faces of conv(points)."""
    coords, dim = _affine_coordinates(list(points))
    tight = [frozenset(p for p, x in zip(points, coords)
                       if sum(a * b for a, b in zip(nv, x)) + c == 0)
             for nv, c in _halfspaces(coords, dim)]
    faces = set(tight)
    frontier = set(tight)
    while frontier:
        new = {f & g for f in frontier for g in tight} - faces - {frozenset()}
        faces |= new
        frontier = new
    return frozenset(faces)


def best_gauge(points: Sequence[Point], w: HeightFunction, cell: Iterable[Point]):
    """Maximize ``min_{m not in S} (w_m - f(m))`` over affine ``f`` equal to ``w`` on ``S``.

    Exact vertex enumeration of the small LP. Returns ``(gap, f)``; the gap is
    positive exactly when ``S`` is a face of the lower hull (strictly), and its
    negative is the convexity violation when it is not. It is ``inf`` when ``S``
    is the full point set of a proper face of the hull, where the LP is unbounded.
    """
    s = sorted(set(cell))
    others = [m for m in points if m not in set(s)]
    n = len(points[0])
    if not others or frozenset(s) in _hull_faces(tuple(sorted(points))):
        # some affine function vanishes on S and is negative on the rest: unbounded
        return math.inf, _interpolating_functional(s, [w[m] for m in s])
    # unknowns: u (n), c, g
    eq_rows = [[Fraction(x) for x in m] + [Fraction(1), Fraction(0)] for m in s]
    eq_rhs = [w[m] for m in s]
    nfree = n + 2 - len(s)
    best = None
    for tight in itertools.combinations(others, nfree):
        rows = eq_rows + [[Fraction(x) for x in m] + [Fraction(1), Fraction(1)] for m in tight]
        rhs = eq_rhs + [w[m] for m in tight]
        sol = _solve(rows, rhs)
        if sol is None:
            continue
        u, c, g = sol[:n], sol[n], sol[n + 1]
        f = AffineFunctional(tuple(u), c)
        if all(w[m] - f(m) >= g for m in others) and (best is None or g > best[0]):
            best = (g, f)
    if best is None:
        raise ValueError("gauge LP has no vertex; points not full-dimensional?")
    return best


# ---------------------------------------------------------------------------
# regular subdivision


def _lower_facets(coords, heights, dim, tol):
    """Member-index sets of the lower facets of the lifted configuration."""
    facets = set()
    n = len(coords)
    for sub in itertools.combinations(range(n), dim + 1):
        base = coords[sub[0]]
        diffs = [tuple(a - b for a, b in zip(coords[i], base)) for i in sub[1:]]
        if dim and rank(diffs) < dim:
            continue
        if any(frozenset(sub) <= f for f in facets):
            continue
        rows = [list(coords[i]) + [Fraction(1)] for i in sub]
        sol = _solve(rows, [heights[i] for i in sub])
        if sol is None:
            continue
        u, c = sol[:dim], sol[dim]
        resid = [heights[j] - sum((a * b for a, b in zip(u, coords[j])), Fraction(0)) - c
                 for j in range(n)]
        if tol is None:
            if all(r >= 0 for r in resid):
                facets.add(frozenset(j for j in range(n) if r_eq(resid[j], None)))
        elif all(r >= -tol for r in resid):
            facets.add(frozenset(j for j in range(n) if r_eq(resid[j], tol)))
    return facets


def r_eq(r: Fraction, tol) -> bool:
    return r == 0 if tol is None else abs(r) <= tol


def _faces_of(cell: Cell) -> set[Cell]:
    """All non-empty faces of a cell (itself included)."""
    pts = cell.ordered
    if cell.is_simplex:
        return {Cell(frozenset(c)) for k in range(1, len(pts) + 1)
                for c in itertools.combinations(pts, k)}
    out = {cell}
    coords, dim = _affine_coordinates(list(pts))
    for normal, c in _halfspaces(coords, dim):
        sub = frozenset(p for p, x in zip(pts, coords)
                        if sum(a * b for a, b in zip(normal, x)) + c == 0)
        out |= _faces_of(Cell(sub))
    return out


def regular_subdivision(p: LatticePolytope, w: HeightFunction) -> Subdivision:
    """Project the lower faces of ``{(m, w_m)}`` to a subdivision of the polytope."""
    pts = list(p.points)
    if set(w.values) != set(pts):
        raise ValueError("height domain differs from the polytope's lattice points")
    coords, dim = _affine_coordinates(pts)
    tol = None if w.tolerance is None else Fraction(w.tolerance)
    heights = [w[m] for m in pts]
    facets = _lower_facets(coords, heights, dim, tol)
    top = tuple(sorted(Cell(frozenset(pts[i] for i in f)) for f in facets))
    cells: set[Cell] = set()
    for c in top:
        cells |= _faces_of(c)
    return Subdivision(p, w, top, frozenset(cells), approximate=tol is not None)


def is_generic(z: Subdivision) -> bool:
    return all(c.is_simplex for c in z.top)


# ---------------------------------------------------------------------------
# fans and strata


def _primitive(v: Sequence[int]) -> Point:
    g = reduce(math.gcd, (abs(x) for x in v), 0)
    return tuple(x // g for x in v) if g else tuple(v)


def tangent_cone(m: Point, cell: Cell) -> Cone:
    if m not in cell.members:
        raise ValueError(f"{m} is not a member of {cell}")
    rays = sorted({_primitive(tuple(a - b for a, b in zip(q, m))) for q in cell.members if q != m})
    return Cone(tuple(rays), cell)


def fan_at_vertex(m: Point, z: Subdivision) -> Fan:
    cones = tuple(tangent_cone(m, c) for c in z.cells_containing([m]))
    return Fan(m, cones)


@dataclass(frozen=True)
class StratumInfo:
    cell: Cell
    dimension: int
    cofaces: int          # number of top cells containing this one
    interior: bool        # not contained in the boundary of the polytope


@dataclass(frozen=True)
class StrataReport:
    strata: tuple[StratumInfo, ...]
    pairs_of_pants: int
    by_dimension: Mapping[int, int] = field(default_factory=dict)

    def count(self, dimension: int, interior: bool | None = None) -> int:
        return sum(1 for s in self.strata if s.dimension == dimension
                   and (interior is None or s.interior == interior))


def strata(z: Subdivision) -> StrataReport:
    """Stratification of the canonical limit: one stratum per cell."""
    out = []
    for c in sorted(z.cells, key=lambda c: (c.dimension, c.ordered)):
        cof = len(z.cells_containing(c.members, top_only=True))
        out.append(StratumInfo(c, c.dimension, cof, _cell_interior(c, z)))
    counts: dict[int, int] = {}
    for s in out:
        counts[s.dimension] = counts.get(s.dimension, 0) + 1
    return StrataReport(tuple(out), len(z.top), counts)


def _cell_interior(c: Cell, z: Subdivision) -> bool:
    """A cell meets the interior of the polytope iff its barycentre is interior."""
    pts = list(z.polytope.points)
    coords, dim = _affine_coordinates(pts)
    ineqs = _halfspaces(coords, dim)
    idx = [pts.index(m) for m in c.ordered]
    bary = [sum(coords[i][k] for i in idx) / len(idx) for k in range(dim)]
    return all(sum(a * b for a, b in zip(nv, bary)) + cc > 0 for nv, cc in ineqs)


def cover_degree(cell: Cell) -> int:
    """Index of the lattice spanned by the edge vectors of a simplex in its saturation."""
    if not cell.is_simplex:
        raise ValueError(f"{cell} is not a simplex")
    pts = cell.ordered
    diffs = [tuple(a - b for a, b in zip(p, pts[0])) for p in pts[1:]]
    if not diffs:
        return 1
    k = len(diffs)
    n = len(pts[0])
    g = 0
    for cols in itertools.combinations(range(n), k):
        g = math.gcd(g, abs(_det_int([[d[c] for c in cols] for d in diffs])))
    return g


# ---------------------------------------------------------------------------
# ray classification


@dataclass(frozen=True)
class RayClassification:
    """Rays as ``(ray, height)`` pairs, split by the maximal PL minorant ``p``."""

    all_rays: tuple[tuple[Point, Fraction], ...]       # Sigma''(1)
    on_minorant: tuple[tuple[Point, Fraction], ...]    # Sigma'(1): p(m) = w_m
    fan_rays: tuple[tuple[Point, Fraction], ...]       # Sigma(1): p not linear near m
    maximal_cones: tuple[tuple[Point, ...], ...]
    minorant: Mapping[Point, Fraction]

    def directions(self, which: str = "fan_rays") -> tuple[Point, ...]:
        return tuple(sorted({r for r, _ in getattr(self, which)}))


def _in_cone_exact(v: Sequence[Fraction], gens: Sequence[Point]) -> bool:
    n = len(v)
    if all(x == 0 for x in v):
        return True
    for k in range(1, min(len(gens), n) + 1):
        for sub in itertools.combinations(gens, k):
            if rank(sub) < k:
                continue
            coef = _cone_coords(v, sub)
            if coef is not None and all(c >= 0 for c in coef):
                return True
    return False


def _cone_coords(v, sub):
    n = len(v)
    k = len(sub)
    rows = [[Fraction(g[i]) for g in sub] for i in range(n)]
    for eqs in itertools.combinations(range(n), k):
        sol = _solve([rows[e] for e in eqs], [Fraction(v[e]) for e in eqs])
        if sol is not None:
            if all(sum(r * s for r, s in zip(rows[e], sol)) == v[e] for e in range(n)):
                return sol
            return None
    return None


def toric_ray_classification(rays: Sequence[Sequence[int]], w) -> RayClassification:
    """Classify rays by the maximal piecewise-linear minorant of their heights.

    ``w`` is either a mapping ray -> height or a sequence of heights parallel to
    ``rays`` (the latter allows one direction to appear with several heights).
    """
    if isinstance(w, Mapping):
        pairs = [(tuple(int(c) for c in r), Fraction(w[tuple(r)])) for r in rays]
    else:
        pairs = [(tuple(int(c) for c in r), Fraction(h)) for r, h in zip(rays, w)]
    pairs = sorted(set(pairs))
    n = len(pairs[0][0])
    vecs = [r for r, _ in pairs]
    for i in range(n):
        for sgn in (1, -1):
            if not _in_cone_exact([Fraction(sgn * int(i == j)) for j in range(n)], vecs):
                raise ValueError("rays do not positively span")
    # lower facets of cone{(r, w_r)}: u.r = w_r on n independent rays, u.r <= w_r elsewhere
    facets = {}
    for sub in itertools.combinations(range(len(pairs)), n):
        if rank([vecs[i] for i in sub]) < n:
            continue
        u = tuple(_solve([list(map(Fraction, vecs[i])) for i in sub], [pairs[i][1] for i in sub]))
        vals = [sum((a * b for a, b in zip(u, r)), Fraction(0)) for r in vecs]
        if all(v <= h for v, (_, h) in zip(vals, pairs)):
            facets[u] = frozenset(j for j, (v, (_, h)) in enumerate(zip(vals, pairs)) if v == h)
    if not facets:
        raise ValueError("w is not convex at the origin")
    p_map = {r: max(sum((a * b for a, b in zip(u, r)), Fraction(0)) for u in facets)
             for r in vecs}
    on = [pr for pr in pairs if p_map[pr[0]] == pr[1]]
    fan = set()
    cones = set()
    for u in sorted(facets):
        eq = sorted(facets[u])
        gens = [vecs[j] for j in eq]
        extreme = []
        for j in eq:
            rest = [g for g in gens if _primitive(g) != _primitive(vecs[j])]
            if not _in_cone_exact([Fraction(x) for x in vecs[j]], rest):
                extreme.append(pairs[j])
        fan |= set(extreme)
        cones.add(tuple(sorted({r for r, _ in extreme})))
    return RayClassification(tuple(pairs), tuple(on), tuple(sorted(fan)),
                             tuple(sorted(cones)), p_map)


# ---------------------------------------------------------------------------
# dominance threshold


@dataclass(frozen=True)
class DominanceThreshold:
    """Certified exponent ``a`` for which every dominance set is a cell.

    ``value`` is ``None`` when the polytope is a single simplex (every subset is
    a face), in which case any ``a > 0`` works.
    """

    value: Fraction | None
    witness: Cell | None = None
    gap: Fraction | None = None          # convexity gap C2 at the witness
    spread: Fraction | None = None       # interpolation factor C1 at the witness

    @property
    def unconstrained(self) -> bool:
        return self.value is None


def minimal_non_faces(z: Subdivision) -> list[Cell]:
    pts = list(z.polytope.points)
    faces = {c.members for c in z.cells}
    out = []
    l = z.rank
    for k in range(1, l + 3):
        for sub in itertools.combinations(pts, k):
            s = frozenset(sub)
            if s in faces:
                continue
            if all(s - {m} in faces or len(s) == 1 for m in s):
                out.append(Cell(s))
    return out


def _interpolation_spread(s: Sequence[Point], pts: Sequence[Point]) -> Fraction:
    """Smallest factor C1 with ``max g <= C1 * a`` for the proof's interpolant."""
    l = len(pts[0])
    need = l + 1 - len(s)
    others = [m for m in pts if m not in set(s)]
    best = None
    for extra in itertools.combinations(others, need):
        simplex = list(s) + list(extra)
        if affine_rank(simplex) != l:
            continue
        worst = Fraction(0)
        for m in pts:
            lam = _barycentric(m, simplex)
            worst = max(worst, sum((max(x, Fraction(0)) for x in lam[:len(s)]), Fraction(0)))
        c1 = worst / 2
        if best is None or c1 < best:
            best = c1
    if best is None:
        raise ValueError("cannot complete witness to a full simplex")
    return best


def certify_dominance_threshold(p: LatticePolytope, w: HeightFunction, z: Subdivision) -> DominanceThreshold:
    """Conservative dominance exponent from minimal non-faces of the subdivision.

    For each minimal non-face the convexity gap ``C2`` is the exact optimum of
    the gauge LP, and ``C1`` bounds the affine interpolant of values in
    ``[0, a/2]`` on the non-face. The returned ``a`` is half the smallest ratio.
    """
    if not is_generic(z):
        raise ValueError("threshold certificate needs a simplicial subdivision")
    pts = list(p.points)
    best = None
    for nf in minimal_non_faces(z):
        s = nf.ordered
        gap, _ = best_gauge(pts, w, s)
        c2 = -gap
        if c2 <= 0:
            raise AssertionError(f"non-face {nf} has no convexity violation")
        c1 = _interpolation_spread(s, pts)
        ratio = c2 / c1
        if best is None or ratio < best[0]:
            best = (ratio, nf, c2, c1)
    if best is None:
        return DominanceThreshold(None)
    return DominanceThreshold(best[0] / 2, best[1], best[2], best[3])
