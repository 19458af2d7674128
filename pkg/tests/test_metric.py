import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from tropkahler.degeneration import Family, FamilyParameter, HypersurfacePoint, TorusPoint, solve_fiber
from tropkahler.harness import SamplePlan, realize
from tropkahler.metric import (HermitianForm, MetricError, _ambient, chartwise_convergence,
                               fd_fiber_hessian, fiber_density, gauss_curvature, kahler_form, laplacian,
                               limit_metric, limit_point, metric_report, potential, quasi_isometry_ratio,
                               reference_form, relative_difference, ricci_potential, volume_normalization,
                               weights)
from tropkahler.tropical import DEFAULT_KAPPA, in_own_chart

from oracles import mp_log_eta, mp_weights

A_CUBIC = 1 / 6


def own_chart_point(fam, k, perm, dep, ph, r):
    s = sorted(fam.subdivision.top)[k]
    order = sorted(itertools.permutations(s.ordered))[perm]
    p = realize(fam, SamplePlan(0, order, (dep,), (ph,)), FamilyParameter(r))
    return in_own_chart(p, A_CUBIC)[0]


@given(st.integers(2, 8), st.floats(-25, 25), st.floats(-25, 25))
def test_weights_match_mpmath(cubic, k, u1, u2):
    t = FamilyParameter(10.0 ** -k)
    x = TorusPoint(np.array([u1, u2]), np.zeros(2))
    wd = weights(cubic, t, x)
    tops = sorted(cubic.subdivision.top)
    ref = mp_weights(cubic.points, [cubic.heights[m] for m in cubic.points],
                     [s.ordered for s in tops], math.log(t.r), [u1, u2], DEFAULT_KAPPA)
    got = [wd.lambda_S[s] for s in tops]
    assert abs(sum(got) - 1) < 1e-12
    assert np.allclose(got, ref, rtol=1e-11, atol=1e-300)
    # lambda_m sums lambda_S over the cells containing m
    assert wd.lambda_m[(1, 1)] == pytest.approx(sum(v for s, v in wd.lambda_S.items() if (1, 1) in s))


def test_ambient_hessian_matches_mpmath(cubic):
    """Closed-form real Hessian of the potential against a 40-digit numerical Hessian."""
    chart = cubic.chart(((1, 1), (1, 0), (2, 0)))
    t = FamilyParameter(1e-3)
    coords = chart.coords
    tops = [np.array([cubic.index[m] for m in s.ordered]) for s in sorted(cubic.subdivision.top)]
    gauge = chart.gauge
    for u in ([-0.3, 0.2], [-2.0, -5.0], [1.5, -0.7]):
        ell = 2.0 * (gauge * math.log(t.r) + coords @ np.array(u))
        amb = _ambient(coords, ell, tops, DEFAULT_KAPPA)

        def phi(u1, u2):
            # runs at whatever precision mpmath.diff selects
            le = mp_log_eta(list(map(tuple, coords.astype(int))), gauge, math.log(t.r), [u1, u2])
            ell_mp = [2 * (mpmath.mpf(g) * mpmath.log(mpmath.mpf(t.r)) + int(c[0]) * u1 + int(c[1]) * u2)
                      for g, c in zip(gauge, coords.astype(int))]
            top = max(ell_mp)
            lse = top + mpmath.log(mpmath.fsum(mpmath.exp(e - top) for e in ell_mp))
            a = [DEFAULT_KAPPA - v for v in le]
            h = mpmath.fsum(mpmath.fprod(a[int(i)] ** -2 for i in s) for s in tops)
            return mpmath.log(h) + lse

        with mpmath.workdps(40):
            at = (mpmath.mpf(u[0]), mpmath.mpf(u[1]))
            ref = np.array([[float(mpmath.diff(phi, at, (int(i == 0) + int(j == 0), int(i == 1) + int(j == 1))))
                             for j in range(2)] for i in range(2)])
        assert np.allclose(amb.hess, ref, rtol=1e-9, atol=1e-12)


def test_constant_family_equals_limit_metric():
    fam = Family.from_mapping({(0, 0): 0, (1, 0): 0, (0, 1): 0})
    order = ((0, 0), (1, 0), (0, 1))
    chart = fam.chart(order)
    for z2 in (0.3 + 0.4j, -2.0 + 0.1j, 5.0j):
        for r in (0.5, 1e-6):
            p = solve_fiber(FamilyParameter(r), chart, [z2])[0]
            g = kahler_form(p.t, p)
            g0 = limit_metric(order, limit_point([z2]))
            assert relative_difference(g, g0) < 1e-12


def test_unit_simplex_ricci_potential_symmetry():
    fam = Family.from_mapping({(0, 0): 0, (1, 0): 0, (0, 1): 0})
    t = FamilyParameter(0.5)
    z2 = 0.37 - 1.2j
    z1 = -1 - z2
    values = []
    # permuting the three monomials permutes (1, z_1, z_2) up to an overall factor
    for perm in itertools.permutations([(0, 0), (1, 0), (0, 1)]):
        chart = fam.chart(perm)
        terms = {(0, 0): 1.0, (1, 0): z1, (0, 1): z2}
        base = terms[perm[0]]
        logz = np.log([terms[perm[1]] / base, terms[perm[2]] / base])
        values.append(ricci_potential(t, HypersurfacePoint(chart, logz, t, 0.0)))
    assert np.ptp(values) < 1e-10
    # the symmetric point is the calibration point
    roots = np.exp(2j * math.pi * np.arange(1, 3) / 3)
    p = HypersurfacePoint(fam.chart(((0, 0), (1, 0), (0, 1))), np.log(roots), t, 0.0)
    assert abs(ricci_potential(t, p)) < 1e-12
    assert math.isfinite(volume_normalization(2, DEFAULT_KAPPA))


@given(st.integers(0, 8), st.integers(0, 5), st.floats(0.0, 0.95), st.floats(-3.1, 3.1),
       st.sampled_from([1e-2, 1e-5, 1e-8]))
def test_ricci_potential_chart_independent(cubic, k, perm, dep, ph, r):
    q = own_chart_point(cubic, k, perm, dep, ph, r)
    ref = ricci_potential(q.t, q)
    for order in itertools.permutations(q.chart.order):
        assert abs(ricci_potential(q.t, q.in_chart(order)) - ref) < 1e-8


@given(st.integers(0, 8), st.integers(0, 5), st.floats(0.0, 0.95), st.floats(-3.1, 3.1),
       st.sampled_from([1e-2, 1e-5, 1e-8]))
def test_form_is_hermitian_positive(cubic, k, perm, dep, ph, r):
    q = own_chart_point(cubic, k, perm, dep, ph, r)
    rep = metric_report(q.t, q)
    assert rep.omega.hermitian_defect() < 1e-14
    assert np.all(rep.omega.eigenvalues() > 0)
    assert 0 < rep.ratio_min <= rep.ratio_max


def test_potential_anchor_changes_by_pluriharmonic_term(cubic):
    t = FamilyParameter(1e-3)
    x = TorusPoint(np.array([-2.0, 1.0]), np.array([0.3, -0.4]))
    a = potential(cubic, t, x, anchor=(0, 0))
    b = potential(cubic, t, x, anchor=(1, 1))
    lt = cubic.log_terms(t, x).real
    assert a - b == pytest.approx(2 * (lt[cubic.index[(1, 1)]] - lt[cubic.index[(0, 0)]]), abs=1e-10)


def test_fd_hessian_agrees(cubic):
    rng = np.random.default_rng(5)
    good = 0
    for k in range(9):
        q = own_chart_point(cubic, k, int(rng.integers(6)), rng.uniform(0, 0.6), rng.uniform(-3, 3), 1e-3)
        fd = fd_fiber_hessian(q.t, q)
        if fd.condition < 1e6:
            good += 1
            assert fd.rel_error < 1e-6
    assert good >= 5


def test_rank_three_forms():
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    fam = Family.from_mapping({m: 0 for m in pts})
    chart = fam.chart(tuple(pts))
    p = solve_fiber(FamilyParameter(0.5), chart, [0.4 + 0.2j, -0.3 + 0.9j])[0]
    # the rank-2 default is too small for positivity in rank 3
    with pytest.raises(MetricError):
        kahler_form(p.t, p, DEFAULT_KAPPA)
    g = kahler_form(p.t, p, 8.0)
    assert g.dimension == 2 and np.all(g.eigenvalues() > 0)
    fd = fd_fiber_hessian(p.t, p, 8.0)
    assert fd.rel_error < 1e-6
    with pytest.raises(MetricError):
        fiber_density(p.t, p, 8.0)


def test_rank_one_has_no_metric():
    fam = Family.from_mapping({(0,): 0, (1,): 0, (2,): 1})
    chart = fam.chart(((0,), (1,)))
    p = solve_fiber(FamilyParameter(0.1), chart, [])[0]
    with pytest.raises(MetricError):
        kahler_form(p.t, p)


def test_limit_metric_rejects_off_pants_points():
    with pytest.raises(MetricError):
        limit_metric(((1, 1), (1, 0), (2, 0)), np.log([0.5, 0.5]))


def test_quasi_isometry_ratio_matches_eig():
    a = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
    b = np.array([[1.0, 0.1], [0.1, 3.0]], dtype=complex)
    fa = HermitianForm(a, np.zeros(2, dtype=complex), ("x",))
    fb = HermitianForm(b, np.zeros(2, dtype=complex), ("x",))
    lo, hi = quasi_isometry_ratio(fa, fb)
    ev = np.sort(np.linalg.eigvals(np.linalg.solve(b, a)).real)
    assert (lo, hi) == pytest.approx((ev[0], ev[-1]))
    with pytest.raises(ValueError):
        quasi_isometry_ratio(fa, HermitianForm(b, np.ones(2, dtype=complex), ("x",)))


def test_reference_form_is_diagonal_inverse_square(cubic):
    q = own_chart_point(cubic, 4, 0, 0.3, 0.5, 1e-6)
    ref = reference_form(q.t, q)
    a = DEFAULT_KAPPA - np.log(np.exp(2 * q.chart.log_terms(q.t, q.logz).real)
                               / np.exp(2 * q.chart.log_terms(q.t, q.logz).real).sum())
    assert ref.log_matrix[0, 0].real == pytest.approx(1 / (math.pi * a[q.chart.family.index[q.chart.order[2]]] ** 2))


def test_laplacian_and_curvature_of_model_metrics():
    assert laplacian(lambda z: abs(z) ** 2, 0.3 + 0.1j) == pytest.approx(4.0, rel=1e-10)
    # flat density has zero curvature; the Poincare disk 2/(1-|z|^2)^2 has -1
    assert abs(gauss_curvature(lambda z: 1.0, 0.2j)) < 1e-12
    k = gauss_curvature(lambda z: 2.0 / (1 - abs(z) ** 2) ** 2, 0.4 - 0.3j)
    assert k == pytest.approx(-1.0, abs=1e-7)


def test_chartwise_convergence_small_grid(cubic):
    grid = [complex(np.exp(a + 1j * b)) for a in (-0.5, 0.5) for b in (-2.0, 1.0)]
    rep = chartwise_convergence(cubic, ((1, 1), (1, 0), (2, 0)), grid, [1e-2, 1e-4, 1e-6])
    assert rep.monotone and rep.final < rep.errors[0]
