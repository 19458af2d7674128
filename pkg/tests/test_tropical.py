import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tropkahler.degeneration import FamilyParameter, TorusPoint
from tropkahler.harness import SamplePlan, realize
from tropkahler.lattice import Cell
from tropkahler.tropical import (DEFAULT_KAPPA, affine_fit_residual, bounded_terms_max, bounded_terms_report,
                                 dominance, dominant_set, filtration, in_own_chart, log_map, tropical_curve,
                                 tropical_gap, tropicalization)

from oracles import mp_eta

A_CUBIC = 1 / 6
t_exp = st.integers(2, 8).map(lambda k: 10.0 ** -k)
depth = st.floats(0.0, 0.95)
phase = st.floats(-math.pi, math.pi)
top_index = st.integers(0, 8)
perm_index = st.integers(0, 5)


def fiber_point(fam, k, perm, dep, ph, r):
    s = sorted(fam.subdivision.top)[k]
    order = sorted(itertools.permutations(s.ordered))[perm]
    return realize(fam, SamplePlan(0, order, (dep,), (ph,)), FamilyParameter(r))


@given(t_exp, st.floats(-30, 30), st.floats(-30, 30))
def test_eta_matches_mpmath(cubic, r, u1, u2):
    t = FamilyParameter(r)
    x = TorusPoint(np.array([u1, u2]), np.zeros(2))
    d = dominance(cubic, t, x)
    ref = mp_eta(cubic.points, [cubic.heights[m] for m in cubic.points], math.log(r), [u1, u2])
    assert abs(d.eta.sum() - 1) < 1e-12
    for got, want in zip(d.eta, ref):
        assert abs(got - want) <= 1e-12 * max(want, 1e-300) + 1e-300


def test_dominance_rejects_bad_kappa(cubic):
    with pytest.raises(ValueError):
        dominance(cubic, FamilyParameter(0.1), TorusPoint(np.zeros(2), np.zeros(2)), kappa=0)
    with pytest.raises(ValueError):
        dominant_set(cubic, FamilyParameter(0.1), TorusPoint(np.zeros(2), np.zeros(2)), 0)


@given(top_index, perm_index, depth, phase, t_exp)
def test_dominant_set_is_a_cell_and_filtration_is_monotone(cubic, k, perm, dep, ph, r):
    p = fiber_point(cubic, k, perm, dep, ph, r)
    x = p.point
    s = dominant_set(cubic, p.t, x, A_CUBIC)
    assert cubic.subdivision.contains(s.members)
    f = filtration(cubic, p.t, x, A_CUBIC)
    assert f.chain[0] == s
    assert f.terminal in cubic.subdivision.top
    assert all(a.members < b.members for a, b in zip(f.chain, f.chain[1:]))
    assert all(b <= a for a, b in zip(f.log_levels, f.log_levels[1:]))


@given(top_index, perm_index, depth, phase, t_exp)
def test_own_chart_is_ordered_by_dominance(cubic, k, perm, dep, ph, r):
    p = fiber_point(cubic, k, perm, dep, ph, r)
    q, f = in_own_chart(p, A_CUBIC)
    z = np.abs(q.z)
    slack = 1 + 1e-12
    assert z[0] <= slack and all(b <= a * slack for a, b in zip(z, z[1:]))
    # the largest term is balanced by the other |Delta| - 1 terms
    assert z[0] >= 1 / (len(cubic) - 1) / slack
    mx = bounded_terms_max(bounded_terms_report(p.t, q))
    assert mx["z"] <= slack and mx["mono"] <= slack
    assert mx["inv_a"] <= 1 / DEFAULT_KAPPA * slack


@given(t_exp, st.floats(-20, 20), st.floats(-20, 20))
def test_tropicalization_is_heights_up_to_affine(cubic, r, u1, u2):
    v = tropicalization(cubic, FamilyParameter(r), TorusPoint(np.array([u1, u2]), np.zeros(2)))
    assert affine_fit_residual(cubic, v) < 1e-9


def test_tropical_curve_of_cubic(cubic):
    curve = tropical_curve(cubic)
    assert len(curve.vertices) == 9 and len(curve.segments) == 9 and len(curve.rays) == 9
    pts = np.array(cubic.points, dtype=float)
    for s, y in curve.vertices.items():
        vals = pts @ y - cubic.w
        top = np.isclose(vals, vals.max(), atol=1e-12)
        assert {m for m, b in zip(cubic.points, top) if b} == set(s.members)
    assert curve.min_edge == pytest.approx(1.0)


@pytest.mark.parametrize("r", [1e-4, 1e-8])
def test_amoeba_near_tropical_curve(cubic, r):
    curve = tropical_curve(cubic)
    big_l = -math.log(r)
    bound = math.log(len(cubic) - 1) / big_l
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(9):
        for _ in range(10):
            p = fiber_point(cubic, k, int(rng.integers(6)), rng.uniform(0, 0.95), rng.uniform(-3, 3), r)
            x = p.point
            assert tropical_gap(cubic, p.t, x) <= bound * (1 + 1e-9)
            worst = max(worst, curve.distance(log_map(x) / big_l))
    assert worst < 0.5 * curve.min_edge


def test_empty_dominant_set_when_cut_is_too_high(cubic):
    # at |t| = 1/2 the largest weight is 1 / (1 + 6/4 + 3/64) < |t|^0.001
    t = FamilyParameter(0.5)
    x = TorusPoint(np.zeros(2), np.zeros(2))
    s = dominant_set(cubic, t, x, 1e-3)
    assert s == Cell(frozenset())
    assert cubic.subdivision.contains(s.members)
