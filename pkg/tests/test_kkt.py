import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsec.core import ExposureRatios
from xsec.kkt import (
    COND_TOL, REGION_BRANCHES, NoCandidateError, Protection, Scheme, SingularRiskError, best_candidate,
    controlling_objective, kkt_residuals, region_candidate, solve_controlling, solve_controlling_imperfect,
    solve_controlling_perfect, solve_controlling_two_sided, solve_minority,
)
from xsec.oracle import random_instance, reduced_objective

seeds = st.integers(0, 2**32 - 1)


def exp(t1, t2, x0, x1, x2, a1=0.0, a2=0.0):
    return ExposureRatios(t1, t2, x0, x1, x2, a1, a2)


def test_negative_premia_give_region_6():
    c = solve_controlling_perfect(exp(-0.2, -0.3, 0.01, 0.5, 0.6, 0.05, 0.05))
    assert (c.region.index, c.n1C, c.n2C) == (6, 0.0, 0.0)


def test_decoupled_interior_solution():
    e = exp(0.1, 0.12, 0.0, 0.5, 0.6, 0.05, 0.04)
    c = solve_controlling_perfect(e, tau=1.0)
    assert c.region.index == 1
    assert c.n1C == pytest.approx(0.15 / 0.5, rel=1e-14)
    assert c.n2C == pytest.approx(0.16 / 0.6, rel=1e-14)


def test_imperfect_diagonal_region_1_formula():
    p, k = 0.6, 6.0
    e = exp(0.05, 0.02, 0.0, 0.5, 0.8, 0.05, 0.04)
    c = solve_controlling_imperfect(e, p, k)
    assert c.region.index == 1
    expect = (e.theta2 + (2 - p) * e.alpha2) / (e.xi2 + (1 - p) * (2 + k * (1 - p)) * e.alpha2)
    assert c.n2C == pytest.approx(expect, rel=1e-13)
    assert c.xStar == pytest.approx((1 - p) * c.n2C, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_imperfect_tends_to_perfect(seed):
    inst = random_instance(np.random.default_rng(seed), Scheme.PERFECT9)
    a = solve_controlling_perfect(inst.exposure, inst.prot.tau)
    b = solve_controlling_imperfect(inst.exposure, 1 - 1e-10, 6.0, inst.prot.tau)
    assert np.allclose(a.holdings, b.holdings, atol=1e-7)
    assert b.region.index == a.region.index


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_two_sided_tends_to_imperfect(seed):
    inst = random_instance(np.random.default_rng(seed), Scheme.IMPERFECT12)
    pr = inst.prot
    a = solve_controlling_imperfect(inst.exposure, pr.p, pr.k, pr.tau)
    b = solve_controlling_two_sided(inst.exposure, pr.p, 1 - 1e-10, pr.k, pr.kPrime, pr.tau)
    assert np.allclose(a.holdings, b.holdings, atol=1e-7)
    assert a.objective == pytest.approx(b.objective, abs=1e-8)


def test_symmetric_two_sided_holdings_match():
    e = exp(0.03, 0.03, 0.1, 0.6, 0.6, 0.08, 0.08)
    c = solve_controlling_two_sided(e, 0.7, 0.7, 6.0, 6.0, 1.0)
    assert c.n1C == pytest.approx(c.n2C, abs=1e-12)
    assert c.xStar == pytest.approx(c.xPrimeStar, abs=1e-12)


def test_degenerate_region_reports_a_point_of_the_flat_segment():
    # xi1 (xi2 - alpha2/k) = xi0^2 and the premia are aligned, so the
    # cost-limited system has a line of solutions
    e = exp(0.5, -0.2, 0.5, 1.0, 0.35, 0.1, 0.6)
    prot = Protection(p=0.5, k=6.0)
    c = region_candidate(e, Scheme.IMPERFECT12, 10, prot)
    assert c.region.degenerate_case and c.conditions_satisfied
    assert c.n1C + 0.5 * c.n2C == pytest.approx(0.6, abs=1e-12)
    V = reduced_objective(e, Scheme.IMPERFECT12, prot)
    vals = [V(0.6 - 0.5 * n2, n2)[0] for n2 in np.linspace(0.25, 1.0, 7)]
    assert np.ptp(vals) < 1e-12
    assert c.objective == pytest.approx(vals[0], abs=1e-12)


def test_minority_closed_forms():
    e = exp(0.02, 0.01, 0.0, 0.4, 0.5, 0.05, 0.06)
    m = solve_minority(e, 0.1, 0.2)
    assert m.n1M == pytest.approx((0.02 + 0.8 * 0.05) / 0.4, rel=1e-14)
    e = exp(-0.8 * 0.05, -0.9 * 0.06, 0.1, 0.4, 0.5, 0.05, 0.06)
    m = solve_minority(e, 0.1, 0.2)
    assert abs(m.n1M) < 1e-15 and abs(m.n2M) < 1e-15
    with pytest.raises(SingularRiskError):
        solve_minority(exp(0.1, 0.1, 0.5, 0.5, 0.5))


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.1, 2), b=st.floats(-0.9, 0.9), c=st.floats(0.1, 2), t=st.tuples(*[st.floats(-1, 1)] * 4),
       x=st.floats(0, 0.5), xp=st.floats(0, 0.5))
def test_minority_matches_linear_solve(a, b, c, t, x, xp):
    L = np.array([[a, 0], [b, c]])
    xi = L @ L.T
    e = exp(t[0], t[1], xi[0, 1], xi[0, 0], xi[1, 1], abs(t[2]), abs(t[3]))
    m = solve_minority(e, x, xp)
    ref = np.linalg.solve(xi, [t[0] + (1 - xp) * abs(t[2]), t[1] + (1 - x) * abs(t[3])])
    assert np.allclose([m.n1M, m.n2M], ref, rtol=1e-9, atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(seed=seeds, scheme=st.sampled_from(list(Scheme)))
def test_candidates_satisfy_kkt_system(seed, scheme):
    inst = random_instance(np.random.default_rng(seed), scheme)
    for index in REGION_BRANCHES[scheme]:
        c = region_candidate(inst.exposure, scheme, index, inst.prot)
        if not c.conditions_satisfied:
            continue
        res = kkt_residuals(c, inst.exposure, inst.prot)
        scale = 1.0 + max(abs(inst.exposure.theta1), abs(inst.exposure.theta2), inst.exposure.xi1, inst.exposure.xi2)
        assert np.max(np.abs(res["stationarity"])) < 1e-9 * scale
        assert np.max(np.abs(res["slackness"])) < 1e-9 * scale
        assert np.max(res["constraints"]) < COND_TOL
        assert min(c.multipliers) > -COND_TOL


@settings(max_examples=150, deadline=None)
@given(seed=seeds, scheme=st.sampled_from(list(Scheme)))
def test_solution_feasible_and_locally_strict(seed, scheme):
    inst = random_instance(np.random.default_rng(seed), scheme)
    pr = inst.prot
    c = solve_controlling(inst.exposure, scheme, pr)
    assert -1e-12 <= c.n1C <= pr.tau + 1e-12 and -1e-12 <= c.n2C <= 1 + 1e-12
    if scheme is not Scheme.PERFECT9:
        assert 0 <= c.xStar <= (1 - pr.p) * c.n2C + 1e-12
    V = reduced_objective(inst.exposure, scheme, pr)
    base = V(c.n1C, c.n2C)[0]
    assert base == pytest.approx(c.objective, abs=1e-12)
    for d1, d2 in itertools.product((-1e-4, 0.0, 1e-4), repeat=2):
        m1, m2 = c.n1C + d1 * pr.tau, c.n2C + d2
        if (d1, d2) == (0, 0) or not (0 <= m1 <= pr.tau and 0 <= m2 <= 1):
            continue
        assert V(m1, m2)[0] < base


def test_objective_vectorises():
    e = exp(0.1, 0.1, 0.1, 0.5, 0.6, 0.05, 0.05)
    n = np.linspace(0, 1, 5)
    assert controlling_objective(e, n, n).shape == (5,)


def test_best_candidate_requires_a_valid_region():
    with pytest.raises(NoCandidateError):
        best_candidate([])
