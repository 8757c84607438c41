import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsec.core import (
    BoundaryError, DomainError, EconomyParams, PriceSystem, StateVector, compute_gamma_aggregates,
    compute_wealth_ratios, gamma0,
)
from xsec.equilibrium import (
    EquilibriumSolution, NoEquilibrium, _region_map, _snapshot, boundary_excess_at_zero, boundary_limits,
    dividend_yields, gross_returns, price_map, solve_equilibrium, state_drifts,
)
from xsec.kkt import Protection, Scheme

from conftest import table_sweep

unit = st.floats(0.02, 0.98)


def test_price_map_near_full_minority_share(table1):
    pr = price_map(table1, StateVector(1 - 1e-12, 0.5, 0.5), (0.0, 0.0), Scheme.PERFECT9)
    assert pr.sigma == pytest.approx(0.13, rel=1e-10)
    assert pr.delta == pytest.approx(0.10, rel=1e-10)


def test_price_map_full_concentration(table1):
    P = table1.replace(tau=2.0)
    st_ = StateVector(0.3, 0.4, 0.6)
    pr = price_map(P, st_, (2.0, 1.0), Scheme.PERFECT9)
    g0 = gamma0(P, 0.3)
    assert pr.sigma == pytest.approx(P.sigmaD / (g0 * P.rho_c), rel=1e-14)


def test_price_map_rejects_infeasible_holdings(table1, mid_state):
    with pytest.raises(DomainError):
        price_map(table1, mid_state, (1.5, 0.5), "Perfect9")


def test_imperfect_fixed_point_is_self_consistent(mid_state):
    P = EconomyParams(p=0.6)
    sol = solve_equilibrium(P, mid_state)
    wealth = compute_wealth_ratios(P, mid_state)
    eta = _region_map(P, mid_state, wealth, Scheme.IMPERFECT12, Protection.from_params(P), sol.region.index)
    assert np.max(np.abs(eta(*sol.holdingsC) - np.array(sol.holdingsC))) < 1e-10
    assert sol.fixed_point_residual < 1e-10


def test_drift_spot_values(table1, mid_state):
    pr = price_map(table1, mid_state, (0.5, 0.5), Scheme.PERFECT9)
    d = state_drifts(table1, mid_state, (0.5, 0.5), pr)
    assert abs(d.mu1Y - 0.00125) <= 1e-15
    assert abs(d.delta1Y + 0.025) <= 1e-15
    assert d.sigma1Y == 0.0 and d.sigma2Y == 0.0
    assert d.delta2Y == pytest.approx(-0.25 * pr.delta, rel=1e-15)


def test_boundary_drift_values(table1):
    lo = boundary_limits(table1, 0.5, 0.5, 0, region_hint=9)
    hi = boundary_limits(table1, 0.5, 0.5, 1)
    assert lo.drifts.muY == pytest.approx(table1.rho_m * 0.5, rel=1e-14)
    assert round(lo.drifts.muY, 5) == 0.13413
    assert hi.drifts.muY == pytest.approx(-table1.rho_c * 0.1, rel=1e-14)
    assert round(hi.drifts.muY, 6) == -0.021544
    assert hi.holdingsC == (0.0, 0.0) and lo.holdingsC == (1.0, 1.0)
    assert hi.drifts.sigmaY == 0.0 and hi.drifts.deltaY == 0.0


def test_lambda_9(table1):
    l1, l2 = boundary_excess_at_zero(table1, 0.5, 0.5, 9)
    assert l1 == pytest.approx(-table1.rho_c * 0.4, rel=1e-14)
    assert l2 == pytest.approx(-table1.rho_c * 0.4, rel=1e-14)
    assert round(l1, 5) == -0.08618


def test_boundary_rejects_unknown_hint(table1):
    with pytest.raises(DomainError):
        boundary_limits(table1, 0.5, 0.5, 0, region_hint=7)
    with pytest.raises(DomainError):
        boundary_limits(table1, 0.5, 0.5, 2)


def test_default_boundary_hint_follows_smallest_grid_point():
    assert boundary_limits(EconomyParams(p=0.9), 0.5, 0.5, 0).region.index == 10


def test_dividend_yield_and_gross_returns(table1, mid_state):
    d1, d2 = dividend_yields(table1, mid_state)
    assert d1 == pytest.approx(0.4 * 0.5 / (0.5 * gamma0(table1, 0.5)), rel=1e-15)
    assert round(d1, 5) == 0.09559
    pr = PriceSystem(0.04, 0.02, 0.02, 0.1, 0.1)
    g1, g2 = gross_returns(pr, 0.0, table1, mid_state)
    assert g2 == pr.r + d2 and g1 == pr.mu1 + d1


def test_endpoints_are_rejected(table1):
    with pytest.raises(BoundaryError):
        solve_equilibrium(table1, StateVector(0.0, 0.5, 0.5))


@settings(max_examples=150, deadline=None)
@given(y=unit, y1=unit, y2=unit, n1=st.floats(0, 1), n2=st.floats(0, 1), p=st.floats(0, 1))
def test_volatility_identities(y, y1, y2, n1, n2, p):
    P = EconomyParams(p=p)
    s = StateVector(y, y1, y2)
    pr = price_map(P, s, (n1, n2), Scheme.IMPERFECT12 if p < 1 else Scheme.PERFECT9)
    g = compute_gamma_aggregates(P, s, n1, n2)
    assert 1 / pr.sigma == pytest.approx(g.gamma0 / P.sigmaD * (y2 * g.gamma1 / P.tau + (1 - y2) * g.gamma2), rel=1e-12)
    assert pr.delta * (1 - y2) * g.gamma0 * g.gamma2 == pytest.approx((1 - y1) * P.deltaD, rel=1e-12)
    assert pr.sigma2_total > pr.sigma


@settings(max_examples=150, deadline=None)
@given(y=unit, y1=unit, y2=unit, n1=st.floats(0, 1), n2=st.floats(0, 1), p=st.floats(0, 0.99))
def test_excess_return_decomposition(y, y1, y2, n1, n2, p):
    P = EconomyParams(p=p)
    s = StateVector(y, y1, y2)
    w = compute_wealth_ratios(P, s)
    snap = _snapshot(P, s, w, n1, n2, Scheme.IMPERFECT12)
    m, x = snap.exp.M, snap.x
    g0 = gamma0(P, y)
    c1 = P.tau * y / (y2 * P.rho_m * g0)
    c2 = y / ((1 - y2) * P.rho_m * g0)
    e1 = c1 * (m.xi1 * (P.tau - n1) - m.alpha1) + c1 * m.xi0 * (1 - n2)
    e2 = c2 * (m.xi2 * (1 - n2) - (1 - x) * m.alpha2) + c2 * m.xi0 * (P.tau - n1)
    pr = snap.prices
    scale = max(1.0, abs(e1), abs(e2))
    assert abs(pr.mu1 - pr.r - e1) < 1e-12 * scale
    assert abs(pr.mu2 - pr.r - e2) < 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(y=unit, y1=unit, y2=unit, tau=st.floats(0.3, 3))
def test_stock_wealth_identity(y, y1, y2, tau):
    P = EconomyParams(tau=tau)
    w = compute_wealth_ratios(P, StateVector(y, y1, y2))
    assert tau * w.s1_over_xC + w.s2_over_xC == pytest.approx(1 + w.s1_over_xC / w.s1_over_xM, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(y1=unit, y2=unit, l1M=st.floats(0.01, 0.6), l2M=st.floats(0.01, 0.6), l1C=st.floats(0.01, 0.3),
       l2C=st.floats(0.01, 0.3), gc=st.floats(1.5, 5), extra=st.floats(0, 3), rho=st.floats(0.001, 0.1))
def test_boundaries_are_repulsive(y1, y2, l1M, l2M, l1C, l2C, gc, extra, rho):
    P = EconomyParams(l1M=l1M, l2M=l2M, l1C=l1C, l2C=l2C, gammaC=gc, gammaM=gc + extra, rho=rho)
    assert boundary_limits(P, y1, y2, 0, region_hint=9).drifts.muY > 0
    assert boundary_limits(P, y1, y2, 1).drifts.muY < 0


def test_solution_is_market_clearing(mid_state):
    for p in (1.0, 0.9, 0.6):
        sol = solve_equilibrium(EconomyParams(p=p), mid_state)
        assert isinstance(sol, EquilibriumSolution) and sol.verified
        assert abs(sol.holdingsC[0] + sol.holdingsM[0] - 1) < 1e-10
        assert abs(sol.holdingsC[1] + sol.holdingsM[1] - 1) < 1e-10


def test_cold_and_warm_sweeps_agree():
    for p in (0.9, 0.6):
        warm, cold = table_sweep(p), table_sweep(p, warm=False)
        assert [s.region.index for s in warm] == [s.region.index for s in cold]
        assert max(abs(a.holdingsC[1] - b.holdingsC[1]) for a, b in zip(warm, cold)) < 1e-9


def test_gross_return_continuous_across_breakpoint():
    sols = table_sweep(0.9)
    g1 = np.array([s.grossReturn1 for s in sols])
    jumps = np.abs(np.diff(g1))
    i = 45  # between y = 0.46 (Region 10) and 0.47 (Region 1)
    assert sols[i].region.index == 10 and sols[i + 1].region.index == 1
    neighbours = np.concatenate([jumps[i - 3:i], jumps[i + 1:i + 4]])
    assert jumps[i] < 10 * neighbours.max()


def test_extreme_interior_states_converge(table1):
    for y in (1e-4, 1 - 1e-4):
        sol = solve_equilibrium(table1, StateVector(y, 0.5, 0.5))
        assert isinstance(sol, EquilibriumSolution) and sol.fixed_point_residual < 1e-10


def test_no_equilibrium_is_reported_with_reasons():
    P = EconomyParams(p=0.9, pPrime=0.9)
    sol = solve_equilibrium(P, StateVector(0.05, 1 - 1e-6, 0.5), "TwoSided16")
    assert isinstance(sol, NoEquilibrium)
    assert len(sol.attempts) == 16 and all(a.reason for a in sol.attempts)
    d = sol.to_dict()
    assert d["equilibrium"] is False and len(d["attempts"]) == 16


def test_solution_serialises(mid_state, table1):
    d = solve_equilibrium(table1, mid_state).to_dict()
    assert d["region"] == 1 and math.isclose(d["sigma2"], math.hypot(d["sigma"], d["delta"]))
