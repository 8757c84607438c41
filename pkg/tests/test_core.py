import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsec.core import (
    BoundaryError, DomainError, EconomyParams, PriceSystem, StateVector, compute_exposure_ratios,
    compute_gamma_aggregates, compute_wealth_ratios, diversion_fraction, diversion_fraction_firm1, gamma0,
)

unit = st.floats(0.01, 0.99)


def test_gamma0_matches_high_precision(table1, mid_state):
    mpmath.mp.dps = 40
    ref = 0.5 * mpmath.mpf("0.01") ** (-1 / mpmath.mpf("3.5")) + 0.5 * mpmath.mpf("0.01") ** (-1 / mpmath.mpf(3))
    g = compute_gamma_aggregates(table1, mid_state, 0.3, 0.4).gamma0
    assert g == pytest.approx(float(ref), rel=1e-14)
    assert round(g, 4) == 4.1846


def test_gamma_aggregates_at_extremes(table1):
    g = compute_gamma_aggregates(table1, StateVector(1.0, 0.3, 0.7), 0.2, 0.9)
    assert g.gamma0 == pytest.approx(0.01 ** (-1 / 3.5), rel=1e-15)
    full = compute_gamma_aggregates(table1.replace(tau=2.0), StateVector(0.4, 0.5, 0.5), 2.0, 1.0)
    assert full.gamma1 == pytest.approx(2.0 * 0.01 ** (1 / 3), rel=1e-15)
    assert full.gamma2 == pytest.approx(0.01 ** (1 / 3), rel=1e-15)


def test_gamma_aggregates_reject_infeasible_holdings(table1, mid_state):
    with pytest.raises(DomainError):
        compute_gamma_aggregates(table1, mid_state, -0.1, 0.5)
    with pytest.raises(DomainError):
        compute_gamma_aggregates(table1, mid_state, 0.5, 1.2)


def test_wealth_ratio_spot_values(table1, mid_state):
    mpmath.mp.dps = 40
    xc = mpmath.mpf("0.01") ** (-1 / mpmath.mpf(3)) * mpmath.mpf("0.5")
    g0 = 0.5 * mpmath.mpf("0.01") ** (-1 / mpmath.mpf("3.5")) + 0.5 * mpmath.mpf("0.01") ** (-1 / mpmath.mpf(3))
    w = compute_wealth_ratios(table1, mid_state)
    assert w.d1_over_xC == pytest.approx(float(mpmath.mpf("0.2") / xc), rel=1e-14)
    assert w.s1_over_xC == pytest.approx(float(g0 * mpmath.mpf("0.5") / xc), rel=1e-14)
    assert round(w.d1_over_xC, 5) == 0.08618 and round(w.s1_over_xC, 5) == 0.90154


def test_wealth_ratios_need_interior_y(table1):
    for y in (0.0, 1.0):
        with pytest.raises(BoundaryError):
            compute_wealth_ratios(table1, StateVector(y, 0.5, 0.5))


def test_d1_over_xM_vanishes_with_y1(table1):
    ws = [compute_wealth_ratios(table1, StateVector(0.5, y1, 0.5)).d1_over_xM for y1 in (1e-2, 1e-4, 1e-8)]
    assert ws[0] > ws[1] > ws[2] and ws[2] < 1e-7


def test_exposure_examples(table1, mid_state):
    w = compute_wealth_ratios(table1, mid_state)
    e = compute_exposure_ratios(w, PriceSystem(0.03, 0.05, 0.03, 0.12, 0.09), table1)
    assert e.C.theta1 == 0.0 and e.M.theta1 == 0.0
    flat = compute_exposure_ratios(w, PriceSystem(0.03, 0.05, 0.02, 0.0, 0.09), table1)
    for x, g in ((flat.C, 3.0), (flat.M, 3.5)):
        assert x.xi0 == 0.0 and x.xi1 == 0.0
    assert flat.C.xi2 == pytest.approx(3.0 * w.s2_over_xC ** 2 * 0.09 ** 2, rel=1e-15)
    with pytest.raises(DomainError):
        compute_exposure_ratios(w, PriceSystem(0.03, 0.05, 0.02, -0.1, 0.09), table1)


def test_diversion_examples():
    assert diversion_fraction(0.2, 0.6, 6.0) == pytest.approx(0.08, abs=1e-15)
    assert all(diversion_fraction(n, 1.0, 6.0) == 0.0 for n in np.linspace(0, 1, 11))
    assert diversion_fraction_firm1(1.0, 0.6, 6.0, 5.0) == pytest.approx(0.08, abs=1e-15)


def test_params_validation_and_round_trip(table1):
    assert EconomyParams.from_json(table1.to_json()) == table1
    for bad in ({"gammaM": 2.0}, {"gammaC": 1.0, "gammaM": 1.5}, {"p": 1.2}, {"l1C": 0.6}, {"k": 0},
                {"sigmaD": float("nan")}, {"tau": "1"}):
        with pytest.raises(DomainError):
            table1.replace(**bad)
    with pytest.raises(DomainError, match="unknown"):
        EconomyParams.from_dict({"mu1D": 0.01, "typo": 1})
    assert json.loads(table1.to_json())["kPrime"] == 6.0


def test_state_validation():
    for bad in ((-0.1, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 1.0)):
        with pytest.raises(DomainError):
            StateVector(*bad)


@settings(max_examples=200, deadline=None)
@given(y=st.floats(0, 1), n1=st.floats(0, 1), n2=st.floats(0, 1), tau=st.floats(0.2, 5))
def test_gamma_aggregates_are_bracketed(y, n1, n2, tau):
    params = EconomyParams(tau=tau)
    g = compute_gamma_aggregates(params, StateVector(y, 0.5, 0.5), n1 * tau, n2)
    lo, hi = sorted((params.rho_c, params.rho_m))
    assert lo * tau * (1 - 1e-12) <= g.gamma1 <= hi * tau * (1 + 1e-12)
    assert lo * (1 - 1e-12) <= g.gamma2 <= hi * (1 + 1e-12)
    assert g.gamma0 == pytest.approx(gamma0(params, y), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(y=unit, y1=unit, y2=unit, sigma=st.floats(1e-3, 1), delta=st.floats(1e-3, 1),
       e1=st.floats(-0.1, 0.1), e2=st.floats(-0.1, 0.1))
def test_exposure_risk_matrix_is_a_covariance(y, y1, y2, sigma, delta, e1, e2):
    params = EconomyParams()
    w = compute_wealth_ratios(params, StateVector(y, y1, y2))
    for e in compute_exposure_ratios(w, PriceSystem(0.02 + e1, 0.02 + e2, 0.02, sigma, delta), params).__dict__.values():
        assert e.xi1 > 0 and e.xi2 > 0
        assert e.det_xi >= -1e-14 * e.xi1 * e.xi2
        assert all(v >= 0 for v in (e.alpha1, e.alpha2))


@settings(max_examples=300, deadline=None)
@given(n=st.floats(0, 1), p=st.floats(0, 1), q=st.floats(0, 1), k=st.floats(0.1, 50))
def test_diversion_feasible_and_monotone_in_protection(n, p, q, k):
    x = diversion_fraction(n, p, k)
    assert 0.0 <= x <= (1 - p) * n + 1e-15
    lo, hi = sorted((p, q))
    assert diversion_fraction(n, hi, k) <= diversion_fraction(n, lo, k) + 1e-15
    assert not math.isnan(x)
