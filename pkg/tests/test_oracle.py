import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xsec.core import ExposureRatios
from xsec.kkt import Protection, Scheme, solve_controlling
from xsec.oracle import brute_force_oracle, oracle_check, random_instance


def test_separable_toy_returns_the_vertex():
    e = ExposureRatios(2.0, 3.0, 0.0, 1.0, 1.0, 0.0, 0.0)
    o = brute_force_oracle(e, Scheme.PERFECT9, Protection(tau=1.5))
    assert (o.n1C, o.n2C) == (1.5, 1.0)
    assert o.objective == pytest.approx(2.0 * 1.5 + 3.0 - 0.5 * (1.5 ** 2 + 1.0), abs=1e-15)


def test_negative_premia_return_origin():
    e = ExposureRatios(-0.3, -0.2, 0.05, 0.5, 0.5, 0.01, 0.02)
    o = brute_force_oracle(e, Scheme.IMPERFECT12, Protection(p=0.5, k=4.0))
    assert (o.n1C, o.n2C) == (0.0, 0.0)


def test_grid_size_floor():
    e = ExposureRatios(0.1, 0.1, 0.0, 1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        brute_force_oracle(e, Scheme.PERFECT9, Protection(), grid_n=50)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scheme=st.sampled_from(list(Scheme)))
def test_two_grid_resolutions_agree(seed, scheme):
    inst = random_instance(np.random.default_rng(seed), scheme)
    a = brute_force_oracle(inst.exposure, scheme, inst.prot, grid_n=100)
    b = brute_force_oracle(inst.exposure, scheme, inst.prot, grid_n=257)
    assert a.objective == pytest.approx(b.objective, abs=1e-9)
    assert np.hypot(a.n1C - b.n1C, a.n2C - b.n2C) < 1e-4


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scheme=st.sampled_from(list(Scheme)))
def test_closed_form_dominates_oracle(seed, scheme):
    inst = random_instance(np.random.default_rng(seed), scheme)
    c = solve_controlling(inst.exposure, scheme, inst.prot)
    o = brute_force_oracle(inst.exposure, scheme, inst.prot)
    assert c.objective >= o.objective - 1e-6


def test_random_instances_meet_uniqueness_conditions():
    rng = np.random.default_rng(3)
    for scheme in Scheme:
        for _ in range(50):
            e = random_instance(rng, scheme).exposure
            assert e.xi1 > 0 and e.det_xi > 0


def test_report_is_deterministic():
    a = oracle_check(Scheme.IMPERFECT12, instances=10, seed=11).to_dict()
    b = oracle_check(Scheme.IMPERFECT12, instances=10, seed=11).to_dict()
    a.pop("seconds"), b.pop("seconds")
    assert a == b
