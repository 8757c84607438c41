import functools

import pytest

from xsec.core import EconomyParams, StateVector
from xsec.equilibrium import FixedPointConfig, solve_equilibrium

GRID = [round(0.01 * i, 10) for i in range(1, 100)]


@functools.lru_cache(maxsize=None)
def table_sweep(p: float, warm: bool = True):
    """Equilibria on the default grid at y1 = y2 = 0.5, cached across tests."""
    params = EconomyParams(p=p)
    out, prev = [], None
    for y in GRID:
        sol = solve_equilibrium(params, StateVector(y, 0.5, 0.5), None, FixedPointConfig(),
                                warm_start=prev if warm else None)
        prev = getattr(sol, "holdingsC", None)
        out.append(sol)
    return tuple(out)


@pytest.fixture
def table1():
    return EconomyParams()


@pytest.fixture
def mid_state():
    return StateVector(0.5, 0.5, 0.5)
