"""Short-run extinction conditions.

A shareholder is extinct in a firm when its equilibrium holding of that
firm is zero.  Each condition pins the controlling holding vector to a
face of the box, e.g. ``nC = (0, n)``, substitutes it into the price map,
and asks for a scalar ``n`` solving a one-dimensional equation plus some
side inequalities.  The conditions are sufficient only: a condition that
does not fire says nothing about survival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from .core import DomainError, EconomyParams, ExposureRatios, StateVector, compute_wealth_ratios
from .equilibrium import _snapshot
from .kkt import COND_TOL, Scheme

SCAN_POINTS = 512
ROOT_XTOL = 1e-13
NOTE = "sufficient conditions only; no firing does not imply survival"


class Shareholder(str, Enum):
    CONTROLLING = "Controlling"
    MINORITY = "Minority"


@dataclass(frozen=True)
class ExtinctionReport:
    shareholder: Shareholder
    firm: int
    condition_fired: str | None
    witness_n: float | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def fired(self) -> bool:
        return self.condition_fired is not None


@dataclass(frozen=True)
class _Condition:
    label: str
    pin: Callable[[float], tuple[float, float]]
    # scalar interval (lo, hi, lo_closed, hi_closed), or None for a fixed pin
    interval: tuple[float, float, bool, bool] | None
    target: Callable[[ExposureRatios], float] | None
    # each returns (lhs, rhs) for lhs < rhs; ``n`` is the pinned scalar
    strict: tuple[Callable[[ExposureRatios, float], tuple[float, float]], ...]
    needs_det: bool = False
    nonzero: Callable[[ExposureRatios], float] | None = None


def _conditions(params: EconomyParams, scheme: Scheme, shareholder: Shareholder, firm: int) -> list[_Condition]:
    tau, p, k = params.tau, params.p, params.k
    kink = 1.0 / (1.0 + (1.0 - p) * k)

    def at(n1, n2):
        return lambda n: (n1 if n1 is not None else n, n2 if n2 is not None else n)

    prem1 = lambda e: e.theta1 + e.alpha1
    prem2 = lambda e: e.theta2 + e.alpha2
    # protection-binding and cost-limited premia / risks for firm 2
    prem2b = lambda e: e.theta2 + (2 - p) * e.alpha2
    risk2b = lambda e: e.xi2 + (1 - p) * (2 + (1 - p) * k) * e.alpha2
    prem2s = lambda e: e.theta2 + (1 - 1 / k) * e.alpha2
    risk2s = lambda e: e.xi2 - e.alpha2 / k

    c_open2 = (0.0, 1.0, False, True)
    c_open1 = (0.0, tau, False, True)
    m_half2 = (0.0, 1.0, True, False)
    m_half1 = (0.0, tau, True, False)

    corner01 = (
        lambda e, n: (prem1(e), e.xi0),
        lambda e, n: (e.xi2, prem2(e)),
    )

    if scheme is Scheme.PERFECT9:
        corner_t0 = (
            lambda e, n: (prem2(e), tau * e.xi0),
            lambda e, n: (tau * e.xi1, prem1(e)),
        )
        table = {
            (Shareholder.CONTROLLING, 1): [
                _Condition("C'1", at(0.0, None), c_open2, lambda e: prem2(e) / e.xi2,
                           (lambda e, n: (prem1(e) / e.xi0, n),)),
                _Condition("C'2", at(0.0, 1.0), None, None, corner01),
            ],
            (Shareholder.CONTROLLING, 2): [
                _Condition("C'3", at(None, 0.0), c_open1, lambda e: prem1(e) / e.xi1,
                           (lambda e, n: (prem2(e) / e.xi0, n),)),
                _Condition("C'4", at(tau, 0.0), None, None, corner_t0),
            ],
            (Shareholder.MINORITY, 1): [
                _Condition("M'1", at(tau, None), m_half2, lambda e: (prem2(e) - tau * e.xi0) / e.xi2,
                           (lambda e, n: (n, (prem1(e) - tau * e.xi1) / e.xi0),)),
                _Condition("M'2", at(tau, 0.0), None, None, corner_t0),
            ],
            (Shareholder.MINORITY, 2): [
                _Condition("M'3", at(None, 1.0), m_half1, lambda e: (prem1(e) - e.xi0) / e.xi1,
                           (lambda e, n: (n, (prem2(e) - e.xi2) / e.xi0),)),
                _Condition("M'4", at(0.0, 1.0), None, None, corner01),
            ],
        }
        return table[(shareholder, firm)]

    corner_t0 = (
        lambda e, n: (prem2b(e), tau * e.xi0),
        lambda e, n: (tau * e.xi1, prem1(e)),
    )
    table = {
        (Shareholder.CONTROLLING, 1): [
            _Condition("C1", at(0.0, None), (0.0, kink, False, False), lambda e: prem2b(e) / risk2b(e),
                       (lambda e, n: (prem1(e) / e.xi0, n),), needs_det=True),
            _Condition("C2", at(0.0, 1.0), None, None, corner01, needs_det=True),
            _Condition("C3", at(0.0, None), (kink, 1.0, True, True), lambda e: prem2s(e) / risk2s(e),
                       (lambda e, n: (prem1(e) / e.xi0, n),), needs_det=True, nonzero=risk2s),
        ],
        (Shareholder.CONTROLLING, 2): [
            _Condition("C4", at(None, 0.0), c_open1, lambda e: prem1(e) / e.xi1,
                       (lambda e, n: (prem2b(e) / e.xi0, n),), needs_det=True),
            _Condition("C5", at(tau, 0.0), None, None, corner_t0, needs_det=True),
        ],
        (Shareholder.MINORITY, 1): [
            _Condition("M1", at(tau, None), (0.0, kink, True, False),
                       lambda e: (prem2b(e) - tau * e.xi0) / risk2b(e),
                       (lambda e, n: (n, (prem1(e) - tau * e.xi1) / e.xi0),), needs_det=True),
            _Condition("M2", at(tau, 0.0), None, None, corner_t0),
            _Condition("M3", at(tau, None), (kink, 1.0, True, False),
                       lambda e: (prem2s(e) - tau * e.xi0) / risk2s(e),
                       (lambda e, n: (n, (prem1(e) - tau * e.xi1) / e.xi0),), needs_det=True, nonzero=risk2s),
        ],
        (Shareholder.MINORITY, 2): [
            _Condition("M4", at(None, 1.0), m_half1, lambda e: (prem1(e) - e.xi0) / e.xi1,
                       (lambda e, n: (n, (prem2(e) - e.xi2) / e.xi0),), needs_det=True),
            _Condition("M5", at(0.0, 1.0), None, None, corner01, needs_det=True),
        ],
    }
    return table[(shareholder, firm)]


def _safe(f: Callable[[], float]) -> float:
    try:
        v = f()
    except ZeroDivisionError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def _inside(n: float, interval, tol: float) -> bool:
    lo, hi, lo_closed, hi_closed = interval
    ok_lo = n >= lo - tol if lo_closed else n > lo
    ok_hi = n <= hi + tol if hi_closed else n < hi
    return ok_lo and ok_hi


def _roots(F: Callable[[float], float], lo: float, hi: float, points: int) -> list[float]:
    """Sign changes of F on a uniform grid, refined by Brent's method.

    Sign changes across a pole are dropped by requiring a small residual
    at the refined point.
    """
    grid = np.linspace(lo, hi, points)
    vals = np.array([F(float(g)) for g in grid])
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if not (math.isfinite(fa) and math.isfinite(fb)):
            continue
        if fa == 0.0:
            out.append(float(a))
        elif fa * fb < 0:
            n = brentq(F, float(a), float(b), xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
            if abs(F(n)) < 1e-6:
                out.append(float(n))
    if vals[-1] == 0.0:
        out.append(float(grid[-1]))
    return out


def _evaluate(cond: _Condition, exposure_at, n: float, params: EconomyParams, det_needed: bool, tol: float):
    """Margins of every inequality at ``n``; a positive margin means it holds."""
    e = exposure_at(n)
    diag: dict = {}
    margins = []
    for j, ineq in enumerate(cond.strict):
        lhs, rhs = (_safe(lambda: ineq(e, n)[0]), _safe(lambda: ineq(e, n)[1]))
        margins.append(rhs - lhs)
        diag[f"ineq{j + 1}_margin"] = rhs - lhs
    if cond.nonzero is not None:
        nz = cond.nonzero(e)
        diag["nonzero_term"] = nz
        margins.append(1.0 if abs(nz) > tol else -1.0)
    if det_needed:
        m = e.det_xi - e.alpha2 * e.xi1 / params.k
        diag["det_margin"] = m
        margins.append(m)
    ok = all(math.isfinite(m) and m > -tol for m in margins)
    return ok, diag


def check_extinction(params: EconomyParams, state: StateVector, scheme: Scheme | str,
                     target: tuple[Shareholder | str, int], tol: float = COND_TOL,
                     scan_points: int = SCAN_POINTS) -> ExtinctionReport:
    """Test the extinction conditions for ``target = (shareholder, firm)``.

    ``scheme`` is ``Perfect`` (p = 1 formulas) or ``Imperfect`` (p < 1).
    Conditions are tried in their listed order and the first one that
    holds is reported, with the scalar ``n`` it was found at.
    """
    scheme = _parse_scheme(scheme)
    shareholder = Shareholder(target[0]) if not isinstance(target[0], Shareholder) else target[0]
    firm = int(target[1])
    if firm not in (1, 2):
        raise DomainError("firm must be 1 or 2")
    if not state.interior:
        raise DomainError("extinction is only defined for 0 < y < 1")
    wealth = compute_wealth_ratios(params, state)
    tried: dict = {"note": NOTE}
    for cond in _conditions(params, scheme, shareholder, firm):
        def exposure_at(n, cond=cond):
            n1, n2 = cond.pin(n)
            return _snapshot(params, state, wealth, n1, n2, scheme).exp.C

        if cond.interval is None:
            ok, diag = _evaluate(cond, exposure_at, math.nan, params, cond.needs_det, tol)
            tried[cond.label] = diag
            if ok:
                return ExtinctionReport(shareholder, firm, cond.label, None, {**tried, **diag})
            continue

        def F(n, cond=cond):
            return _safe(lambda: cond.target(exposure_at(n)) - n)

        lo, hi = cond.interval[:2]
        if hi <= lo:
            tried[cond.label] = {"skipped": "empty interval"}
            continue
        roots = [n for n in _roots(F, lo, hi, scan_points) if _inside(n, cond.interval, 0.0)]
        tried[cond.label] = {"roots": roots}
        for n in roots:
            ok, diag = _evaluate(cond, exposure_at, n, params, cond.needs_det, tol)
            if ok:
                diag["equation_residual"] = F(n)
                return ExtinctionReport(shareholder, firm, cond.label, n, {**tried, **diag})
    return ExtinctionReport(shareholder, firm, None, None, tried)


def _parse_scheme(scheme) -> Scheme:
    if isinstance(scheme, str) and scheme.lower() in ("perfect", "imperfect"):
        return Scheme.PERFECT9 if scheme.lower() == "perfect" else Scheme.IMPERFECT12
    s = Scheme.parse(scheme)
    if s is Scheme.TWOSIDED16:
        raise DomainError("extinction conditions are available for the Perfect and Imperfect schemes only")
    return s


TARGETS = (
    (Shareholder.CONTROLLING, 1), (Shareholder.CONTROLLING, 2),
    (Shareholder.MINORITY, 1), (Shareholder.MINORITY, 2),
)


def extinction_value(params: EconomyParams, shareholder: Shareholder, firm: int) -> tuple[int, float]:
    """(index into nC, value of nC there) when ``shareholder`` holds nothing of ``firm``."""
    cap = params.tau if firm == 1 else 1.0
    return firm - 1, (0.0 if shareholder is Shareholder.CONTROLLING else cap)


def extinction_map(params: EconomyParams, y_grid: Iterable[float], state_rest: tuple[float, float],
                   scheme: Scheme | str, targets=TARGETS) -> list[dict]:
    """One row per grid point (in grid order) with a report for each target."""
    y1, y2 = state_rest
    rows = []
    for y in y_grid:
        state = StateVector(float(y), y1, y2)
        rows.append({"y": float(y), "reports": [check_extinction(params, state, scheme, t) for t in targets]})
    return rows
