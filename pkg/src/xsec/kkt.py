"""Closed-form portfolio choice of the two shareholders.

The controlling shareholder maximises a concave-in-holdings quadratic
objective over the box [0, tau] x [0, 1], with output diversion chosen
optimally given the protection constraint.  Each KKT region is a pair of
per-firm *branches*:

    L  holding at zero            H  holding at its cap (tau or 1)
    I  interior, no diversion     B  interior, protection constraint binds
    S  interior, diversion limited by its cost (protection slack)

Every branch maps to an effective premium ``P`` and effective risk ``R``
for that firm, so one routine builds the candidate of any region in any
of the three schemes.  Multipliers follow the Lagrangian ordering of each
scheme and are recovered from the stationarity equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ExposureRatios

COND_TOL = 1e-9
DET_TOL = 1e-12
TIE_TOL = 1e-12


class Scheme(str, Enum):
    PERFECT9 = "Perfect9"
    IMPERFECT12 = "Imperfect12"
    TWOSIDED16 = "TwoSided16"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        for s in cls:
            if s.value.lower() == str(value).lower():
                return s
        raise ValueError(f"unknown scheme {value!r}")


_BASE = {
    1: ("I", "I"), 2: ("L", "I"), 3: ("H", "I"), 4: ("I", "L"), 5: ("I", "H"),
    6: ("L", "L"), 7: ("L", "H"), 8: ("H", "L"), 9: ("H", "H"),
}

REGION_BRANCHES: dict[Scheme, dict[int, tuple[str, str]]] = {
    Scheme.PERFECT9: dict(_BASE),
    Scheme.IMPERFECT12: {
        **_BASE, 1: ("I", "B"), 2: ("L", "B"), 3: ("H", "B"),
        10: ("I", "S"), 11: ("L", "S"), 12: ("H", "S"),
    },
    Scheme.TWOSIDED16: {
        **_BASE, 1: ("B", "B"), 2: ("L", "B"), 3: ("H", "B"), 4: ("B", "L"), 5: ("B", "H"),
        10: ("B", "S"), 11: ("L", "S"), 12: ("H", "S"),
        13: ("S", "S"), 14: ("S", "B"), 15: ("S", "H"), 16: ("S", "L"),
    },
}


@dataclass(frozen=True)
class RegionId:
    scheme: Scheme
    index: int
    degenerate_case: bool = False

    def __post_init__(self):
        branches = REGION_BRANCHES[self.scheme].get(self.index)
        if branches is None:
            raise ValueError(f"{self.scheme.value} has no region {self.index}")
        if self.degenerate_case and "S" not in branches:
            raise ValueError(f"region {self.index} of {self.scheme.value} has no degenerate case")

    def __str__(self):
        return f"{self.index}{'*' if self.degenerate_case else ''}"


@dataclass(frozen=True)
class Protection:
    """Protection levels, stealing costs and the supply of stock 1."""

    p: float = 1.0
    k: float = 6.0
    pPrime: float = 1.0
    kPrime: float = 6.0
    tau: float = 1.0

    @classmethod
    def from_params(cls, params) -> "Protection":
        return cls(params.p, params.k, params.pPrime, params.kPrime, params.tau)


@dataclass(frozen=True)
class CandidateSolution:
    region: RegionId
    n1C: float
    n2C: float
    xStar: float
    xPrimeStar: float
    objective: float
    multipliers: tuple[float, ...]
    conditions_satisfied: bool
    failed: str = ""

    @property
    def holdings(self) -> np.ndarray:
        return np.array([self.n1C, self.n2C])


@dataclass(frozen=True)
class MinoritySolution:
    n1M: float
    n2M: float


class NoCandidateError(RuntimeError):
    """No region's conditions hold; indicates numerical breakdown."""


class SingularRiskError(np.linalg.LinAlgError):
    pass


# ---------------------------------------------------------------------------
# objective


def controlling_objective(e: ExposureRatios, n1, n2, x=0.0, x_prime=0.0, k=1.0, k_prime=1.0, tau=1.0):
    """J_C (or its two-sided extension) at holdings ``(n1, n2)``; vectorises."""
    quad = 0.5 * (e.xi1 * n1 * n1 + 2.0 * e.xi0 * n1 * n2 + e.xi2 * n2 * n2)
    firm1 = n1 * (1.0 - x_prime) * e.alpha1 + tau * (x_prime - 0.5 * k_prime * x_prime * x_prime) * e.alpha1
    firm2 = n2 * (1.0 - x) * e.alpha2 + (x - 0.5 * k * x * x) * e.alpha2
    return e.theta1 * n1 + e.theta2 * n2 - quad + firm1 + firm2


# ---------------------------------------------------------------------------
# per-firm legs


@dataclass(frozen=True)
class _Leg:
    theta: float
    alpha: float
    xi: float
    cap: float
    p: float
    k: float
    diverting: bool

    @property
    def kink(self) -> float:
        return self.cap / (1.0 + (1.0 - self.p) * self.k)

    def premium_risk(self, branch: str) -> tuple[float, float, float]:
        """Effective (premium, risk, risk scale) of a free branch."""
        if branch == "I":
            return self.theta + self.alpha, self.xi, abs(self.xi)
        q = 1.0 - self.p
        if branch == "B":
            adj = q * (2.0 + self.k * q) * self.alpha / self.cap
            return self.theta + (1.0 + q) * self.alpha, self.xi + adj, abs(self.xi) + abs(adj)
        adj = self.alpha / (self.k * self.cap)
        return self.theta + (1.0 - 1.0 / self.k) * self.alpha, self.xi - adj, abs(self.xi) + abs(adj)

    def diversion(self, branch: str, n: float) -> float:
        if branch == "B":
            return (1.0 - self.p) * n / self.cap
        if branch == "S":
            return (1.0 - n / self.cap) / self.k
        return 0.0

    def multipliers(self, branch: str, n: float, grad: float, x: float) -> tuple[float, ...]:
        """(low, high) for a plain firm; (x-low, x-up, high) for a diverting one."""
        zero = self.theta + self.alpha
        if not self.diverting:
            if branch == "L":
                return (grad - zero, 0.0)
            if branch == "H":
                return (0.0, zero - grad)
            return (0.0, 0.0)
        if branch == "L":
            up = self.cap * (grad - zero) / max(1.0 - self.p, 1e-300)
            return (up - self.cap * self.alpha, up, 0.0)
        if branch == "H":
            return (0.0, 0.0, zero - grad)
        if branch == "B":
            return (0.0, self.alpha * (self.cap * (1.0 - self.k * x) - n), 0.0)
        return (0.0, 0.0, 0.0)

    def check(self, branch: str, n: float, lam: tuple[float, ...], tol: float) -> str:
        """Empty string if the branch conditions hold, else a short reason."""
        if any(v < -tol for v in lam):
            return "negative multiplier"
        if branch in ("I", "B") and not (-tol <= n <= self.cap + tol):
            return "holding outside box"
        if branch == "S" and not (self.kink - tol <= n <= self.cap + tol):
            return "below diversion kink" if n < self.kink else "holding outside box"
        return ""


def _legs(e: ExposureRatios, scheme: Scheme, prot: Protection) -> tuple[_Leg, _Leg]:
    two = scheme is Scheme.TWOSIDED16
    one = scheme is not Scheme.PERFECT9
    leg1 = _Leg(e.theta1, e.alpha1, e.xi1, prot.tau, prot.pPrime if two else 1.0, prot.kPrime, two)
    leg2 = _Leg(e.theta2, e.alpha2, e.xi2, 1.0, prot.p if one else 1.0, prot.k, one)
    return leg1, leg2


def _assemble(scheme: Scheme, lam1: tuple, lam2: tuple) -> tuple[float, ...]:
    if scheme is Scheme.PERFECT9:
        return (*lam1, *lam2)
    if scheme is Scheme.IMPERFECT12:
        return (lam2[0], lam2[1], lam1[0], lam1[1], lam2[2])
    return (lam1[0], lam1[1], lam2[0], lam2[1], lam1[2], lam2[2])


# ---------------------------------------------------------------------------
# candidates


def _evaluate(e, scheme, prot, index, branches, legs, n1, n2, degenerate, tol) -> CandidateSolution:
    (b1, b2), (leg1, leg2) = branches, legs
    x1 = leg1.diversion(b1, n1)
    x2 = leg2.diversion(b2, n2)
    g1 = e.xi1 * n1 + e.xi0 * n2
    g2 = e.xi0 * n1 + e.xi2 * n2
    lam1 = leg1.multipliers(b1, n1, g1, x1)
    lam2 = leg2.multipliers(b2, n2, g2, x2)
    why1, why2 = leg1.check(b1, n1, lam1, tol), leg2.check(b2, n2, lam2, tol)
    failed = f"firm 1: {why1}" if why1 else f"firm 2: {why2}" if why2 else ""
    obj = controlling_objective(e, n1, n2, x2, x1, prot.k, prot.kPrime, prot.tau)
    return CandidateSolution(
        region=RegionId(scheme, index, degenerate),
        n1C=float(n1), n2C=float(n2), xStar=float(x2), xPrimeStar=float(x1),
        objective=float(obj), multipliers=_assemble(scheme, lam1, lam2),
        conditions_satisfied=not failed, failed=failed,
    )


def _fixed_value(branch: str, cap: float):
    return 0.0 if branch == "L" else cap if branch == "H" else None


def region_point(e: ExposureRatios, scheme: Scheme, index: int, prot: Protection) -> tuple[float, float] | None:
    """Closed-form holdings of one region, ignoring its conditions.

    Returns None when the region's linear system is singular.
    """
    b1, b2 = REGION_BRANCHES[scheme][index]
    leg1, leg2 = _legs(e, scheme, prot)
    f1, f2 = _fixed_value(b1, leg1.cap), _fixed_value(b2, leg2.cap)
    if f1 is not None and f2 is not None:
        return f1, f2
    if f1 is not None:
        P, R, sc = leg2.premium_risk(b2)
        if abs(R) <= DET_TOL * sc:
            return None
        return f1, (P - e.xi0 * f1) / R
    if f2 is not None:
        P, R, sc = leg1.premium_risk(b1)
        if abs(R) <= DET_TOL * sc:
            return None
        return (P - e.xi0 * f2) / R, f2
    P1, R1, sc1 = leg1.premium_risk(b1)
    P2, R2, sc2 = leg2.premium_risk(b2)
    det = R1 * R2 - e.xi0 * e.xi0
    if abs(det) <= DET_TOL * (sc1 * sc2 + e.xi0 * e.xi0):
        return None
    return (R2 * P1 - e.xi0 * P2) / det, (R1 * P2 - e.xi0 * P1) / det


def _degenerate(e, scheme, prot, index, branches, legs, tol) -> CandidateSolution | None:
    """Singular region: the solution set is a segment; return a point of it.

    The objective is constant on that segment, so any feasible point is an
    equally good candidate.  We take the middle of its feasible part.
    """
    (b1, b2), (leg1, leg2) = branches, legs
    f1, f2 = _fixed_value(b1, leg1.cap), _fixed_value(b2, leg2.cap)
    if f1 is not None or f2 is not None:
        j = 1 if f1 is not None else 0
        fixed = f1 if f1 is not None else f2
        P, R, sc = (leg2 if j == 1 else leg1).premium_risk(b2 if j == 1 else b1)
        rhs = P - e.xi0 * fixed
        if abs(rhs) > tol * max(1.0, abs(P)):
            return None
        cap = (leg2 if j == 1 else leg1).cap
        ts = np.linspace(0.0, cap, 257)
        pts = [(fixed, t) if j == 1 else (t, fixed) for t in ts]
    else:
        P1, R1, _ = leg1.premium_risk(b1)
        P2, R2, _ = leg2.premium_risk(b2)
        rows = [(R1, e.xi0, P1), (e.xi0, R2, P2)]
        a, b, c = max(rows, key=lambda r: math.hypot(r[0], r[1]))
        if math.hypot(a, b) == 0.0:
            return None
        # the augmented system must have rank one as well
        (a0, b0, c0), (a1, b1_, c1) = rows
        size = max(abs(a0), abs(b0), abs(a1), abs(b1_)) * max(1.0, abs(c0), abs(c1))
        if max(abs(a0 * c1 - a1 * c0), abs(b0 * c1 - b1_ * c0)) > tol * size:
            return None
        # parametrise a*n1 + b*n2 = c
        if abs(b) >= abs(a):
            ts = np.linspace(0.0, leg1.cap, 257)
            pts = [(t, (c - a * t) / b) for t in ts]
        else:
            ts = np.linspace(0.0, leg2.cap, 257)
            pts = [((c - b * t) / a, t) for t in ts]
    ok = [pt for pt in pts if _evaluate(e, scheme, prot, index, branches, legs, *pt, True, tol).conditions_satisfied]
    if not ok:
        return None
    mid = ((ok[0][0] + ok[-1][0]) / 2.0, (ok[0][1] + ok[-1][1]) / 2.0)
    cand = _evaluate(e, scheme, prot, index, branches, legs, *mid, True, tol)
    if not cand.conditions_satisfied:
        cand = _evaluate(e, scheme, prot, index, branches, legs, *ok[0], True, tol)
    return cand


def region_candidate(e: ExposureRatios, scheme: Scheme, index: int, prot: Protection,
                     tol: float = COND_TOL) -> CandidateSolution:
    branches = REGION_BRANCHES[scheme][index]
    legs = _legs(e, scheme, prot)
    pt = region_point(e, scheme, index, prot)
    if pt is None:
        cand = _degenerate(e, scheme, prot, index, branches, legs, tol) if "S" in branches else None
        if cand is not None:
            return cand
        return CandidateSolution(RegionId(scheme, index), math.nan, math.nan, math.nan, math.nan,
                                 -math.inf, (), False, "singular system")
    return _evaluate(e, scheme, prot, index, branches, legs, pt[0], pt[1], False, tol)


def all_candidates(e: ExposureRatios, scheme: Scheme, prot: Protection, tol: float = COND_TOL) -> list[CandidateSolution]:
    return [region_candidate(e, scheme, v, prot, tol) for v in REGION_BRANCHES[scheme]]


def best_candidate(cands: list[CandidateSolution]) -> CandidateSolution:
    valid = [c for c in cands if c.conditions_satisfied]
    if not valid:
        raise NoCandidateError("no KKT candidate satisfies its region conditions")
    top = max(c.objective for c in valid)
    return min((c for c in valid if c.objective >= top - TIE_TOL * max(1.0, abs(top))),
               key=lambda c: c.region.index)


def solve_controlling(e: ExposureRatios, scheme: Scheme, prot: Protection, tol: float = COND_TOL) -> CandidateSolution:
    return best_candidate(all_candidates(e, Scheme.parse(scheme), prot, tol))


def solve_controlling_perfect(exposure: ExposureRatios, tau: float = 1.0) -> CandidateSolution:
    return solve_controlling(exposure, Scheme.PERFECT9, Protection(tau=tau))


def solve_controlling_imperfect(exposure: ExposureRatios, p: float, k: float, tau: float = 1.0) -> CandidateSolution:
    return solve_controlling(exposure, Scheme.IMPERFECT12, Protection(p=p, k=k, tau=tau))


def solve_controlling_two_sided(exposure: ExposureRatios, p: float, pPrime: float, k: float, kPrime: float,
                                tau: float = 1.0) -> CandidateSolution:
    return solve_controlling(exposure, Scheme.TWOSIDED16, Protection(p, k, pPrime, kPrime, tau))


def solve_minority(exposure: ExposureRatios, xStar: float = 0.0, xPrimeStar: float = 0.0) -> MinoritySolution:
    e = exposure
    det = e.det_xi
    if not (e.xi1 > 0 and det > DET_TOL * e.xi1 * e.xi2):
        raise SingularRiskError("minority risk matrix is not positive definite")
    b1 = e.theta1 + (1.0 - xPrimeStar) * e.alpha1
    b2 = e.theta2 + (1.0 - xStar) * e.alpha2
    return MinoritySolution((e.xi2 * b1 - e.xi0 * b2) / det, (e.xi1 * b2 - e.xi0 * b1) / det)


# ---------------------------------------------------------------------------
# KKT diagnostics


def kkt_residuals(c: CandidateSolution, e: ExposureRatios, prot: Protection) -> dict[str, np.ndarray]:
    """Stationarity, complementary slackness and constraint values of a candidate.

    Works directly from the Lagrangian of the minimisation of ``-J``; it does
    not reuse the branch construction above.
    """
    s = c.region.scheme
    n1, n2, x, xp = c.n1C, c.n2C, c.xStar, c.xPrimeStar
    lam = np.asarray(c.multipliers)
    tau, p, k, pp, kp = prot.tau, prot.p, prot.k, prot.pPrime, prot.kPrime
    g1 = -e.theta1 + e.xi1 * n1 + e.xi0 * n2
    g2 = -e.theta2 + e.xi0 * n1 + e.xi2 * n2
    if s is Scheme.PERFECT9:
        cons = np.array([-n1, n1 - tau, -n2, n2 - 1.0])
        stat = np.array([g1 - e.alpha1 - lam[0] + lam[1], g2 - e.alpha2 - lam[2] + lam[3]])
    elif s is Scheme.IMPERFECT12:
        cons = np.array([-x, x - (1 - p) * n2, -n1, n1 - tau, n2 - 1.0])
        stat = np.array([
            -(1 - n2 - k * x) * e.alpha2 - lam[0] + lam[1],
            g1 - e.alpha1 - lam[2] + lam[3],
            g2 - (1 - x) * e.alpha2 - lam[1] * (1 - p) + lam[4],
        ])
    else:
        cons = np.array([-xp, xp - (1 - pp) * n1 / tau, -x, x - (1 - p) * n2, n1 - tau, n2 - 1.0])
        stat = np.array([
            -(tau * (1 - kp * xp) - n1) * e.alpha1 - lam[0] + lam[1],
            -(1 - n2 - k * x) * e.alpha2 - lam[2] + lam[3],
            g1 - (1 - xp) * e.alpha1 - lam[1] * (1 - pp) / tau + lam[4],
            g2 - (1 - x) * e.alpha2 - lam[3] * (1 - p) + lam[5],
        ])
    return {"stationarity": stat, "slackness": lam * cons, "constraints": cons}
