"""Equilibrium prices, state dynamics and the region-wise fixed point.

Given the controlling shareholder's holdings, market clearing pins the
minority holdings and therefore, through the minority first-order
condition, the excess returns.  Volatilities depend on holdings only, and
the interest rate follows from goods-market clearing.  An equilibrium is a
holding vector reproduced by the controlling shareholder's optimal choice
under the prices it induces.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    BoundaryError, DomainError, EconomyParams, ExposureRatios, Exposures, GammaAggregates, PriceSystem,
    StateVector, WealthRatios, compute_gamma_aggregates, compute_wealth_ratios, diversion_fraction,
    diversion_fraction_firm1, exposure_for, gamma0,
)
from .kkt import (
    COND_TOL, REGION_BRANCHES, TIE_TOL, Protection, RegionId, Scheme, all_candidates, region_point,
    solve_minority,
)


@dataclass(frozen=True)
class StateDrifts:
    muY: float
    sigmaY: float
    deltaY: float
    mu1Y: float
    sigma1Y: float
    delta1Y: float
    mu2Y: float
    sigma2Y: float
    delta2Y: float


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 10000
    cond_tol: float = COND_TOL

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise DomainError("damping must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise DomainError("tol > 0 and max_iter >= 1 required")


@dataclass(frozen=True)
class RegionAttempt:
    region: int
    converged: bool
    iterations: int
    residual: float
    holdings: tuple[float, float] | None
    verified: bool
    reason: str = ""


@dataclass(frozen=True)
class EquilibriumSolution:
    region: RegionId
    holdingsC: tuple[float, float]
    holdingsM: tuple[float, float]
    xStar: float
    xPrimeStar: float
    prices: PriceSystem
    drifts: StateDrifts
    grossReturn1: float
    grossReturn2: float
    fixed_point_residual: float
    verified: bool
    objective: float = math.nan
    state: StateVector | None = None
    attempts: tuple[RegionAttempt, ...] = ()

    def to_dict(self) -> dict:
        out = {
            "equilibrium": True, "region": self.region.index,
            "degenerate_case": self.region.degenerate_case,
            "scheme": self.region.scheme.value,
            "n1C": self.holdingsC[0], "n2C": self.holdingsC[1],
            "n1M": self.holdingsM[0], "n2M": self.holdingsM[1],
            "xStar": self.xStar, "xPrimeStar": self.xPrimeStar,
            **asdict(self.prices), "sigma2": self.prices.sigma2_total,
            **asdict(self.drifts),
            "grossReturn1": self.grossReturn1, "grossReturn2": self.grossReturn2,
            "fixed_point_residual": self.fixed_point_residual, "verified": self.verified,
            "objective": self.objective,
        }
        if self.state is not None:
            out.update(y=self.state.y, y1=self.state.y1, y2=self.state.y2)
        if self.attempts:
            out["attempts"] = [asdict(a) for a in self.attempts]
        return out


@dataclass(frozen=True)
class NoEquilibrium:
    state: StateVector
    scheme: Scheme
    attempts: tuple[RegionAttempt, ...]

    @property
    def reason(self) -> str:
        return "; ".join(f"R{a.region}: {a.reason}" for a in self.attempts)

    def to_dict(self) -> dict:
        return {
            "equilibrium": False, "scheme": self.scheme.value,
            "y": self.state.y, "y1": self.state.y1, "y2": self.state.y2,
            "attempts": [asdict(a) for a in self.attempts],
        }


def scheme_for(params: EconomyParams, two_sided: bool = False) -> Scheme:
    """Pick the region family implied by the protection levels."""
    if two_sided or params.pPrime < 1:
        return Scheme.TWOSIDED16
    return Scheme.PERFECT9 if params.p >= 1 else Scheme.IMPERFECT12


# ---------------------------------------------------------------------------
# price map


@dataclass
class _Snapshot:
    x: float
    xp: float
    gam: GammaAggregates
    sigma: float
    delta: float
    excess1: float
    excess2: float
    r: float
    exp: Exposures

    @property
    def prices(self) -> PriceSystem:
        return PriceSystem(self.r + self.excess1, self.r + self.excess2, self.r, self.sigma, self.delta)


def _diversions(params: EconomyParams, n1, n2, scheme: Scheme):
    if scheme is Scheme.PERFECT9:
        return 0.0 * n2, 0.0 * n1
    if np.ndim(n2):
        x = np.clip(np.minimum((1.0 - n2) / params.k, (1.0 - params.p) * n2), 0.0, None)
    else:
        x = diversion_fraction(n2, params.p, params.k)
    if scheme is Scheme.IMPERFECT12:
        return x, 0.0 * n1
    if np.ndim(n1):
        s = n1 / params.tau
        return x, np.clip(np.minimum((1.0 - s) / params.kPrime, (1.0 - params.pPrime) * s), 0.0, None)
    return x, diversion_fraction_firm1(n1, params.pPrime, params.kPrime, params.tau)


def _volatilities(params: EconomyParams, state: StateVector, gam: GammaAggregates):
    if np.any(np.asarray(gam.gamma0) <= 0) or np.any(np.asarray(gam.gamma2) <= 0):
        raise DomainError("Gamma aggregates must be positive")
    y2 = state.y2
    sigma = params.sigmaD / (gam.gamma0 * (y2 * gam.gamma1 / params.tau + (1.0 - y2) * gam.gamma2))
    delta = (1.0 - state.y1) * params.deltaD / ((1.0 - y2) * gam.gamma0 * gam.gamma2)
    return sigma, delta


def interest_rate(params: EconomyParams, state: StateVector, gam: GammaAggregates,
                  excess1: float, excess2: float, x: float, xp: float) -> float:
    """Goods-market clearing rate given excess returns and diversion."""
    P = params
    y, y1, y2 = state.y, state.y1, state.y2
    rc, rm = P.rho_c, P.rho_m
    g0, g1, g2 = gam.gamma0, gam.gamma1, gam.gamma2
    return (
        y1 * P.mu1D + (1 - y1) * P.mu2D
        - y1 * (rc * P.l1C + rm * P.l1M) - (1 - y1) * (rc * P.l2C + rm * P.l2M)
        - g1 / P.tau * (y2 * g0 * excess1 + (1 - xp) * P.net1 * y1)
        - g2 * ((1 - y2) * g0 * excess2 + (1 - x) * P.net2 * (1 - y1))
        + rc * (1 - y) + rm * y
        - P.net1 * y1 * (rc * (xp - 0.5 * P.kPrime * xp * xp) + rm * 0.5 * P.kPrime * xp * xp)
        - P.net2 * (1 - y1) * (rc * (x - 0.5 * P.k * x * x) + rm * 0.5 * P.k * x * x)
    )


def _snapshot(params: EconomyParams, state: StateVector, wealth: WealthRatios,
              n1: float, n2: float, scheme: Scheme) -> _Snapshot:
    x, xp = _diversions(params, n1, n2, scheme)
    rm, rc = params.rho_m, params.rho_c
    gam = GammaAggregates(gamma0(params, state.y),
                          rm * (params.tau - n1) + rc * n1, rm * (1.0 - n2) + rc * n2)
    sigma, delta = _volatilities(params, state, gam)
    w, tau = wealth, params.tau
    # minority exposures do not depend on excess returns through xi and alpha
    m0 = exposure_for(params.gammaM, w.d1_over_xM, w.d2_over_xM, w.s1_over_xM, w.s2_over_xM,
                      0.0, 0.0, sigma, delta, tau)
    nm1, nm2 = tau - n1, 1.0 - n2
    excess1 = (m0.xi1 * nm1 + m0.xi0 * nm2 - (1 - xp) * m0.alpha1) / w.s1_over_xM
    excess2 = (m0.xi0 * nm1 + m0.xi2 * nm2 - (1 - x) * m0.alpha2) / w.s2_over_xM
    r = interest_rate(params, state, gam, excess1, excess2, x, xp)
    expC = exposure_for(params.gammaC, w.d1_over_xC, w.d2_over_xC, w.s1_over_xC, w.s2_over_xC,
                        excess1, excess2, sigma, delta, tau)
    expM = ExposureRatios(w.s1_over_xM * excess1, w.s2_over_xM * excess2,
                          m0.xi0, m0.xi1, m0.xi2, m0.alpha1, m0.alpha2)
    return _Snapshot(x, xp, gam, sigma, delta, excess1, excess2, r, Exposures(expC, expM))


def price_map(params: EconomyParams, state: StateVector, nC, scheme: Scheme | str) -> PriceSystem:
    scheme = Scheme.parse(scheme)
    n1, n2 = float(nC[0]), float(nC[1])
    compute_gamma_aggregates(params, state, n1, n2)  # range check
    return _snapshot(params, state, compute_wealth_ratios(params, state), n1, n2, scheme).prices


def state_drifts(params: EconomyParams, state: StateVector, nC, prices: PriceSystem,
                 xStar: float = 0.0, xPrimeStar: float = 0.0, scheme: Scheme | str | None = None) -> StateDrifts:
    """Drift and loadings of (y, y1, y2); valid on the closed interval y in [0, 1]."""
    n1, n2 = float(nC[0]), float(nC[1])
    compute_gamma_aggregates(params, state, n1, n2)  # range check
    return drift_terms(params, state.y, state.y1, state.y2, n1, n2, prices, xStar, xPrimeStar)


def drift_terms(params: EconomyParams, y, y1, y2, n1, n2, prices, x=0.0, xp=0.0) -> StateDrifts:
    """Unchecked body of ``state_drifts``; every argument may be an array."""
    P = params
    g0, rm = gamma0(P, y), P.rho_m
    e1, e2 = prices.mu1 - prices.r, prices.mu2 - prices.r
    sigma, delta = prices.sigma, prices.delta
    sigmaY = rm * g0 * ((P.tau - n1) * y2 / P.tau + (1 - n2) * (1 - y2)) * sigma - y * P.sigmaD
    deltaY = rm * g0 * (1 - n2) * (1 - y2) * delta - y * (1 - y1) * P.deltaD
    muY = (
        y * prices.r - y * y1 * P.mu1D - y * (1 - y1) * P.mu2D
        - sigmaY * P.sigmaD - (1 - y1) * P.deltaD * deltaY
        + rm * (P.l1M * y1 + P.l2M * (1 - y1) - y)
        + rm * (0.5 * P.kPrime * xp * xp * P.net1 * y1 + 0.5 * P.k * x * x * P.net2 * (1 - y1))
        + rm * (P.tau - n1) / P.tau * (y2 * g0 * e1 + (1 - xp) * P.net1 * y1)
        + rm * (1 - n2) * ((1 - y2) * g0 * e2 + (1 - x) * P.net2 * (1 - y1))
    )
    q1 = y1 * (1 - y1)
    q2 = y2 * (1 - y2)
    return StateDrifts(
        muY=muY, sigmaY=sigmaY, deltaY=deltaY,
        mu1Y=q1 * (P.mu1D - P.mu2D) + q1 * (1 - y1) * P.deltaD ** 2, sigma1Y=0.0 * q1, delta1Y=-q1 * P.deltaD,
        mu2Y=q2 * (prices.mu1 - prices.mu2) + q2 * (1 - y2) * delta ** 2, sigma2Y=0.0 * q2, delta2Y=-q2 * delta,
    )


def dividend_yields(params: EconomyParams, state: StateVector) -> tuple[float, float]:
    """D1/(tau S1) and D2/S2 before diversion."""
    g0 = gamma0(params, state.y)
    return params.net1 * state.y1 / (state.y2 * g0), params.net2 * (1 - state.y1) / ((1 - state.y2) * g0)


def gross_returns(prices: PriceSystem, xStar: float, params: EconomyParams, state: StateVector,
                  xPrimeStar: float = 0.0) -> tuple[float, float]:
    d1, d2 = dividend_yields(params, state)
    return prices.mu1 + (1 - xPrimeStar) * d1, prices.mu2 + (1 - xStar) * d2


# ---------------------------------------------------------------------------
# fixed point


def _free_mask(scheme: Scheme, index: int) -> tuple[bool, bool]:
    b1, b2 = REGION_BRANCHES[scheme][index]
    return b1 not in "LH", b2 not in "LH"


def _region_map(params, state, wealth, scheme, prot, index):
    def eta(n1, n2):
        # keep iterates where Gamma aggregates stay positive
        if not (-params.tau <= n1 <= 2 * params.tau and -1.0 <= n2 <= 2.0):
            return None
        snap = _snapshot(params, state, wealth, n1, n2, scheme)
        pt = region_point(snap.exp.C, scheme, index, prot)
        if pt is None or not (math.isfinite(pt[0]) and math.isfinite(pt[1])):
            return None
        return np.array(pt)
    return eta


def _iterate_region(params, state, wealth, scheme, prot, index, start, cfg):
    """Fixed point of one region's map ``eta``.

    Damped substitution n <- n + w (eta(n) - n) comes first.  The map's
    Jacobian is close to -c I with c = gammaM X_C / (gammaC X_M), so the
    damping is applied relative to 1 + c.  When the residual stalls (less
    than a tenfold drop over 25 steps) a Newton iteration on eta(n) - n
    takes over.
    """
    eta = _region_map(params, state, wealth, scheme, prot, index)
    free = np.array(_free_mask(scheme, index))
    n = np.array(start, dtype=float)
    c = params.gammaM * wealth.s1_over_xM / (params.gammaC * wealth.s1_over_xC)
    w = min(1.0, 2.0 * cfg.damping / (1.0 + c))
    checkpoint = math.inf
    res = math.inf
    best, best_res = n, math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        target = eta(*n)
        if target is None:
            break
        step = target - n
        res = float(np.max(np.abs(step)))
        if res < cfg.tol:
            return n, it, res, ""
        if res < best_res:
            best, best_res = n, res
        if not free.any():
            n = target
            continue
        if it % 25 == 0:
            if res > 0.1 * checkpoint:
                break
            checkpoint = res
        n = n + w * step
    else:
        return n, cfg.max_iter, res, f"no convergence in {cfg.max_iter} iterations"
    out = _newton(eta, free, best, it, cfg)
    if out[3] and best is not n:
        retry = _newton(eta, free, np.array(start, dtype=float), out[1], cfg)
        if not retry[3]:
            return retry
    return out


def _newton(eta, free, n, used, cfg, h=1e-7):
    def F(m):
        t = eta(*m)
        return None if t is None else (t - m)[free]

    f = F(n)
    if f is None:
        return n, used, math.nan, "iterate left the admissible range"
    it = used
    res = float(np.max(np.abs(f)))
    while it < cfg.max_iter:
        if res < cfg.tol:
            return n, it, res, ""
        J = np.empty((f.size, f.size))
        for j, col in enumerate(np.flatnonzero(free)):
            e = np.zeros(2)
            e[col] = h
            fp = F(n + e)
            if fp is None:
                e[col] = -h
                fp = F(n + e)
                if fp is None:
                    return n, it, res, "iterate left the admissible range"
            J[:, j] = (fp - f) / e[col]
        it += f.size
        try:
            d = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return n, it, res, "singular Newton step"
        if np.max(np.abs(d)) < cfg.tol:
            # holdings pinned to tol; take the last step when it still helps,
            # since a steep map leaves a residual of |J| times the step
            m = n.copy()
            m[free] += d
            fm = F(m)
            it += 1
            if fm is not None and np.max(np.abs(fm)) < res:
                n, res = m, float(np.max(np.abs(fm)))
            return n, it, res, ""
        t = 1.0
        while t > 1e-6:
            m = n.copy()
            m[free] += t * d
            fm = F(m)
            it += 1
            if fm is not None and np.max(np.abs(fm)) < res:
                n, f = m, fm
                res = float(np.max(np.abs(f)))
                break
            t *= 0.5
        else:
            return n, it, res, "no fixed point found (line search failed)"
    if res < cfg.tol:
        return n, it, res, ""
    return n, it, res, f"no convergence in {cfg.max_iter} iterations"


def _start_points(params, scheme, index, warm, share):
    """Warm start (if any), the risk-sharing guess, then points spread over
    each branch's own interval.

    A region map can have poles inside its branch interval, so one start is
    not always enough; the list is tried in order until one converges.
    ``share`` is c / (1 + c), the controlling share of aggregate risk
    tolerance.
    """
    b1, b2 = REGION_BRANCHES[scheme][index]
    kink1 = params.tau / (1 + (1 - params.pPrime) * params.kPrime)
    kink2 = 1.0 / (1 + (1 - params.p) * params.k)

    def spread(branch, cap, kink):
        lo, hi = {"L": (0.0, 0.0), "H": (cap, cap), "I": (0.0, cap), "B": (0.0, kink), "S": (kink, cap)}[branch]
        if hi <= lo:
            return [lo]
        guess = min(max(share * cap, lo), hi)
        return [guess] + [lo + q * (hi - lo) for q in (0.5, 0.9, 0.1)]

    pts = list(dict.fromkeys((a1, a2) for a1 in spread(b1, params.tau, kink1)
                             for a2 in spread(b2, 1.0, kink2)))
    if warm is not None:
        w = (pts[0][0] if b1 in "LH" else float(warm[0]), pts[0][1] if b2 in "LH" else float(warm[1]))
        pts = [w] + [q for q in pts if q != w]
    return pts


def _verify(params, state, wealth, scheme, prot, index, n, cfg):
    """Step 2-3: evaluate every region's candidate under the induced prices."""
    snap = _snapshot(params, state, wealth, n[0], n[1], scheme)
    cands = all_candidates(snap.exp.C, scheme, prot, cfg.cond_tol)
    own = cands[index - 1]
    valid = [c for c in cands if c.conditions_satisfied]
    if not own.conditions_satisfied:
        return snap, own, own.failed
    top = max(valid, key=lambda c: c.objective)
    if own.objective < top.objective - TIE_TOL * max(1.0, abs(top.objective)):
        return snap, own, f"dominated by region {top.region.index}"
    return snap, own, ""


def _search_region(params, state, wealth, scheme, prot, index, cfg, starts, exhaustive):
    used, last = 0, None
    for start in starts:
        n, it, res, why = _iterate_region(params, state, wealth, scheme, prot, index, start, cfg)
        used += it
        if why:
            last = last or (n, res, why, None, None)
            continue
        snap, own, why = _verify(params, state, wealth, scheme, prot, index, n, cfg)
        if not why:
            return used, (n, res, "", snap, own)
        if last is None or last[3] is None:
            last = (n, res, why, snap, own)
        if not exhaustive:
            break
    return used, last


def solve_equilibrium(params: EconomyParams, state: StateVector, scheme: Scheme | str | None = None,
                      config: FixedPointConfig | None = None, warm_start=None):
    """Equilibrium at one interior state, or ``NoEquilibrium``.

    Each region's fixed point is searched independently; a fixed point is
    an equilibrium when, under the prices it induces, its region's
    candidate is the best valid candidate of all regions.  Regions normally
    stop at their first convergent start; if nothing verifies, every start
    of every region is tried before giving up.
    """
    cfg = config or FixedPointConfig()
    scheme = scheme_for(params) if scheme is None else Scheme.parse(scheme)
    if not state.interior:
        raise BoundaryError("solve_equilibrium needs 0 < y < 1; use boundary_limits at the endpoints")
    wealth = compute_wealth_ratios(params, state)
    prot = Protection.from_params(params)
    c = params.gammaM * wealth.s1_over_xM / (params.gammaC * wealth.s1_over_xC)
    for exhaustive in (False, True):
        attempts, found = [], []
        for index in REGION_BRANCHES[scheme]:
            starts = _start_points(params, scheme, index, warm_start, c / (1 + c))
            it, (n, res, why, snap, own) = _search_region(
                params, state, wealth, scheme, prot, index, cfg, starts, exhaustive)
            converged = snap is not None
            attempts.append(RegionAttempt(index, converged, it, res, (float(n[0]), float(n[1])),
                                          converged and not why, why))
            if converged and not why:
                found.append((own.objective, index, n, res, snap, own))
        if found:
            break
    if not found:
        return NoEquilibrium(state, scheme, tuple(attempts))
    top = max(f[0] for f in found)
    obj, index, n, res, snap, own = min(
        (f for f in found if f[0] >= top - TIE_TOL * max(1.0, abs(top))), key=lambda f: f[1])
    return _build_solution(params, state, scheme, own.region, n, snap, res, obj, tuple(attempts))


def _build_solution(params, state, scheme, region, n, snap, res, obj, attempts) -> EquilibriumSolution:
    minority = solve_minority(snap.exp.M, snap.x, snap.xp)
    prices = snap.prices
    nC = (float(n[0]), float(n[1]))
    drifts = state_drifts(params, state, nC, prices, snap.x, snap.xp, scheme)
    g1, g2 = gross_returns(prices, snap.x, params, state, snap.xp)
    return EquilibriumSolution(
        region=region, holdingsC=nC, holdingsM=(minority.n1M, minority.n2M),
        xStar=snap.x, xPrimeStar=snap.xp, prices=prices, drifts=drifts,
        grossReturn1=g1, grossReturn2=g2, fixed_point_residual=res, verified=True,
        objective=obj, state=state, attempts=attempts,
    )


# ---------------------------------------------------------------------------
# boundaries

BOUNDARY_HINTS = (1, 5, 9, 10, 12, 13, 15)


def boundary_excess_at_zero(params: EconomyParams, y1: float, y2: float, region_hint: int) -> tuple[float, float]:
    """Limit of (mu1 - r, mu2 - r) as y -> 0 with holdings converging to (tau, 1)."""
    P = params
    rc = P.rho_c
    sigma = P.sigmaD
    delta = (1 - y1) * P.deltaD / (1 - y2)
    # controlling ratios at y = 0, where X_C = rho^(-1/gammaC)
    s1, s2 = y2 / P.tau, 1 - y2
    eC = exposure_for(P.gammaC, P.net1 * y1 * rc, P.net2 * (1 - y1) * rc, s1, s2, 0.0, 0.0, sigma, delta, P.tau)
    dy1, dy2 = P.net1 * y1 * rc / y2, P.net2 * (1 - y1) * rc / (1 - y2)
    lam_c1 = (P.tau * eC.xi1 + eC.xi0 - eC.alpha1) / s1
    lam_c2 = (P.tau * eC.xi0 + eC.xi2 - eC.alpha2) / s2
    if region_hint == 9:
        return -dy1, -dy2
    if region_hint in (1, 10, 13):
        return lam_c1, lam_c2
    if region_hint in (5, 15):
        return lam_c1, lam_c1 + dy1 - dy2
    if region_hint == 12:
        w = sigma ** 2 / (sigma ** 2 + delta ** 2)
        return w * (lam_c2 + dy2) - dy1, lam_c2
    raise DomainError(f"unsupported region hint {region_hint}; expected one of {BOUNDARY_HINTS}")


def default_region_hint(params: EconomyParams, y1: float, y2: float, scheme: Scheme | str | None = None,
                        y_small: float = 0.01) -> int:
    """Region of the equilibrium at the smallest interior grid point."""
    sol = solve_equilibrium(params, StateVector(y_small, y1, y2), scheme)
    if isinstance(sol, NoEquilibrium):
        raise DomainError(f"no equilibrium at y = {y_small} to infer the boundary region from")
    return sol.region.index


def boundary_limits(params: EconomyParams, y1: float, y2: float, at: int, scheme: Scheme | str | None = None,
                    region_hint: int | None = None) -> EquilibriumSolution:
    """Equilibrium quantities in the limits y -> 0 (``at=0``) and y -> 1 (``at=1``)."""
    P = params
    scheme = scheme_for(P) if scheme is None else Scheme.parse(scheme)
    if at not in (0, 1):
        raise DomainError("at must be 0 or 1")
    if at == 1:
        state = StateVector(1.0, y1, y2)
        nC, nM = (0.0, 0.0), (P.tau, 1.0)
        rm = P.rho_m
        s1, s2 = y2 / P.tau, 1 - y2
        sigma, delta = P.sigmaD, (1 - y1) * P.deltaD / (1 - y2)
        m = exposure_for(P.gammaM, P.net1 * y1 * rm, P.net2 * (1 - y1) * rm, s1, s2, 0.0, 0.0, sigma, delta, P.tau)
        e1 = (P.tau * m.xi1 + m.xi0 - m.alpha1) / s1
        e2 = (P.tau * m.xi0 + m.xi2 - m.alpha2) / s2
        labor = y1 * P.l1C + (1 - y1) * P.l2C
        r = y1 * P.mu1D + (1 - y1) * P.mu2D + (P.rho_m - P.rho_c) * labor - (y2 * e1 + (1 - y2) * e2)
        region = RegionId(scheme, 6)
    else:
        state = StateVector(0.0, y1, y2)
        nC, nM = (P.tau, 1.0), (0.0, 0.0)
        if region_hint is None:
            region_hint = default_region_hint(P, y1, y2, scheme)
        if region_hint not in BOUNDARY_HINTS or region_hint not in REGION_BRANCHES[scheme]:
            raise DomainError(f"unsupported region hint {region_hint} for {scheme.value}")
        e1, e2 = boundary_excess_at_zero(P, y1, y2, region_hint)
        sigma, delta = P.sigmaD, (1 - y1) * P.deltaD / (1 - y2)
        labor = y1 * P.l1M + (1 - y1) * P.l2M
        r = y1 * P.mu1D + (1 - y1) * P.mu2D - (P.rho_m - P.rho_c) * labor - (y2 * e1 + (1 - y2) * e2)
        region = RegionId(scheme, region_hint)
    prices = PriceSystem(r + e1, r + e2, r, sigma, delta)
    drifts = state_drifts(P, state, nC, prices, 0.0, 0.0, scheme)
    g1, g2 = gross_returns(prices, 0.0, P, state)
    return EquilibriumSolution(region, nC, nM, 0.0, 0.0, prices, drifts, g1, g2, 0.0, True, state=state)
