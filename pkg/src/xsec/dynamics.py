"""Euler-Maruyama simulation of the state variables ``(y, y1, y2)``.

Coefficients are recomputed from the equilibrium at every step.  All paths
advance together: each path remembers its current region, and the fixed
point of that region is re-solved for the whole batch at once by a
vectorised Newton iteration.  A path whose region no longer verifies (its
candidate fails its own conditions, or the problem is not strictly
concave) is handed to the scalar solver, which searches every region.
For a strictly concave controlling problem the KKT conditions are
sufficient, so the batch check accepts exactly the equilibria the scalar
solver would.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Callable

import numpy as np

from .core import DomainError, EconomyParams, StateVector, wealth_ratios_unchecked
from .equilibrium import (
    FixedPointConfig, NoEquilibrium, StateDrifts, _snapshot, drift_terms, scheme_for,
    solve_equilibrium,
)
from .kkt import COND_TOL, REGION_BRANCHES, Protection, Scheme, _legs

RNG_ALGORITHM = "numpy.random.PCG64"

CoefficientFn = Callable[[np.ndarray, np.ndarray, np.ndarray], StateDrifts]


@dataclass(frozen=True)
class PathConfig:
    horizon: float
    dt: float
    n_paths: int
    seed: int
    initial: StateVector
    y_floor: float = 1e-6
    zero_noise: bool = False

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise DomainError("dt and horizon must be positive")
        if not 0 < self.y_floor < 1e-3:
            raise DomainError("y_floor must lie in (0, 1e-3)")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if not self.initial.interior:
            raise DomainError("initial y must be interior")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class PathSample:
    times: np.ndarray
    y: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    regions: np.ndarray  # region index per step; 0 marks a carried-forward step
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# batched equilibrium


def _batch_state(y, y1, y2):
    return SimpleNamespace(y=y, y1=y1, y2=y2)


def _region_point_vec(e, legs, branches):
    """Closed-form holdings of one region for a batch; NaN where singular."""
    (b1, b2), (leg1, leg2) = branches, legs
    f1 = 0.0 if b1 == "L" else leg1.cap if b1 == "H" else None
    f2 = 0.0 if b2 == "L" else leg2.cap if b2 == "H" else None
    ones = np.ones_like(e.xi0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if f1 is not None and f2 is not None:
            return f1 * ones, f2 * ones
        if f1 is not None:
            P, R, _ = leg2.premium_risk(b2)
            return f1 * ones, (P - e.xi0 * f1) / R
        if f2 is not None:
            P, R, _ = leg1.premium_risk(b1)
            return (P - e.xi0 * f2) / R, f2 * ones
        P1, R1, _ = leg1.premium_risk(b1)
        P2, R2, _ = leg2.premium_risk(b2)
        det = R1 * R2 - e.xi0 * e.xi0
        return (R2 * P1 - e.xi0 * P2) / det, (R1 * P2 - e.xi0 * P1) / det


def _branch_ok(leg, branch, n, lam, tol):
    ok = np.ones_like(n, dtype=bool)
    for v in lam:
        ok &= np.asarray(v) >= -tol
    if branch in ("I", "B"):
        ok &= (n >= -tol) & (n <= leg.cap + tol)
    elif branch == "S":
        ok &= (n >= leg.kink - tol) & (n <= leg.cap + tol)
    return ok


def _concave(e, scheme: Scheme, prot: Protection):
    """Strict concavity of the controlling problem, elementwise."""
    r1, r2 = e.xi1, e.xi2
    if scheme is Scheme.TWOSIDED16:
        r1 = r1 - e.alpha1 / (prot.kPrime * prot.tau)
        r2 = r2 - e.alpha2 / prot.k
    ok = (e.xi1 > 0) & (e.xi1 * e.xi2 - e.xi0 ** 2 > 0) & (r1 > 0) & (r1 * r2 - e.xi0 ** 2 > 0)
    if scheme is Scheme.IMPERFECT12:
        ok &= e.xi1 * e.xi2 - e.xi0 ** 2 > e.alpha2 * e.xi1 / prot.k
    return ok


class _Batch:
    """Vectorised single-region fixed point and verification."""

    def __init__(self, params: EconomyParams, scheme: Scheme, tol: float = 1e-12, max_iter: int = 50):
        self.P, self.scheme, self.tol, self.max_iter = params, scheme, tol, max_iter
        self.prot = Protection.from_params(params)

    def snapshot(self, y, y1, y2, n1, n2):
        w = wealth_ratios_unchecked(self.P, y, y1, y2)
        return _snapshot(self.P, _batch_state(y, y1, y2), w, n1, n2, self.scheme)

    def eta(self, y, y1, y2, n1, n2, index):
        snap = self.snapshot(y, y1, y2, n1, n2)
        legs = _legs(snap.exp.C, self.scheme, self.prot)
        return _region_point_vec(snap.exp.C, legs, REGION_BRANCHES[self.scheme][index])

    def solve(self, y, y1, y2, n1, n2, index):
        """Newton on eta(n) - n from the warm start (n1, n2)."""
        b1, b2 = REGION_BRANCHES[self.scheme][index]
        free1, free2 = b1 not in "LH", b2 not in "LH"
        t1, t2 = self.eta(y, y1, y2, n1, n2, index)
        if not (free1 or free2):
            return t1, t2, np.isfinite(t1) & np.isfinite(t2)
        n1, n2 = n1.copy(), n2.copy()
        if not free1:
            n1 = t1
        if not free2:
            n2 = t2
        h = 1e-7
        done = np.zeros(n1.shape, dtype=bool)
        for _ in range(self.max_iter):
            a1, a2 = self.eta(y, y1, y2, n1, n2, index)
            f1, f2 = a1 - n1, a2 - n2
            res = np.maximum(np.abs(f1) if free1 else 0.0, np.abs(f2) if free2 else 0.0)
            done |= np.isfinite(res) & (res < self.tol)
            if done.all():
                break
            if free1 and free2:
                b11, b12 = self.eta(y, y1, y2, n1 + h, n2, index)
                b21, b22 = self.eta(y, y1, y2, n1, n2 + h, index)
                j11, j21 = (b11 - n1 - h - f1) / h, (b12 - n2 - f2) / h
                j12, j22 = (b21 - n1 - f1) / h, (b22 - n2 - h - f2) / h
                det = j11 * j22 - j12 * j21
                d1 = (-f1 * j22 + f2 * j12) / det
                d2 = (-f2 * j11 + f1 * j21) / det
            elif free1:
                b11, _ = self.eta(y, y1, y2, n1 + h, n2, index)
                d1, d2 = -f1 / ((b11 - n1 - h - f1) / h), 0.0 * f2
            else:
                _, b22 = self.eta(y, y1, y2, n1, n2 + h, index)
                d1, d2 = 0.0 * f1, -f2 / ((b22 - n2 - h - f2) / h)
            step_small = np.maximum(np.abs(d1), np.abs(d2)) < self.tol
            done |= step_small & np.isfinite(res)
            n1 = np.where(done, n1, n1 + d1)
            n2 = np.where(done, n2, n2 + d2)
            # keep Gamma aggregates positive for the next evaluation
            bad = ~np.isfinite(n1) | ~np.isfinite(n2) | (n1 < -self.P.tau) | (n1 > 2 * self.P.tau) | (n2 < -1) | (n2 > 2)
            if bad.any():
                n1 = np.where(bad, 0.5 * self.P.tau, n1)
                n2 = np.where(bad, 0.5, n2)
        return n1, n2, done

    def verify(self, y, y1, y2, n1, n2, index, tol=COND_TOL):
        snap = self.snapshot(y, y1, y2, n1, n2)
        e = snap.exp.C
        branches = REGION_BRANCHES[self.scheme][index]
        leg1, leg2 = _legs(e, self.scheme, self.prot)
        x1 = leg1.diversion(branches[0], n1)
        x2 = leg2.diversion(branches[1], n2)
        g1 = e.xi1 * n1 + e.xi0 * n2
        g2 = e.xi0 * n1 + e.xi2 * n2
        ok = _branch_ok(leg1, branches[0], n1, leg1.multipliers(branches[0], n1, g1, x1), tol)
        ok &= _branch_ok(leg2, branches[1], n2, leg2.multipliers(branches[1], n2, g2, x2), tol)
        ok &= _concave(e, self.scheme, self.prot)
        return ok, snap


# ---------------------------------------------------------------------------
# simulation


def simulate_paths(params: EconomyParams, scheme: Scheme | str | None, config: PathConfig,
                   coefficients: CoefficientFn | None = None,
                   fp_config: FixedPointConfig | None = None) -> list[PathSample]:
    """Simulate ``config.n_paths`` paths; deterministic given ``config.seed``.

    ``coefficients`` replaces the equilibrium with a user function of
    ``(y, y1, y2)`` arrays returning ``StateDrifts`` of arrays.
    """
    scheme = scheme_for(params) if scheme is None else Scheme.parse(scheme)
    n, steps, dt, eps = config.n_paths, config.n_steps, config.dt, config.y_floor
    rng = np.random.Generator(np.random.PCG64(config.seed))
    s0 = config.initial
    y = np.full(n, s0.y)
    y1 = np.full(n, s0.y1)
    y2 = np.full(n, s0.y2)
    Y = np.empty((steps + 1, n))
    Y1 = np.empty((steps + 1, n))
    Y2 = np.empty((steps + 1, n))
    R = np.zeros((steps, n), dtype=np.int16)
    Y[0], Y1[0], Y2[0] = y, y1, y2
    clamps = np.zeros(n, dtype=np.int64)
    floor_hits = np.zeros(n, dtype=np.int64)
    carried = np.zeros(n, dtype=np.int64)
    fallbacks = np.zeros(n, dtype=np.int64)

    if coefficients is None:
        first = solve_equilibrium(params, s0, scheme, fp_config)
        if isinstance(first, NoEquilibrium):
            raise DomainError(f"no equilibrium at the initial state: {first.reason}")
        batch = _Batch(params, scheme)
        region = np.full(n, first.region.index, dtype=np.int16)
        n1 = np.full(n, first.holdingsC[0])
        n2 = np.full(n, first.holdingsC[1])
        last = {f: np.full(n, getattr(first.drifts, f)) for f in StateDrifts.__dataclass_fields__}
    sqdt = math.sqrt(dt)

    for t in range(steps):
        if coefficients is not None:
            d = coefficients(y, y1, y2)
            coef = {f: np.broadcast_to(np.asarray(getattr(d, f), dtype=float), (n,))
                    for f in StateDrifts.__dataclass_fields__}
            R[t] = 0
        else:
            coef, region, n1, n2 = _equilibrium_coefficients(
                params, scheme, batch, y, y1, y2, region, n1, n2, last, carried, fallbacks, fp_config)
            last = coef
            R[t] = region
        if config.zero_noise:
            dW = np.zeros(n)
            dB = np.zeros(n)
        else:
            z = rng.standard_normal((n, 2))
            dW, dB = z[:, 0] * sqdt, z[:, 1] * sqdt
        ny = y + coef["muY"] * dt + coef["sigmaY"] * dW + coef["deltaY"] * dB
        ny1 = y1 + coef["mu1Y"] * dt + coef["sigma1Y"] * dW + coef["delta1Y"] * dB
        ny2 = y2 + coef["mu2Y"] * dt + coef["sigma2Y"] * dW + coef["delta2Y"] * dB
        floor_hits += ny < eps
        for arr in (ny, ny1, ny2):
            clamps += (arr < eps) | (arr > 1 - eps)
        y, y1, y2 = (np.clip(a, eps, 1 - eps) for a in (ny, ny1, ny2))
        Y[t + 1], Y1[t + 1], Y2[t + 1] = y, y1, y2

    times = np.arange(steps + 1) * dt
    meta = {"rng": RNG_ALGORITHM, "seed": config.seed, "dt": dt, "scheme": scheme.value, "y_floor": eps}
    return [
        PathSample(times, Y[:, i].copy(), Y1[:, i].copy(), Y2[:, i].copy(), R[:, i].copy(), {
            **meta, "path": i, "clamp_events": int(clamps[i]), "floor_hits": int(floor_hits[i]),
            "no_equilibrium_steps": int(carried[i]), "scalar_fallbacks": int(fallbacks[i]),
        })
        for i in range(n)
    ]


def _equilibrium_coefficients(params, scheme, batch, y, y1, y2, region, n1, n2, last, carried, fallbacks, fp_config):
    n = y.shape[0]
    coef = {f: np.empty(n) for f in StateDrifts.__dataclass_fields__}
    new_n1, new_n2 = n1.copy(), n2.copy()
    new_region = region.copy()
    pending = np.zeros(n, dtype=bool)
    for index in np.unique(region):
        if index == 0:
            pending |= region == 0
            continue
        m = region == index
        a1, a2, conv = batch.solve(y[m], y1[m], y2[m], n1[m], n2[m], int(index))
        ok, snap = batch.verify(y[m], y1[m], y2[m], a1, a2, int(index))
        ok &= conv
        d = drift_terms(params, y[m], y1[m], y2[m], a1, a2, snap.prices, snap.x, snap.xp)
        idx = np.flatnonzero(m)
        for f in coef:
            coef[f][idx] = np.broadcast_to(getattr(d, f), idx.shape)
        new_n1[idx], new_n2[idx] = a1, a2
        pending[idx[~ok]] = True
    for i in np.flatnonzero(pending):
        fallbacks[i] += 1
        state = StateVector(float(y[i]), float(y1[i]), float(y2[i]))
        warm = (n1[i], n2[i]) if region[i] else None
        sol = solve_equilibrium(params, state, scheme, fp_config, warm_start=warm)
        if isinstance(sol, NoEquilibrium):
            carried[i] += 1
            new_region[i] = 0
            for f in coef:
                coef[f][i] = last[f][i]
            continue
        new_region[i] = sol.region.index
        new_n1[i], new_n2[i] = sol.holdingsC
        for f in coef:
            coef[f][i] = getattr(sol.drifts, f)
    return coef, new_region, new_n1, new_n2


def paths_to_csv(paths: list[PathSample], path) -> None:
    """One row per step per path."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t", "y", "y1", "y2", "region"])
        for p in paths:
            i = p.diagnostics["path"]
            for s in range(p.times.size):
                reg = int(p.regions[s - 1]) if s else ""
                w.writerow([i, *(format(float(v), ".17g") for v in (p.times[s], p.y[s], p.y1[s], p.y2[s])), reg])
