"""Brute-force reference solver for the controlling portfolio problem.

Used to cross-check the closed-form region enumeration.  For fixed
holdings the optimal diversion is available in closed form, so the
problem reduces to maximising a concave, continuously differentiable
function of ``(n1, n2)`` over the box; we grid it, then polish with a
bounded quasi-Newton step and coordinate line searches.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import ExposureRatios
from .kkt import Protection, Scheme, controlling_objective, solve_controlling


@dataclass(frozen=True)
class OracleSolution:
    n1C: float
    n2C: float
    xStar: float
    xPrimeStar: float
    objective: float


def _diversion(n, cap, p, k):
    s = np.asarray(n, dtype=float) / cap
    return np.maximum(0.0, np.minimum((1.0 - s) / k, (1.0 - p) * s))


def reduced_objective(e: ExposureRatios, scheme: Scheme, prot: Protection):
    """Objective with diversion already optimised out; vectorised in (n1, n2)."""
    scheme = Scheme.parse(scheme)

    def V(n1, n2):
        x = _diversion(n2, 1.0, prot.p, prot.k) if scheme is not Scheme.PERFECT9 else 0.0 * n2
        xp = _diversion(n1, prot.tau, prot.pPrime, prot.kPrime) if scheme is Scheme.TWOSIDED16 else 0.0 * n1
        return controlling_objective(e, n1, n2, x, xp, prot.k, prot.kPrime, prot.tau), x, xp
    return V


def brute_force_oracle(exposure: ExposureRatios, scheme: Scheme | str, prot: Protection,
                       grid_n: int = 200, sweeps: int = 60) -> OracleSolution:
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    scheme = Scheme.parse(scheme)
    V = reduced_objective(exposure, scheme, prot)
    tau = prot.tau
    g1 = np.linspace(0.0, tau, grid_n + 1)
    g2 = np.linspace(0.0, 1.0, grid_n + 1)
    N1, N2 = np.meshgrid(g1, g2, indexing="ij")
    vals = V(N1, N2)[0]
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    start = np.array([g1[i], g2[j]])

    def neg(v):
        return -float(V(v[0], v[1])[0])

    bounds = [(0.0, tau), (0.0, 1.0)]
    res = minimize(neg, start, method="L-BFGS-B", bounds=bounds,
                   options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 500})
    n = res.x if res.fun <= neg(start) else start
    # coordinate polishing; the box is separable so each line search stays feasible
    for _ in range(sweeps):
        prev = n.copy()
        for c, (lo, hi) in enumerate(bounds):
            def line(t, c=c):
                m = n.copy()
                m[c] = t
                return neg(m)
            r = minimize_scalar(line, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            if r.fun <= line(n[c]):
                n[c] = r.x
            for edge in (lo, hi):
                if line(edge) < line(n[c]):
                    n[c] = edge
        if np.max(np.abs(n - prev)) < 1e-13:
            break
    obj, x, xp = V(n[0], n[1])
    return OracleSolution(float(n[0]), float(n[1]), float(x), float(xp), float(obj))


# ---------------------------------------------------------------------------
# random instances


@dataclass(frozen=True)
class OracleInstance:
    exposure: ExposureRatios
    prot: Protection
    scheme: Scheme


def _uniqueness_ok(e: ExposureRatios, scheme: Scheme, prot: Protection, floor: float) -> bool:
    xi = e.xi
    if np.linalg.eigvalsh(xi)[0] <= floor:
        return False
    if scheme is Scheme.IMPERFECT12:
        return e.det_xi > e.alpha2 * e.xi1 / prot.k + floor
    if scheme is Scheme.TWOSIDED16:
        adj = xi - np.diag([e.alpha1 / (prot.kPrime * prot.tau), e.alpha2 / prot.k])
        return np.linalg.eigvalsh(adj)[0] > floor
    return True


def random_instance(rng: np.random.Generator, scheme: Scheme | str, floor: float = 1e-2) -> OracleInstance:
    """Random well-posed instance, rejection-sampled for uniqueness.

    The premium is drawn through an unconstrained target point spread over
    a box larger than the feasible one, so corner, edge and interior
    solutions all occur.
    """
    scheme = Scheme.parse(scheme)
    while True:
        tau = float(rng.uniform(0.5, 2.0))
        p = float(rng.uniform(0.0, 1.0)) if scheme is not Scheme.PERFECT9 else 1.0
        pp = float(rng.uniform(0.0, 1.0)) if scheme is Scheme.TWOSIDED16 else 1.0
        k, kp = (float(v) for v in rng.uniform(1.0, 20.0, size=2))
        prot = Protection(p, k, pp, kp, tau)
        L = np.array([[rng.uniform(0.2, 1.5), 0.0], [rng.uniform(-1.0, 1.0), rng.uniform(0.2, 1.5)]])
        xi = L @ L.T
        xi[0, 0] /= tau * tau
        xi[0, 1] /= tau
        xi[1, 0] = xi[0, 1]
        # xi0 is a covariance of positive price loadings in the economy
        if xi[0, 1] <= 0:
            xi[0, 1] = xi[1, 0] = -xi[0, 1]
        alpha = rng.uniform(0.0, 0.3, size=2)
        target = np.array([rng.uniform(-0.5, 1.5) * tau, rng.uniform(-0.5, 1.5)])
        theta = xi @ target - alpha
        e = ExposureRatios(float(theta[0]), float(theta[1]), float(xi[0, 1]), float(xi[0, 0]), float(xi[1, 1]),
                           float(alpha[0]), float(alpha[1]))
        if _uniqueness_ok(e, scheme, prot, floor):
            return OracleInstance(e, prot, scheme)


@dataclass(frozen=True)
class OracleReport:
    scheme: Scheme
    instances: int
    max_objective_gap: float
    max_argmax_distance: float
    regions_seen: dict
    seconds: float

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value, "instances": self.instances,
            "max_objective_gap": self.max_objective_gap, "max_argmax_distance": self.max_argmax_distance,
            "regions_seen": {str(k): v for k, v in sorted(self.regions_seen.items())},
            "seconds": self.seconds,
        }


def oracle_check(scheme: Scheme | str, instances: int = 200, seed: int = 7, grid_n: int = 200) -> OracleReport:
    """Compare the closed-form solution with the brute-force one on random instances."""
    scheme = Scheme.parse(scheme)
    rng = np.random.Generator(np.random.PCG64(seed))
    t0 = time.perf_counter()
    gap = dist = 0.0
    seen: dict = {}
    for _ in range(instances):
        inst = random_instance(rng, scheme)
        a = solve_controlling(inst.exposure, scheme, inst.prot)
        o = brute_force_oracle(inst.exposure, scheme, inst.prot, grid_n)
        gap = max(gap, abs(a.objective - o.objective))
        dist = max(dist, math.hypot(a.n1C - o.n1C, a.n2C - o.n2C))
        seen[a.region.index] = seen.get(a.region.index, 0) + 1
    return OracleReport(scheme, instances, gap, dist, seen, time.perf_counter() - t0)
