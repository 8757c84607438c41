"""Exogenous parameters, equilibrium state, and the derived ratios.

Aggregate output is normalised to one, so every quantity here is a ratio
that depends only on the parameters, the state ``(y, y1, y2)`` and, for
the Gamma aggregates, the controlling shareholder's holdings.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np


class DomainError(ValueError):
    """Input outside the domain of a formula."""


class BoundaryError(DomainError):
    """A ratio was requested at y = 0 or y = 1, where it is not finite."""


@dataclass(frozen=True)
class EconomyParams:
    mu1D: float = 0.015
    mu2D: float = 0.015
    sigmaD: float = 0.13
    deltaD: float = 0.10
    gammaC: float = 3.0
    gammaM: float = 3.5
    rho: float = 0.01
    k: float = 6.0
    kPrime: float = 6.0
    p: float = 1.0
    pPrime: float = 1.0
    l1C: float = 0.1
    l2C: float = 0.1
    l1M: float = 0.5
    l2M: float = 0.5
    tau: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{f.name}: expected a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if not self.gammaM >= self.gammaC > 0:
            raise DomainError("gammaM >= gammaC > 0 required")
        if self.gammaC == 1 or self.gammaM == 1:
            raise DomainError("gammaC and gammaM must differ from 1")
        for name in ("sigmaD", "deltaD", "rho", "k", "kPrime", "tau"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        for name in ("p", "pPrime"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must lie in [0, 1]")
        for name in ("l1C", "l2C", "l1M", "l2M"):
            if not 0 <= getattr(self, name) < 1:
                raise DomainError(f"{name} must lie in [0, 1)")
        if self.l1C + self.l1M >= 1:
            raise DomainError("l1C + l1M must be < 1")
        if self.l2C + self.l2M >= 1:
            raise DomainError("l2C + l2M must be < 1")

    # parameter combinations used throughout
    @property
    def rho_c(self) -> float:
        return self.rho ** (1.0 / self.gammaC)

    @property
    def rho_m(self) -> float:
        return self.rho ** (1.0 / self.gammaM)

    @property
    def net1(self) -> float:
        return 1.0 - self.l1M - self.l1C

    @property
    def net2(self) -> float:
        return 1.0 - self.l2M - self.l2C

    def replace(self, **changes) -> "EconomyParams":
        return EconomyParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EconomyParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown parameter keys: {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EconomyParams":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise DomainError("parameter JSON must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "EconomyParams":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class StateVector:
    y: float
    y1: float
    y2: float

    def __post_init__(self):
        if not 0 <= self.y <= 1:
            raise DomainError(f"y must lie in [0, 1], got {self.y}")
        for name in ("y1", "y2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")

    @property
    def interior(self) -> bool:
        return 0 < self.y < 1


@dataclass(frozen=True)
class GammaAggregates:
    gamma0: float
    gamma1: float
    gamma2: float


@dataclass(frozen=True)
class WealthRatios:
    d1_over_xC: float
    d2_over_xC: float
    s1_over_xC: float
    s2_over_xC: float
    d1_over_xM: float
    d2_over_xM: float
    s1_over_xM: float
    s2_over_xM: float


@dataclass(frozen=True)
class PriceSystem:
    mu1: float
    mu2: float
    r: float
    sigma: float
    delta: float

    @property
    def sigma2_total(self) -> float:
        """Total volatility of stock 2."""
        return math.hypot(self.sigma, self.delta)


@dataclass(frozen=True)
class ExposureRatios:
    """theta, xi and alpha ratios of one shareholder's myopic objective."""

    theta1: float
    theta2: float
    xi0: float
    xi1: float
    xi2: float
    alpha1: float
    alpha2: float

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])

    @property
    def xi(self) -> np.ndarray:
        return np.array([[self.xi1, self.xi0], [self.xi0, self.xi2]])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])

    @property
    def det_xi(self) -> float:
        return self.xi1 * self.xi2 - self.xi0 * self.xi0


@dataclass(frozen=True)
class Exposures:
    C: ExposureRatios
    M: ExposureRatios


def _check_holdings(params: EconomyParams, n1C: float, n2C: float, slack: float = 1e-9):
    if not (-slack <= n1C <= params.tau + slack and -slack <= n2C <= 1 + slack):
        raise DomainError(f"holdings ({n1C}, {n2C}) outside [0, tau] x [0, 1]")


def gamma0(params: EconomyParams, y: float) -> float:
    return y * params.rho ** (-1.0 / params.gammaM) + (1.0 - y) * params.rho ** (-1.0 / params.gammaC)


def compute_gamma_aggregates(params: EconomyParams, state: StateVector, n1C: float, n2C: float) -> GammaAggregates:
    _check_holdings(params, n1C, n2C)
    rm, rc = params.rho_m, params.rho_c
    return GammaAggregates(
        gamma0=gamma0(params, state.y),
        gamma1=rm * (params.tau - n1C) + rc * n1C,
        gamma2=rm * (1.0 - n2C) + rc * n2C,
    )


def compute_wealth_ratios(params: EconomyParams, state: StateVector) -> WealthRatios:
    if not 0 < state.y < 1:
        raise BoundaryError("wealth ratios are only finite for 0 < y < 1")
    return wealth_ratios_unchecked(params, state.y, state.y1, state.y2)


def wealth_ratios_unchecked(params: EconomyParams, y, y1, y2) -> WealthRatios:
    """Same ratios without validation; accepts numpy arrays."""
    g0 = gamma0(params, y)
    xC = params.rho ** (-1.0 / params.gammaC) * (1.0 - y)
    xM = params.rho ** (-1.0 / params.gammaM) * y
    d1 = params.net1 * y1
    d2 = params.net2 * (1.0 - y1)
    s1 = g0 * y2 / params.tau
    s2 = g0 * (1.0 - y2)
    return WealthRatios(d1 / xC, d2 / xC, s1 / xC, s2 / xC, d1 / xM, d2 / xM, s1 / xM, s2 / xM)


def exposure_for(gamma: float, d1x: float, d2x: float, s1x: float, s2x: float,
                 excess1: float, excess2: float, sigma: float, delta: float, tau: float) -> ExposureRatios:
    """Exposure ratios of one shareholder from its wealth ratios and prices."""
    s2 = sigma * sigma
    return ExposureRatios(
        theta1=s1x * excess1,
        theta2=s2x * excess2,
        xi0=gamma * s1x * s2x * s2,
        xi1=gamma * s1x * s1x * s2,
        xi2=gamma * s2x * s2x * (s2 + delta * delta),
        alpha1=d1x / tau,
        alpha2=d2x,
    )


def compute_exposure_ratios(wealth: WealthRatios, price: PriceSystem, params: EconomyParams) -> Exposures:
    if price.sigma < 0 or price.delta < 0:
        raise DomainError("volatilities must be nonnegative")
    e1, e2 = price.mu1 - price.r, price.mu2 - price.r
    w = wealth
    c = exposure_for(params.gammaC, w.d1_over_xC, w.d2_over_xC, w.s1_over_xC, w.s2_over_xC,
                     e1, e2, price.sigma, price.delta, params.tau)
    m = exposure_for(params.gammaM, w.d1_over_xM, w.d2_over_xM, w.s1_over_xM, w.s2_over_xM,
                     e1, e2, price.sigma, price.delta, params.tau)
    return Exposures(C=c, M=m)


def diversion_fraction(n2C: float, p: float, k: float) -> float:
    """Optimal diverted fraction of firm-2 output."""
    return max(0.0, min((1.0 - n2C) / k, (1.0 - p) * n2C))


def diversion_fraction_firm1(n1C: float, pPrime: float, kPrime: float, tau: float) -> float:
    """Optimal diverted fraction of firm-1 output."""
    s = n1C / tau
    return max(0.0, min((1.0 - s) / kPrime, (1.0 - pPrime) * s))
