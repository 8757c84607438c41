"""Sweeps over the consumption-share grid, run manifests and CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .core import DomainError, EconomyParams, StateVector
from .equilibrium import FixedPointConfig, NoEquilibrium, scheme_for, solve_equilibrium
from .kkt import Scheme
from .survival import TARGETS, check_extinction

COLUMN_GROUPS = ("solution", "extinction")
EXTINCTION_COLUMNS = ("ext_C_firm1", "ext_C_firm2", "ext_M_firm1", "ext_M_firm2")


def fmt(v) -> str:
    """Full double precision, '.' decimal."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (bool, int, str)):
        return str(v)
    return format(float(v), ".17g")


@dataclass(frozen=True)
class YGrid:
    start: float = 0.01
    stop: float = 0.99
    step: float = 0.01

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError("y_grid.step must be positive")
        if not 0 < self.start <= self.stop < 1:
            raise DomainError("y_grid must satisfy 0 < start <= stop < 1")

    def points(self) -> list[float]:
        # integer multiples of the step avoid accumulated rounding
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [round(self.start + i * self.step, 12) for i in range(n + 1)]


@dataclass(frozen=True)
class SweepSpec:
    params: EconomyParams = field(default_factory=EconomyParams)
    y_grid: YGrid = field(default_factory=YGrid)
    y1: float = 0.5
    y2: float = 0.5
    protection: tuple[dict, ...] = ({"p": 1.0},)
    two_sided: bool = False
    outputs: tuple[str, ...] = COLUMN_GROUPS

    def __post_init__(self):
        StateVector(0.5, self.y1, self.y2)
        unknown = set(self.outputs) - set(COLUMN_GROUPS)
        if unknown:
            raise DomainError(f"outputs: unknown column groups {sorted(unknown)}")
        if not self.protection:
            raise DomainError("protection: at least one level is required")
        for prot in self.protection:
            self.params_for(prot)

    def params_for(self, prot: dict) -> EconomyParams:
        allowed = {"p", "pPrime", "k", "kPrime"}
        bad = set(prot) - allowed
        if bad:
            raise DomainError(f"protection: unknown keys {sorted(bad)}")
        changes = dict(prot)
        if self.two_sided and "pPrime" not in changes and "p" in changes:
            changes["pPrime"] = changes["p"]
        return self.params.replace(**changes)

    def scheme_for(self, prot: dict) -> Scheme:
        return scheme_for(self.params_for(prot), self.two_sided)

    def header(self) -> list[str]:
        cols = ["p", "pPrime", "k", "kPrime", "y", "y1", "y2", "region", "degenerate",
                "n1C", "n2C", "n1M", "n2M", "xStar"]
        if self.two_sided:
            cols.append("xPrimeStar")
        cols += ["mu1", "mu2", "r", "sigma", "delta", "sigma2", "g1", "g2", "fixed_point_residual"]
        if "extinction" in self.outputs and not self.two_sided:
            cols += list(EXTINCTION_COLUMNS)
        return cols + ["reason"]

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(), "y_grid": asdict(self.y_grid), "y1": self.y1, "y2": self.y2,
            "protection": [dict(p) for p in self.protection], "two_sided": self.two_sided,
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, params: EconomyParams, data: dict) -> "SweepSpec":
        known = {"y_grid", "y1", "y2", "protection", "p", "two_sided", "outputs"}
        bad = set(data) - known
        if bad:
            raise DomainError(f"sweep: unknown keys {sorted(bad)}")
        grid = data.get("y_grid", {})
        if not isinstance(grid, dict):
            raise DomainError("sweep.y_grid must be an object with start/stop/step")
        try:
            y_grid = YGrid(**grid)
        except TypeError as exc:
            raise DomainError(f"sweep.y_grid: {exc}") from None
        prot = data.get("protection")
        if prot is None and "p" in data:
            prot = [{"p": float(v)} for v in data["p"]]
        prot = tuple(protection_entry(v) for v in (prot or [{"p": params.p}]))
        return cls(params, y_grid, float(data.get("y1", 0.5)), float(data.get("y2", 0.5)), prot,
                   bool(data.get("two_sided", False)), tuple(data.get("outputs", COLUMN_GROUPS)))


def protection_entry(v) -> dict:
    if isinstance(v, dict):
        return {k: float(x) for k, x in v.items()}
    return {"p": float(v)}


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = __version__
    seeds: list[int] = field(default_factory=list)
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sweep_one(spec: SweepSpec, prot: dict) -> tuple[list[dict], dict]:
    """Rows for one protection level, warm-starting along the grid."""
    params = spec.params_for(prot)
    scheme = spec.scheme_for(prot)
    cfg = FixedPointConfig()
    warm = None
    rows, regions, failures = [], {}, 0
    t0 = time.perf_counter()
    for y in spec.y_grid.points():
        state = StateVector(y, spec.y1, spec.y2)
        sol = solve_equilibrium(params, state, scheme, cfg, warm_start=warm)
        row = {"p": params.p, "pPrime": params.pPrime, "k": params.k, "kPrime": params.kPrime,
               "y": y, "y1": spec.y1, "y2": spec.y2}
        if isinstance(sol, NoEquilibrium):
            failures += 1
            row["region"] = ""
            row["reason"] = "NoEquilibrium: " + sol.reason
            rows.append(row)
            continue
        warm = sol.holdingsC
        regions[sol.region.index] = regions.get(sol.region.index, 0) + 1
        pr = sol.prices
        row.update(region=sol.region.index, degenerate=int(sol.region.degenerate_case),
                   n1C=sol.holdingsC[0], n2C=sol.holdingsC[1], n1M=sol.holdingsM[0], n2M=sol.holdingsM[1],
                   xStar=sol.xStar, xPrimeStar=sol.xPrimeStar, mu1=pr.mu1, mu2=pr.mu2, r=pr.r,
                   sigma=pr.sigma, delta=pr.delta, sigma2=pr.sigma2_total, g1=sol.grossReturn1,
                   g2=sol.grossReturn2, fixed_point_residual=sol.fixed_point_residual, reason="")
        if "extinction" in spec.outputs and scheme is not Scheme.TWOSIDED16:
            for col, target in zip(EXTINCTION_COLUMNS, TARGETS):
                rep = check_extinction(params, state, scheme, target)
                row[col] = rep.condition_fired or ""
        rows.append(row)
    diag = {"protection": prot, "scheme": scheme.value, "regions": {str(k): v for k, v in sorted(regions.items())},
            "no_equilibrium": failures, "seconds": round(time.perf_counter() - t0, 3)}
    return rows, diag


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("XSEC_THREADS", "1")))
    except ValueError:
        raise DomainError("XSEC_THREADS must be an integer") from None


def run_sweep(spec: SweepSpec) -> tuple[list[dict], list[dict]]:
    """All rows (protection levels stacked in the given order) and per-level diagnostics.

    Levels run in parallel processes up to ``XSEC_THREADS``; the grid of
    each level is solved in order so warm starts chain along y.
    """
    workers = min(max_threads(), len(spec.protection))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_one, [spec] * len(spec.protection), spec.protection))
    else:
        parts = [_sweep_one(spec, prot) for prot in spec.protection]
    rows = [r for part, _ in parts for r in part]
    return rows, [d for _, d in parts]


def rows_to_csv(rows: list[dict], header: list[str], manifest_name: str | None = None) -> str:
    buf = io.StringIO()
    if manifest_name:
        buf.write(f"# manifest: {manifest_name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in header])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# configuration files


@dataclass(frozen=True)
class RunConfig:
    params: EconomyParams
    sweep: dict
    simulate: dict
    raw: dict


def load_config(path: str | Path | None) -> RunConfig:
    """Parameters plus optional ``sweep`` and ``simulate`` sections.

    Parameters may sit at the top level or under ``params``.
    """
    if path is None:
        return RunConfig(EconomyParams(), {}, {}, {})
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DomainError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise DomainError("config must be a JSON object")
    data = dict(data)
    sweep = data.pop("sweep", {})
    simulate = data.pop("simulate", {})
    raw_params = data.pop("params", None)
    if raw_params is None:
        raw_params = data
    elif data:
        raise DomainError(f"unknown top-level keys: {', '.join(sorted(data))}")
    if not isinstance(sweep, dict) or not isinstance(simulate, dict):
        raise DomainError("sweep and simulate sections must be objects")
    params = EconomyParams.from_dict(raw_params)
    return RunConfig(params, sweep, simulate, {"params": params.to_dict(), "sweep": sweep, "simulate": simulate})
