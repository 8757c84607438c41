"""Command-line front end: ``xsec <subcommand> [options]``.

Exit status: 0 on success, 2 on invalid input or usage, 3 when ``solve``
finds no equilibrium, 1 when ``oracle-check`` exceeds its tolerances.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .core import DomainError, StateVector
from .dynamics import PathConfig, paths_to_csv, simulate_paths
from .equilibrium import NoEquilibrium, boundary_limits, scheme_for, solve_equilibrium
from .harness import (
    RunManifest, SweepSpec, config_hash, fmt, load_config, now, protection_entry, rows_to_csv, run_sweep,
)
from .kkt import Scheme
from .oracle import oracle_check
from .survival import NOTE, extinction_map

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NO_EQ = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o).__name__)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=False) + "\n"


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _params(args, cfg):
    params = cfg.params
    changes = {k: getattr(args, k) for k in ("p", "pPrime", "k", "kPrime") if getattr(args, k, None) is not None}
    return params.replace(**changes) if changes else params


def _manifest(args, cfg, outputs, seeds=(), **diag) -> RunManifest:
    return RunManifest(config_hash(cfg.raw), seeds=list(seeds), started=args._started, finished=now(),
                       outputs=[str(o) for o in outputs], diagnostics={"argv": args._argv, **diag})


def cmd_solve(args, cfg) -> int:
    params = _params(args, cfg)
    scheme = scheme_for(params, args.two_sided) if args.scheme is None else Scheme.parse(args.scheme)
    sol = solve_equilibrium(params, StateVector(args.y, args.y1, args.y2), scheme)
    payload = sol.to_dict()
    if not args.attempts and not isinstance(sol, NoEquilibrium):
        payload.pop("attempts", None)
    _emit(_dump(_clean(payload)), args.out)
    return EXIT_NO_EQ if isinstance(sol, NoEquilibrium) else EXIT_OK


def _sweep_spec(args, cfg) -> SweepSpec:
    section = dict(cfg.sweep)
    if args.p is not None:
        section["protection"] = [protection_entry(v) for v in args.p]
    if args.y1 is not None:
        section["y1"] = args.y1
    if args.y2 is not None:
        section["y2"] = args.y2
    if args.two_sided:
        section["two_sided"] = True
    if getattr(args, "no_extinction", False):
        section["outputs"] = ["solution"]
    changes = {k: getattr(args, k) for k in ("pPrime", "k", "kPrime") if getattr(args, k) is not None}
    return SweepSpec.from_dict(cfg.params.replace(**changes), section)


def cmd_sweep(args, cfg) -> int:
    spec = _sweep_spec(args, cfg)
    rows, diag = run_sweep(spec)
    man = f"{args.out}.manifest.json" if args.out else None
    _emit(rows_to_csv(rows, spec.header(), Path(man).name if man else None), args.out)
    if man:
        _manifest(args, cfg, [args.out], spec=spec.to_dict(), levels=diag).write(man)
    return EXIT_OK


def cmd_boundary(args, cfg) -> int:
    params = _params(args, cfg)
    scheme = scheme_for(params, args.two_sided)
    out = {}
    for at in (0, 1):
        sol = boundary_limits(params, args.y1, args.y2, at, scheme, args.region_hint if at == 0 else None)
        d = sol.to_dict()
        out[f"y={at}"] = d
    _emit(_dump(_clean(out)), args.out)
    return EXIT_OK


def cmd_survival(args, cfg) -> int:
    spec = _sweep_spec(args, cfg)
    header = ["p", "y", "shareholder", "firm", "condition", "witness_n"]
    lines = []
    for prot in spec.protection:
        params = spec.params_for(prot)
        scheme = scheme_for(params)
        if scheme is Scheme.TWOSIDED16:
            raise DomainError("extinction conditions cover one-sided protection only")
        for row in extinction_map(params, spec.y_grid.points(), (spec.y1, spec.y2), scheme):
            for rep in row["reports"]:
                lines.append([params.p, row["y"], rep.shareholder.value, rep.firm, rep.condition_fired or "",
                              rep.witness_n])
    man = f"{args.out}.manifest.json" if args.out else None
    buf = io.StringIO()
    buf.write(f"# {NOTE}\n")
    if man:
        buf.write(f"# manifest: {Path(man).name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for ln in lines:
        w.writerow([fmt(v) for v in ln])
    _emit(buf.getvalue(), args.out)
    if man:
        _manifest(args, cfg, [args.out], spec=spec.to_dict()).write(man)
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    sim = dict(cfg.simulate)
    params = _params(args, cfg)
    pick = lambda name, default: getattr(args, name) if getattr(args, name) is not None else sim.get(name, default)
    init = StateVector(float(pick("y", 0.05)), float(pick("y1", 0.5)), float(pick("y2", 0.5)))
    conf = PathConfig(horizon=float(pick("horizon", 1.0)), dt=float(pick("dt", 1 / 252)),
                      n_paths=int(pick("paths", 10)), seed=int(pick("seed", 0)), initial=init,
                      y_floor=float(pick("y_floor", 1e-6)), zero_noise=bool(args.zero_noise or sim.get("zero_noise")))
    scheme = scheme_for(params, args.two_sided)
    paths = simulate_paths(params, scheme, conf)
    out = args.out or "paths.csv"
    paths_to_csv(paths, out)
    totals = {k: sum(p.diagnostics[k] for p in paths)
              for k in ("clamp_events", "floor_hits", "no_equilibrium_steps", "scalar_fallbacks")}
    _manifest(args, cfg, [out], seeds=[conf.seed], rng=paths[0].diagnostics["rng"], scheme=scheme.value,
              n_paths=conf.n_paths, n_steps=conf.n_steps, dt=conf.dt, **totals).write(f"{out}.manifest.json")
    sys.stdout.write(_dump(totals))
    return EXIT_OK


def cmd_oracle(args, cfg) -> int:
    schemes = [Scheme.parse(args.scheme)] if args.scheme else list(Scheme)
    reports = [oracle_check(s, args.instances, args.seed, args.grid).to_dict() for s in schemes]
    ok = all(r["max_objective_gap"] < 1e-6 and r["max_argmax_distance"] < 1e-3 for r in reports)
    _emit(_dump({"pass": ok, "reports": reports}), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="xsec", description="Two-firm equilibrium engine with investor protection.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, p_list=False):
        p.add_argument("--config", help="JSON file with parameters and optional sweep/simulate sections")
        p.add_argument("--out", help="output file (default: stdout)")
        if p_list:
            p.add_argument("--p", type=_floats, help="comma-separated protection levels")
        else:
            p.add_argument("--p", type=float)
        p.add_argument("--pPrime", type=float)
        p.add_argument("--k", type=float)
        p.add_argument("--kPrime", type=float)
        p.add_argument("--two-sided", action="store_true", help="use the sixteen-region scheme")

    s = sub.add_parser("solve", help="equilibrium at one state, as JSON")
    common(s)
    s.add_argument("--y", type=float, required=True)
    s.add_argument("--y1", type=float, default=0.5)
    s.add_argument("--y2", type=float, default=0.5)
    s.add_argument("--scheme", choices=[v.value for v in Scheme])
    s.add_argument("--attempts", action="store_true", help="include per-region search diagnostics")
    s.set_defaults(func=cmd_solve)

    for name, func, helptext in (("sweep", cmd_sweep, "grid sweep as CSV"),
                                 ("survival", cmd_survival, "extinction map as CSV")):
        q = sub.add_parser(name, help=helptext)
        common(q, p_list=True)
        q.add_argument("--y1", type=float)
        q.add_argument("--y2", type=float)
        if name == "sweep":
            q.add_argument("--no-extinction", action="store_true", help="omit the extinction columns")
        q.set_defaults(func=func)

    b = sub.add_parser("boundary", help="limits at y = 0 and y = 1, as JSON")
    common(b)
    b.add_argument("--y1", type=float, default=0.5)
    b.add_argument("--y2", type=float, default=0.5)
    b.add_argument("--region-hint", type=int, help="region whose limit applies at y = 0")
    b.set_defaults(func=cmd_boundary)

    m = sub.add_parser("simulate", help="simulate state paths to CSV")
    common(m)
    for flag, typ in (("--y", float), ("--y1", float), ("--y2", float), ("--horizon", float), ("--dt", float),
                      ("--paths", int), ("--seed", int), ("--y-floor", float)):
        m.add_argument(flag, type=typ)
    m.add_argument("--zero-noise", action="store_true")
    m.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle-check", help="closed form versus brute force on random instances")
    o.add_argument("--config", help="accepted for uniformity; unused")
    o.add_argument("--out")
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--seed", type=int, default=7)
    o.add_argument("--grid", type=int, default=200)
    o.add_argument("--scheme", choices=[v.value for v in Scheme])
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv, args._started = argv, now()
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (DomainError, ValueError) as exc:
        sys.stderr.write(f"xsec: invalid input: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
