"""Command-line entry point: simulate, sweep, map, fit, oracle-check.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .evolve import IntegrationError
from .harness import (FIT_FIELDS, ConfigError, SweepConfig, fit_id, run_single, run_sweep,
                      to_csv, write_sweep, write_trace)
from .model import TruncationError

log = logging.getLogger("cavqfi")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (IntegrationError, TruncationError, FloatingPointError, np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="cavqfi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="one point, writes the F(t) trace")
    s.add_argument("--probe", default="x")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--kappa", type=float, default=0.8)
    s.add_argument("--gamma", type=float, default=0.8)
    s.add_argument("--target", choices=["coupling", "detuning"])
    s.add_argument("--t-end", type=float)
    s.add_argument("--samples", type=int)

    w = sub.add_parser("sweep", parents=[common], help="probes x N x rate points, with fits")
    w.add_argument("--probes", help="comma list, e.g. x,ghz,dicke-1")
    w.add_argument("--n-range", help="e.g. 2..10 or 2,4,6")
    w.add_argument("--points", help="k:g pairs, e.g. 0.8:0.8,3:3")
    w.add_argument("--target", choices=["coupling", "detuning"])

    m = sub.add_parser("map", parents=[common], help="exponent b over a kappa/gamma grid")
    m.add_argument("--probe", default="x")
    m.add_argument("--kappas", default="0.2,3.0")
    m.add_argument("--gammas", default="0.2,3.0")
    m.add_argument("--n-range", default="2..8")

    f = sub.add_parser("fit", parents=[common], help="fit a N^b + c to an existing CSV")
    f.add_argument("csv", help="CSV with N and max_F (or y) columns")
    f.add_argument("--x-col", default="N")
    f.add_argument("--y-col")

    o = sub.add_parser("oracle-check", parents=[common], help="symmetric vs full basis, N <= 5")
    o.add_argument("--n-max", type=int, default=3)
    o.add_argument("--probes", default="x,ghz,dicke,excited,ground")
    o.add_argument("--t-end", type=float, default=5.0)
    o.add_argument("--samples", type=int, default=101)
    o.add_argument("--tol", type=float, default=1e-5)
    o.add_argument("--rtol", type=float, default=1e-10)
    o.add_argument("--atol", type=float, default=1e-13)
    return p


def _load_config(args) -> SweepConfig:
    cfg = SweepConfig.load(args.config) if args.config else SweepConfig()
    if args.out:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def _cmd_simulate(args):
    cfg = _load_config(args)
    if args.target:
        cfg.target = args.target
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if args.samples is not None:
        cfg.n_samples = args.samples
    cfg.probes, cfg.n_values, cfg.points = [args.probe], [args.n], [[args.kappa, args.gamma]]
    cfg.validate()
    row, trace = run_single(cfg, args.probe, args.n, args.kappa, args.gamma, return_trace=True)
    path = write_trace(trace, row, cfg)
    print(f"max F = {row.max_F:.6g} at t = {row.t_at_max:.4f}/g  ({path})")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = _load_config(args)
    if args.probes:
        cfg.probes = [p.strip() for p in args.probes.split(",") if p.strip()]
    if args.n_range:
        cfg.n_values = _ints(args.n_range)
    if args.points:
        cfg.points = [[float(v) for v in pt.split(":")] for pt in args.points.split(",")]
    if args.target:
        cfg.target = args.target
    result = run_sweep(cfg)
    out = write_sweep(result, cfg)
    print(f"{len(result.rows)} rows, {len(result.fits)} fits, {len(result.errors)} errors -> {out}")
    for fit in result.fits:
        b = "n/a" if fit["b"] is None else f"{fit['b']:.3f}"
        print(f"  {fit['fit_id']}: b = {b} ({fit['status']})")
    return EXIT_OK if result.ok else EXIT_NUMERIC


def _cmd_map(args):
    from .scaling import exponent_map

    cfg = _load_config(args)
    cfg.validate()
    kappas, gammas, ns = _floats(args.kappas), _floats(args.gammas), _ints(args.n_range)

    def max_f(n, k, g):
        return run_single(cfg, args.probe, n, k, g).max_F

    emap = exponent_map(args.probe, kappas, gammas, ns, max_qfi_fn=max_f)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(emap.rows())
    (out / "map.csv").write_text(to_csv(rows, ("probe", "kappa_over_g", "gamma_over_g", "b", "status")))
    for r in rows:
        b = "n/a" if r["b"] is None else f"{r['b']:.3f}"
        print(f"kappa/g={r['kappa_over_g']} gamma/g={r['gamma_over_g']}: b = {b}")
    for (k, g), err in sorted(emap.errors.items()):
        print(f"failed at ({k}, {g}): {err}", file=sys.stderr)
    return EXIT_OK if not emap.errors else EXIT_NUMERIC


def _cmd_fit(args):
    from .scaling import fit_power_law

    try:
        with open(args.csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    if not rows:
        raise ConfigError("empty CSV")
    y_col = args.y_col or ("max_F" if "max_F" in rows[0] else "y")
    if args.x_col not in rows[0] or y_col not in rows[0]:
        raise ConfigError(f"CSV needs columns {args.x_col!r} and {y_col!r}")
    groups = {}
    for r in rows:
        key = (r.get("probe", ""), r.get("kappa_over_g", ""), r.get("gamma_over_g", ""))
        groups.setdefault(key, []).append((float(r[args.x_col]), float(r[y_col])))
    records = []
    for key in sorted(groups):
        ns, ys = zip(*groups[key])
        fit = fit_power_law(ns, ys)
        if key[0] and key[1] and key[2]:
            name = fit_id(key[0], float(key[1]), float(key[2]))
        else:
            name = Path(args.csv).stem
        if not fit.converged:
            print(f"{name}: fit diverged ({fit.message})")
            continue
        print(f"{name}: a = {fit.a:.4f}, b = {fit.b:.3f}, c = {fit.c:.4f}")
        records.append({"fit_id": name, "probe": key[0], "kappa_over_g": key[1],
                        "gamma_over_g": key[2], "target": "", "n_min": min(ns), "n_max": max(ns),
                        "a": fit.a, "b": fit.b, "c": fit.c, "residual_norm": fit.residual_norm,
                        "status": "converged"})
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "fits.csv").write_text(to_csv(records, FIT_FIELDS))
    return EXIT_OK if len(records) == len(groups) else EXIT_NUMERIC


def _cmd_oracle(args):
    from .evolve import TimeGrid
    from .harness import REGIMES
    from .model import ProbeState, SystemParams
    from .oracle import MAX_ORACLE_QUBITS, full_evolve_and_qfi
    from .qfi import qfi_trace

    if not 1 <= args.n_max <= MAX_ORACLE_QUBITS:
        raise ConfigError(f"--n-max must be in 1..{MAX_ORACLE_QUBITS}")
    probes = [ProbeState.parse(p) for p in args.probes.split(",")]
    grid = TimeGrid(args.t_end, args.samples)
    worst = 0.0
    for n in range(1, args.n_max + 1):
        for probe in probes:
            for k, g in REGIMES.values():
                params = SystemParams(n, 1.0, k, g)
                kw = dict(refine=False, step_check=False, rtol=args.rtol, atol=args.atol)
                sym = qfi_trace(params, probe, grid=grid, **kw)
                ref = full_evolve_and_qfi(params, probe, grid=grid, **kw)
                scale = max(ref.values.max(), 1e-300)
                dev = float(np.abs(sym.values - ref.values).max() / scale) if ref.values.max() else 0.0
                for name in ("jz", "photons"):
                    dev = max(dev, float(np.abs(sym.observables[name] - ref.observables[name]).max()))
                worst = max(worst, dev)
                log.info("N=%d %s (%g,%g): %.2e", n, probe.label, k, g, dev)
    print(f"max deviation {worst:.3e} (tolerance {args.tol:g})")
    return EXIT_OK if worst < args.tol else EXIT_NUMERIC


COMMANDS = {"simulate": _cmd_simulate, "sweep": _cmd_sweep, "map": _cmd_map,
            "fit": _cmd_fit, "oracle-check": _cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
