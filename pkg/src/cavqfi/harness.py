"""Sweep configuration, orchestration and result files.

Outputs are deterministic: rows are sorted before writing, floats use
``repr`` and no wall-clock data goes into any file.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .evolve import IntegrationError, TimeGrid
from .model import ProbeState, SystemParams, TruncationError
from .qfi import EstimationTarget, qfi_trace
from .scaling import fit_power_law

log = logging.getLogger(__name__)

REGIMES = {
    "strong": (0.8, 0.8),
    "noisy-cavity": (3.0, 0.2),
    "noisy-qubit": (0.2, 3.0),
    "weak": (3.0, 3.0),
}
DETUNING = 0.1  # omega_q / g for detuning runs, omega_c = 0


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    probes: list[str] = field(default_factory=lambda: ["x", "ghz", "dicke", "excited", "ground"])
    n_values: list[int] = field(default_factory=lambda: list(range(1, 21)))
    points: list[list[float]] = field(default_factory=lambda: [list(v) for v in REGIMES.values()])
    target: str = "coupling"
    detuning: float = DETUNING
    t_end: float = 20.0
    n_samples: int = 1000
    rtol: float = 1e-8
    atol: float = 1e-11
    delta: float = 1e-4
    eps_eig: float = 1e-10
    threads: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        self.points = [[float(k), float(g)] for k, g in self.points]
        self.n_values = [int(n) for n in self.n_values]

    def validate(self) -> None:
        if not self.probes:
            raise ConfigError("probe list is empty")
        if not self.n_values:
            raise ConfigError("N range is empty")
        if not self.points:
            raise ConfigError("no (kappa/g, gamma/g) points")
        try:
            probes = [ProbeState.parse(p) for p in self.probes]
            EstimationTarget.parse(self.target, self.delta)
            TimeGrid(self.t_end, self.n_samples)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        for n in self.n_values:
            if not 1 <= n <= 24:
                raise ConfigError(f"N={n} outside 1..24")
            for p in probes:
                try:
                    p.validate(n)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        for k, g in self.points:
            if k < 0 or g < 0:
                raise ConfigError("decay rates must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.rtol <= 0 or self.atol <= 0 or self.eps_eig <= 0:
            raise ConfigError("tolerances must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def hash(self) -> str:
        # output location and worker count do not change results
        physics = {k: v for k, v in self.to_dict().items() if k not in ("out_dir", "threads")}
        blob = json.dumps(physics, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def params(self, n: int, kappa: float, gamma: float) -> SystemParams:
        omega_q = self.detuning if self.target == "detuning" else 0.0
        return SystemParams(n, 1.0, kappa, gamma, omega_q=omega_q, omega_c=0.0)

    def points_list(self):
        for probe in self.probes:
            for n in self.n_values:
                for k, g in self.points:
                    yield (probe, n, k, g)


ROW_FIELDS = ("probe", "N", "kappa_over_g", "gamma_over_g", "target", "max_F", "t_at_max",
              "fit_id", "steps", "rejected_steps", "version", "config_hash")


@dataclass
class ResultRow:
    probe: str
    N: int
    kappa_over_g: float
    gamma_over_g: float
    target: str
    max_F: float
    t_at_max: float
    fit_id: str
    steps: int
    rejected_steps: int
    version: str
    config_hash: str

    def sort_key(self):
        return (self.probe, self.N, self.kappa_over_g, self.gamma_over_g)


def run_single(config: SweepConfig, probe: str, n: int, kappa: float, gamma: float,
               return_trace: bool = False):
    """Full pipeline for one point; returns a :class:`ResultRow`."""
    pr = ProbeState.parse(probe)
    try:
        pr.validate(n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    target = EstimationTarget.parse(config.target, config.delta)
    params = config.params(n, kappa, gamma)
    trace = qfi_trace(params, pr, target, TimeGrid(config.t_end, config.n_samples),
                      rtol=config.rtol, atol=config.atol, eps_eig=config.eps_eig)
    row = ResultRow(pr.label, n, kappa, gamma, target.kind, trace.max_f, trace.t_at_max, "",
                    trace.stats.steps, trace.stats.rejected, __version__, config.hash())
    return (row, trace) if return_trace else row


def _point_job(args):
    config, point = args
    try:
        return run_single(config, *point), None
    except (IntegrationError, TruncationError, ValueError, FloatingPointError) as exc:
        return None, (point, f"{type(exc).__name__}: {exc}")


@dataclass
class SweepResult:
    rows: list[ResultRow]
    fits: list[dict]
    errors: list[dict]

    @property
    def ok(self) -> bool:
        return not self.errors


def fit_id(probe, kappa, gamma):
    return f"{probe}@k{kappa!r}_g{gamma!r}"


def run_sweep(config: SweepConfig) -> SweepResult:
    config.validate()
    jobs = [(config, p) for p in config.points_list()]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(_point_job, jobs))
    else:
        outcomes = [_point_job(j) for j in jobs]
    rows = sorted((r for r, _ in outcomes if r is not None), key=ResultRow.sort_key)
    errors = sorted(({"probe": p[0], "N": p[1], "kappa_over_g": p[2], "gamma_over_g": p[3],
                      "error": msg} for _, e in outcomes if e is not None for p, msg in [e]),
                    key=lambda d: (d["probe"], d["N"], d["kappa_over_g"], d["gamma_over_g"]))
    fits = []
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.probe, r.kappa_over_g, r.gamma_over_g), []).append(r)
    for (probe, k, g), grp in sorted(groups.items()):
        ns = [r.N for r in grp]
        ys = [r.max_F for r in grp]
        if len(set(ns)) < 4:
            continue
        fid = fit_id(probe, k, g)
        if min(ys) <= 0:
            fit = None
            status = "zero-signal"
        else:
            fit = fit_power_law(ns, ys)
            status = "converged" if fit.converged else "diverged"
        fits.append({"fit_id": fid, "probe": probe, "kappa_over_g": k, "gamma_over_g": g,
                     "target": config.target, "n_min": min(ns), "n_max": max(ns),
                     "a": fit.a if fit else None, "b": fit.b if fit else None,
                     "c": fit.c if fit else None,
                     "residual_norm": fit.residual_norm if fit else None, "status": status})
        for r in grp:
            r.fit_id = fid
    return SweepResult(rows, fits, errors)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(records, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        d = asdict(rec) if hasattr(rec, "__dataclass_fields__") else rec
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


FIT_FIELDS = ("fit_id", "probe", "kappa_over_g", "gamma_over_g", "target", "n_min", "n_max",
              "a", "b", "c", "residual_norm", "status")
ERROR_FIELDS = ("probe", "N", "kappa_over_g", "gamma_over_g", "error")


def metadata(config: SweepConfig, kind: str) -> dict:
    target = EstimationTarget.parse(config.target, config.delta)
    return {"kind": kind, "version": __version__, "config_hash": config.hash(),
            "config": config.to_dict(),
            "units": {"time": "1/g", "max_F": target.units, "rates": "g"}}


def write_sweep(result: SweepResult, config: SweepConfig, out_dir=None) -> Path:
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(to_csv(result.rows, ROW_FIELDS))
    (out / "fits.csv").write_text(to_csv(result.fits, FIT_FIELDS))
    (out / "errors.csv").write_text(to_csv(result.errors, ERROR_FIELDS))
    (out / "metadata.json").write_text(json.dumps(metadata(config, "sweep"), sort_keys=True, indent=2) + "\n")
    return out


def write_trace(trace, row: ResultRow, config: SweepConfig, out_dir=None) -> Path:
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["t", "F"] + sorted(trace.observables)
    recs = []
    for i, t in enumerate(trace.times):
        rec = {"t": float(t), "F": float(trace.values[i])}
        rec.update({k: float(v[i]) for k, v in trace.observables.items()})
        recs.append(rec)
    name = f"trace_{row.probe}_N{row.N}_k{row.kappa_over_g!r}_g{row.gamma_over_g!r}.csv"
    path = out / name
    path.write_text(to_csv(recs, cols))
    (out / "summary.csv").write_text(to_csv([row], ROW_FIELDS))
    meta = metadata(config, "simulate")
    meta["trace_file"] = name
    (out / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path
