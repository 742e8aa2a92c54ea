"""Acceptance criteria 1-8. Each test prints one PASS/FAIL line.

Run on its own with ``pytest -v tests/test_acceptance.py`` (about half an
hour on one core) or ``python3 tests/test_acceptance.py``.
"""
import filecmp
import math
import sys
import warnings
from functools import lru_cache

import numpy as np
import pytest

from cavqfi.cli import main as cli_main
from cavqfi.evolve import TimeGrid
from cavqfi.harness import REGIMES, SweepConfig, run_single
from cavqfi.model import ProbeState, SystemParams
from cavqfi.oracle import FullOperators, full_evolve_and_qfi, probe_vector
from cavqfi.qfi import EstimationTarget, QfiWarning, qfi_at_time, qfi_trace
from cavqfi.scaling import fit_power_law

pytestmark = pytest.mark.acceptance

# tolerances pinned from the criteria
ORACLE_REL_F = 1e-5
ORACLE_ABS_OBS = 1e-5
CLOSED_REL = 1e-3
DIAG_ABS = 1e-10
TRACE_TOL = 1e-8
EIG_TOL = 1e-8
EXC_STEP_TOL = 1e-8
GUARD_TOL = 1e-8
FIT_EXACT = 1e-6
FIT_NOISE_BAND = 0.1

CORNERS = list(REGIMES.values())
FAMILIES = ["ghz", "x", "dicke-1", "dicke", "excited", "ground"]
ORACLE_GRID = TimeGrid(10.0, 201)
# Criterion 1 compares whole traces, including the late tail where F has
# fallen to ~1e-5 of its peak and is carried by populations near 1e-10; at
# the default atol those entries are integrator noise in both bases.
TIGHT_TOLS = dict(rtol=1e-10, atol=1e-13)
# Criterion 2 evolves pure states with no dissipation. The zero eigenvalues
# then drift to about -rtol (criterion 4 re-checks them), and the O(delta^2)
# error of the central difference inside the null space gets divided by
# those near-zero eigenvalues. Hence tighter steps and a smaller delta.
CLOSED_TOLS = dict(rtol=1e-9, atol=1e-12)
CLOSED_TARGET = EstimationTarget("coupling", delta=1e-5)
CLOSED_GRID = TimeGrid(5.0, 51)

# every trajectory produced here is re-checked by criterion 4
TRAJECTORIES = []


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}")
    return _report


def _keep(label, n, trace):
    TRAJECTORIES.append((label, n, trace.observables))
    return trace


@lru_cache(maxsize=None)
def point(probe, n, kappa, gamma, target="coupling"):
    """Harness run at the default horizon and grid; returns the ResultRow."""
    cfg = SweepConfig(target=target)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QfiWarning)
        row, trace = run_single(cfg, probe, n, kappa, gamma, return_trace=True)
    _keep(f"{probe} ({kappa},{gamma}) {target}", n, trace)
    return row


def fitted_b(probe, kappa, gamma, ns, target="coupling"):
    vals = [point(probe, n, kappa, gamma, target).max_F for n in ns]
    if max(vals) == 0.0:
        return -math.inf, vals  # no signal at any N
    fit = fit_power_law(ns, vals)
    return (fit.b if fit.converged else math.nan), vals


# 1 ---------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence(report):
    worst_f, worst_obs, where = 0.0, 0.0, ""
    bad = []
    for n in range(1, 6):
        for fam in FAMILIES:
            probe = ProbeState.parse(fam)
            if probe.excitations(n) is not None and probe.excitations(n) > n:
                continue
            for k, g in CORNERS:
                p = SystemParams(n, 1.0, k, g)
                kw = dict(refine=False, step_check=False, **TIGHT_TOLS)
                sym = _keep(f"sym {fam} ({k},{g})", n, qfi_trace(p, probe, grid=ORACLE_GRID, **kw))
                ref = _keep(f"full {fam} ({k},{g})", n,
                            full_evolve_and_qfi(p, probe, grid=ORACLE_GRID, **kw))
                scale = ref.values.max()
                df = np.abs(sym.values - ref.values).max()
                rel = df / scale if scale > 0 else df
                dobs = max(np.abs(sym.observables[o] - ref.observables[o]).max()
                           for o in ("jz", "photons", "purity", "trace"))
                if rel > worst_f:
                    worst_f, where = rel, f"N={n} {fam} ({k},{g})"
                worst_obs = max(worst_obs, dobs)
                if rel >= ORACLE_REL_F or dobs >= ORACLE_ABS_OBS:
                    bad.append(f"N={n} {fam} ({k},{g})")
    ok = not bad
    report(1, "oracle equivalence", ok,
           f"max |dF|/max F = {worst_f:.2e} at {where}, max observable deviation "
           f"{worst_obs:.2e} (limits {ORACLE_REL_F:g}/{ORACLE_ABS_OBS:g})"
           + (f"; failing: {bad}" if bad else ""))
    assert ok


# 2 ---------------------------------------------------------------------------

def _var_v(n, probe, n_fock):
    """Var(a^dag J- + a J+) on the probe, from tensor-product operators."""
    ops = FullOperators(n, n_fock)
    v = sum(ops.a.T @ s + ops.a @ s.T for s in ops.sm)
    psi = np.kron(probe_vector(probe, n), np.eye(n_fock)[0])
    vpsi = v @ psi
    mean = np.vdot(psi, vpsi).real
    return float(np.vdot(vpsi, vpsi).real - mean ** 2)


def test_criterion_2_closed_system_law(report):
    worst, where, bad = 0.0, "", []
    for n in range(1, 7):
        for fam in FAMILIES:
            probe = ProbeState.parse(fam)
            p = SystemParams(n, 1.0, 0.0, 0.0)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", QfiWarning)
                tr = _keep(f"closed {fam}", n, qfi_trace(p, probe, CLOSED_TARGET,
                                                         grid=CLOSED_GRID, refine=False,
                                                         step_check=False, **CLOSED_TOLS))
            var = _var_v(n, probe, p.n_fock)
            t = tr.times[1:]
            ratio = tr.values[1:] / (4 * t ** 2)
            if var == 0.0:
                err = float(np.abs(ratio).max())
                bad_here = err > 1e-10
            else:
                err = float(np.abs(ratio / var - 1).max())
                bad_here = err >= CLOSED_REL
            if err > worst:
                worst, where = err, f"N={n} {fam}"
            if bad_here:
                bad.append(f"N={n} {fam}")
    ok = not bad
    report(2, "closed-system law", ok,
           f"max |F/(4t^2 Var V) - 1| = {worst:.2e} at {where} (limit {CLOSED_REL:g})"
           + (f"; failing: {bad}" if bad else ""))
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_3_diagonal_qfi(report):
    errs = {p: abs(qfi_at_time(np.diag([p, 1 - p]), np.diag([1.0, -1.0])) - (1 / p + 1 / (1 - p)))
            for p in (0.1, 0.3, 0.5)}
    ok = max(errs.values()) < DIAG_ABS
    report(3, "diagonal QFI", ok,
           ", ".join(f"p={p}: |err|={e:.1e}" for p, e in errs.items()) + f" (limit {DIAG_ABS:g})")
    assert ok


# 5 ---------------------------------------------------------------------------

N5 = list(range(2, 13))


def test_criterion_5_qualitative_orderings(report):
    parts, ok = [], True

    k, g = REGIMES["weak"]
    b_x, _ = fitted_b("x", k, g, N5)
    b_ghz, _ = fitted_b("ghz", k, g, N5)
    b_d0, vals_d0 = fitted_b("dicke-0", k, g, N5)
    weak_ok = b_x >= 1.5 and b_x > b_ghz and b_x > b_d0
    d0 = "no signal (F = 0 at every N)" if b_d0 == -math.inf else f"{b_d0:.3f}"
    parts.append(f"weak: b_X={b_x:.3f} b_GHZ={b_ghz:.3f} b_Dicke0={d0} "
                 f"[{'ok' if weak_ok else 'FAIL'}]")
    ok &= weak_ok

    k, g = REGIMES["strong"]
    f_half = point("dicke", 12, k, g).max_F
    f_d0 = point("dicke-0", 12, k, g).max_F
    f_ghz = point("ghz", 12, k, g).max_F
    strong_ok = f_half > f_d0 and f_half > f_ghz
    parts.append(f"strong N=12: F_Dicke6={f_half:.2f} F_Dicke0={f_d0:.2f} F_GHZ={f_ghz:.2f} "
                 f"[{'ok' if strong_ok else 'FAIL'}]")
    ok &= strong_ok

    exc = {name: fitted_b("excited", k, g, N5)[0] for name, (k, g) in REGIMES.items()}
    exc_ok = all(b <= 1.5 for b in exc.values())
    parts.append("excited b: " + " ".join(f"{nm}={b:.3f}" for nm, b in exc.items())
                 + f" [{'ok' if exc_ok else 'FAIL'}]")
    ok &= exc_ok

    report(5, "qualitative orderings, N=2..12", ok, "; ".join(parts))
    assert ok


# 6 ---------------------------------------------------------------------------

N6 = list(range(2, 11))
DETUNED_PROBES = ["x", "ghz", "dicke-1", "dicke"]


def test_criterion_6_detuning(report):
    parts, ok = [], True
    vals, bs = {}, {}
    for pr in DETUNED_PROBES:
        bs[pr], vals[pr] = fitted_b(pr, 1.0, 1.0, N6, "detuning")
    flat = all(abs(bs[pr]) < 0.5 for pr in ("ghz", "dicke-1", "dicke"))
    parts.append("b: " + " ".join(f"{pr}={bs[pr]:.3f}" for pr in DETUNED_PROBES)
                 + f" [{'ok' if flat else 'FAIL'}]")
    ok &= flat

    losers = [n for i, n in enumerate(N6)
              if not all(vals["x"][i] > vals[pr][i] for pr in ("ghz", "dicke-1", "dicke"))]
    x_best = not losers
    parts.append(f"X largest at every N [{'ok' if x_best else 'FAIL at N=' + str(losers)}]")
    ok &= x_best

    k, g = REGIMES["strong"]
    strong = [point(pr, n, k, g, "detuning").max_F
              for pr in ("x", "ghz", "dicke-1", "dicke", "excited") for n in N6]
    top = max(strong + [v for vs in vals.values() for v in vs])
    bounded = top <= 10.0
    parts.append(f"largest detuning max F = {top:.3f} (bound 10) [{'ok' if bounded else 'FAIL'}]")
    ok &= bounded

    report(6, "detuning at (1,1), N=2..10", ok, "; ".join(parts))
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_7_fitter_recovery(report):
    ns = np.arange(2, 11)
    worst = 0.0
    for a, b, c in [(2, 2, 1), (3, 1, 0), (0.7, 0.5, 2), (1.5, 1.3, -0.4), (0.2, 2.5, 5)]:
        f = fit_power_law(ns, a * ns ** b + c)
        worst = max(worst, abs(f.a - a), abs(f.b - b), abs(f.c - c))
    bs = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = (2 * ns ** 2 + 1) * (1 + 0.01 * rng.standard_normal(len(ns)))
        bs.append(fit_power_law(ns, y).b)
    spread = max(abs(b - 2) for b in bs)
    ok = worst < FIT_EXACT and spread <= FIT_NOISE_BAND
    report(7, "fitter recovery", ok,
           f"noiseless max param error {worst:.1e} (limit {FIT_EXACT:g}); "
           f"1% noise, 100 seeds: b in [{min(bs):.3f}, {max(bs):.3f}] (band +/-{FIT_NOISE_BAND})")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_criterion_8_determinism(report, tmp_path):
    import json
    cfg = {"probes": ["x", "ghz", "dicke"], "n_values": [2, 3, 4, 5],
           "points": [[0.8, 0.8], [3.0, 3.0]], "t_end": 8.0, "n_samples": 81}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    runs = {"serial-a": 1, "serial-b": 1, "parallel": 2}
    codes = {}
    for name, threads in runs.items():
        codes[name] = cli_main(["sweep", "--config", str(path), "--out", str(tmp_path / name),
                                "--threads", str(threads)])
    files = ["results.csv", "fits.csv", "errors.csv"]
    same = {name: all(filecmp.cmp(tmp_path / "serial-a" / f, tmp_path / name / f, shallow=False)
                      for f in files) for name in ("serial-b", "parallel")}
    ok = all(c == 0 for c in codes.values()) and all(same.values())
    report(8, "determinism", ok,
           f"repeat identical: {same['serial-b']}, serial vs 2 workers identical: {same['parallel']}")
    assert ok


# 4 runs last so that it sees every trajectory produced above -----------------

def test_criterion_4_invariants(report):
    if not TRAJECTORIES:
        pytest.skip("no acceptance trajectories in this session")
    worst = {"trace": 0.0, "eig": 0.0, "exc": 0.0, "guard": 0.0}
    bad = []
    for label, n, obs in TRAJECTORIES:
        tr = float(np.abs(obs["trace"] - 1).max())
        eig = float(-min(0.0, obs["min_eig"].min()))
        exc = obs["jz"] + n / 2 + obs["photons"]
        rise = float(max(0.0, np.diff(exc).max())) if len(exc) > 1 else 0.0
        guard = float(obs["top_fock"].max())
        worst = {k: max(worst[k], v) for k, v in
                 zip(worst, (tr, eig, rise, guard))}
        if tr >= TRACE_TOL or eig >= EIG_TOL or rise > EXC_STEP_TOL or guard > GUARD_TOL:
            bad.append(f"N={n} {label}")
    ok = not bad
    report(4, "trace/positivity/excitation invariants", ok,
           f"{len(TRAJECTORIES)} trajectories; max trace drift {worst['trace']:.1e}, "
           f"most negative eigenvalue {-worst['eig']:.1e}, max excitation rise "
           f"{worst['exc']:.1e}, max top-Fock population {worst['guard']:.1e}"
           + (f"; failing: {bad[:5]}" if bad else ""))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
