"""Quantum Fisher information of the evolved probe and its optimum over time."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dicke import enumerate_sectors
from .evolve import IntegratorStats, TimeGrid, evolve_many
from .model import (HybridState, ProbeState, SystemParams, build_liouvillian,
                    prepare_probe)

EPS_EIG = 1e-10
PAIR_CUTOFF = 1e-12
REFINE_TOL = 1e-3
STEP_CHECK_RTOL = 1e-3


class QfiWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimationTarget:
    """Parameter being estimated; ``delta`` is the finite-difference step in units of g."""

    kind: str = "coupling"
    delta: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("coupling", "detuning"):
            raise ValueError(f"unknown estimation target {self.kind!r}")
        if not self.delta > 0:
            raise ValueError("finite-difference step must be positive")

    @classmethod
    def parse(cls, text: str, delta: float = 1e-4) -> "EstimationTarget":
        aliases = {"g": "coupling", "coupling": "coupling",
                   "delta": "detuning", "detuning": "detuning"}
        return cls(aliases[text.strip().lower()], delta)

    def step(self, params: SystemParams) -> float:
        return self.delta * params.coupling

    def shifted(self, params: SystemParams, sign: float, scale: float = 1.0) -> SystemParams:
        h = sign * scale * self.step(params)
        if self.kind == "coupling":
            if params.coupling + h <= 0:
                raise ValueError("finite-difference step pushes g below zero")
            return params.with_(coupling=params.coupling + h)
        return params.with_(omega_q=params.omega_q + h)

    @property
    def units(self) -> str:
        return "1/g^2" if self.kind == "coupling" else "1/Delta-units^2"


def _check_hermitian(m: np.ndarray, name: str, tol: float = 1e-8) -> None:
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.conj().T).max() > tol * scale:
        raise ValueError(f"{name} is not Hermitian")


def qfi_blocks(rho_blocks: Sequence[np.ndarray], drho_blocks: Sequence[np.ndarray],
               eps_eig: float = EPS_EIG, pair_cutoff: float = PAIR_CUTOFF,
               check: bool = True, return_min: bool = False, multiplicities=None):
    """Sum of 2 |<a|drho|b>|^2 / (l_a + l_b) over eigenpairs of each block.

    Eigenvalues below ``eps_eig`` times the total trace count as zero and
    only pairs with ``l_a + l_b > pair_cutoff`` contribute. A block with
    multiplicity d stands for d copies of ``rho/d``; floor and cutoff are then
    applied to ``l/d``, which keeps the sum identical to the one over the
    full block-diagonal matrix.
    """
    if len(rho_blocks) != len(drho_blocks):
        raise ValueError("rho and drho have different block structure")
    if multiplicities is None:
        multiplicities = [1] * len(rho_blocks)
    total_trace = sum(float(np.trace(b).real) for b in rho_blocks)
    base_floor = eps_eig * total_trace
    f = 0.0
    lam_min = 0.0
    for rho, drho, mult in zip(rho_blocks, drho_blocks, multiplicities):
        floor = base_floor * mult
        if rho.shape != drho.shape:
            raise ValueError("rho and drho blocks differ in shape")
        if check:
            _check_hermitian(rho, "rho")
            _check_hermitian(drho, "drho")
        if np.trace(rho).real < floor and not return_min:
            continue  # every eigenvalue is below the floor
        lam, vec = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        lam_min = min(lam_min, float(lam[0]))
        lam = np.where(lam < floor, 0.0, lam)
        m = vec.conj().T @ drho @ vec
        den = lam[:, None] + lam[None, :]
        mask = den > pair_cutoff * mult
        f += float(np.sum(2.0 * np.abs(m[mask]) ** 2 / den[mask]))
    return (f, lam_min) if return_min else f


def qfi_at_time(rho, drho, eps_eig: float = EPS_EIG) -> float:
    """QFI of a :class:`HybridState` (or a plain matrix) given its derivative."""
    if isinstance(rho, HybridState):
        mult = [s.degeneracy for s in rho.space.sectors]
        return qfi_blocks(rho.blocks, drho.blocks, eps_eig, multiplicities=mult)
    return qfi_blocks([np.asarray(rho)], [np.asarray(drho)], eps_eig)


def crb_variance(qfi: float, n_experiments: int = 1) -> float:
    """Cramer-Rao lower bound 1/(M F) on the estimator variance."""
    if not qfi > 0:
        raise ValueError("QFI must be positive")
    if n_experiments < 1:
        raise ValueError("need at least one experiment")
    return 1.0 / (n_experiments * qfi)


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = REFINE_TOL):
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``."""
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    best = (fc, c) if fc >= fd else (fd, d)
    while b - a > tol:
        if fc >= fd:  # ties shrink toward earlier time
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
            cand = (fc, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
            cand = (fd, d)
        if cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
            best = cand
    return best[1], best[0]


def max_qfi(times, values, evaluate: Callable[[float], float] | None = None,
            tol: float = REFINE_TOL) -> tuple[float, float]:
    """Maximum of a sampled F(t) and the time where it occurs.

    The coarse argmax (earliest on ties) is refined by golden-section search
    on ``evaluate`` over the two neighbouring grid intervals when given.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 3 or len(times) != len(values):
        raise ValueError("need at least three samples")
    i = int(np.argmax(values))
    if i == len(times) - 1:
        warnings.warn(f"QFI maximum at the final grid time t={times[-1]:g}; "
                      "horizon may be too short", QfiWarning, stacklevel=2)
    best_f, best_t = float(values[i]), float(times[i])
    if evaluate is None or best_f == 0.0:
        return best_f, best_t
    lo = times[max(i - 1, 0)]
    hi = times[min(i + 1, len(times) - 1)]
    t_ref, f_ref = golden_max(evaluate, lo, hi, tol)
    if f_ref > best_f:
        return float(f_ref), float(t_ref)
    return best_f, best_t


@dataclass
class QfiTrace:
    times: np.ndarray
    values: np.ndarray
    max_f: float
    t_at_max: float
    observables: dict = field(default_factory=dict)
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    step_check: tuple[float, float] | None = None

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("negative QFI")


class _System:
    """What the pipeline needs from a basis: generators, start state, observables."""

    def __init__(self, make_generator, y0, observe, multiplicities=None):
        self.make_generator = make_generator
        self.y0 = y0
        self.observe = observe
        self.multiplicities = multiplicities


def dicke_system(params: SystemParams, probe: ProbeState) -> _System:
    space = enumerate_sectors(params.n_qubits)
    rho0 = prepare_probe(probe, params, space)

    def observe(y, lam_min):
        s = HybridState.from_vector(space, params.n_fock, y)
        return {"jz": s.jz(), "photons": s.photons(), "purity": s.purity(),
                "trace": s.trace(), "min_eig": lam_min,
                "top_fock": float(s.fock_populations()[-2:].sum())}

    return _System(lambda p: build_liouvillian(p, space), rho0.ravel(), observe,
                   [sec.degeneracy for sec in space.sectors])


def _blocks(y, dims):
    out, pos = [], 0
    for d in dims:
        out.append(y[pos:pos + d * d].reshape(d, d))
        pos += d * d
    return out


def _split_qfi(dims, y0, yp, ym, h, eps_eig, mult=None):
    r = _blocks(y0, dims)
    d = _blocks((yp - ym) / (2 * h), dims)
    return qfi_blocks(r, d, eps_eig, check=False, return_min=True, multiplicities=mult)


def qfi_pipeline(system: _System, params: SystemParams, target: EstimationTarget,
                 grid: TimeGrid, rtol: float = 1e-8, atol: float = 1e-11,
                 eps_eig: float = EPS_EIG, refine: bool = True,
                 step_check: bool = True) -> QfiTrace:
    """Evolve rho(theta), rho(theta +/- delta) together and trace F(t)."""
    h = target.step(params)
    gens = [system.make_generator(params),
            system.make_generator(target.shifted(params, +1)),
            system.make_generator(target.shifted(params, -1))]
    dims = gens[0].dims
    times = grid.times
    stats = IntegratorStats()
    values = np.zeros(len(times))
    obs: dict[str, list] = {}
    best, prev, anchor = -1.0, None, None
    for i, (t, ys) in enumerate(evolve_many(gens, [system.y0] * 3, times, rtol, atol, stats)):
        f, lam_min = _split_qfi(dims, *ys, h, eps_eig, system.multiplicities)
        values[i] = f
        for k, v in system.observe(ys[0], lam_min).items():
            obs.setdefault(k, []).append(v)
        if f > best:
            best = f
            anchor = prev if prev is not None else (t, np.concatenate(ys))
        prev = (t, np.concatenate(ys))
    observables = {k: np.asarray(v) for k, v in obs.items()}

    evaluate = None
    if refine:
        t_a, y_a = anchor
        size = gens[0].size

        def evaluate(t):
            if t <= t_a:
                ys = [y_a[c * size:(c + 1) * size] for c in range(3)]
            else:
                *_, (_, ys) = evolve_many(gens, [y_a[c * size:(c + 1) * size] for c in range(3)],
                                          [t_a, t], rtol, atol, stats)
            return _split_qfi(dims, *ys, h, eps_eig, system.multiplicities)[0]

    with warnings.catch_warnings():
        warnings.simplefilter("always", QfiWarning)
        max_f, t_max = max_qfi(times, values, evaluate)
    trace = QfiTrace(times, values, max_f, t_max, observables, stats)
    if step_check and max_f > 0 and t_max > 0:
        trace.step_check = _halved_step_check(system, params, target, t_max, max_f, rtol, atol, eps_eig)
    return trace


def _halved_step_check(system, params, target, t_max, f_ref, rtol, atol, eps_eig):
    h = 0.5 * target.step(params)
    gens = [system.make_generator(params),
            system.make_generator(target.shifted(params, +1, 0.5)),
            system.make_generator(target.shifted(params, -1, 0.5))]
    *_, (_, ys) = evolve_many(gens, [system.y0] * 3, [0.0, t_max], rtol, atol)
    f_half = _split_qfi(gens[0].dims, *ys, h, eps_eig, system.multiplicities)[0]
    if abs(f_half - f_ref) > STEP_CHECK_RTOL * abs(f_ref):
        warnings.warn(f"finite-difference step check failed at t={t_max:.4g}: "
                      f"F(delta)={f_ref:.8g}, F(delta/2)={f_half:.8g}", QfiWarning, stacklevel=3)
    return f_ref, f_half


def qfi_trace(params: SystemParams, probe: ProbeState, target: EstimationTarget | None = None,
              grid: TimeGrid | None = None, **kwargs) -> QfiTrace:
    """Time-resolved QFI in the Dicke-block representation."""
    probe.validate(params.n_qubits)
    return qfi_pipeline(dicke_system(params, probe), params, target or EstimationTarget(),
                        grid or TimeGrid(), **kwargs)


def drho_dtheta(params: SystemParams, probe: ProbeState, target: EstimationTarget,
                grid: TimeGrid | Sequence[float], rtol: float = 1e-8, atol: float = 1e-11,
                scale: float = 1.0):
    """States and central-difference derivatives at each grid time.

    Returns ``(times, rho_states, drho_states)`` as lists of HybridState.
    """
    space = enumerate_sectors(params.n_qubits)
    rho0 = prepare_probe(probe, params, space)
    times = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    h = scale * target.step(params)
    gens = [build_liouvillian(p, space) for p in
            (params, target.shifted(params, +1, scale), target.shifted(params, -1, scale))]
    rhos, drhos = [], []
    for _, (y0, yp, ym) in evolve_many(gens, [rho0.ravel()] * 3, times, rtol, atol):
        rhos.append(HybridState.from_vector(space, params.n_fock, y0.copy()))
        drhos.append(HybridState.from_vector(space, params.n_fock, (yp - ym) / (2 * h)))
    return times, rhos, drhos
