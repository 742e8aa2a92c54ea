"""Adaptive Runge-Kutta integration of the master equation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import RK45

from .model import HybridState, Liouvillian, TruncationError

GUARD_LIMIT = 1e-8


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float = 20.0
    n_samples: int = 1000

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.n_samples < 2:
            raise ValueError("need at least two samples")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_samples)


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    nfev: int = 0

    def add(self, other: "IntegratorStats") -> None:
        self.steps += other.steps
        self.rejected += other.rejected
        self.nfev += other.nfev


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[HybridState]
    stats: IntegratorStats = field(default_factory=IntegratorStats)


def top_fock_indices(liouvillian: Liouvillian) -> np.ndarray:
    """Flat indices of diagonal entries with the two highest photon numbers."""
    nf = liouvillian.n_fock
    idx, pos = [], 0
    for d in liouvillian.dims:
        rows = np.arange(d)
        rows = rows[rows % nf >= nf - 2]
        idx.append(pos + rows * d + rows)
        pos += d * d
    return np.concatenate(idx)


# Dormand-Prince 5(4) tableau with Shampine's dense-output polynomial
_A = RK45.A
_B = RK45.B
_C = RK45.C
_E = RK45.E
_P = RK45.P
_ORDER = 4  # error-estimator order, sets the step-size exponent
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def _rms(x):
    x = np.asarray(x)
    r = x.view(np.float64) if np.iscomplexobj(x) else x
    return float(np.sqrt(np.dot(r, r) / x.size))


def _initial_step(rhs, t0, y0, f0, direction_end, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_end - t0)
    f1 = rhs(y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / (_ORDER + 1))
    return min(100 * h0, h1, direction_end - t0)


def integrate_vector(rhs: Callable, y0: np.ndarray, times: Sequence[float],
                     rtol: float = 1e-8, atol: float = 1e-11,
                     check: Callable | None = None,
                     stats: IntegratorStats | None = None) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, y(t))`` at each requested time (t[0] is the start).

    Adaptive Dormand-Prince 5(4) stepping; grid points between accepted
    steps come from the 4th-order continuous extension. ``check(t, y)``
    runs after every accepted step.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    stats = stats if stats is not None else IntegratorStats()
    y = np.array(y0, dtype=complex)
    yield float(times[0]), y.copy()
    if len(times) == 1:
        return
    t, t_end = float(times[0]), float(times[-1])
    n_stages = len(_C)
    K = np.empty((n_stages + 1, y.size), dtype=complex)
    Kr = K.view(np.float64)  # real view: stage sums become BLAS gemv
    stage = np.empty_like(y)
    stage_r = stage.view(np.float64)
    K[0] = rhs(y)
    nfev = 1
    h = _initial_step(rhs, t, y, K[0], t_end, rtol, atol)
    nfev += 1
    abs_y = np.abs(y)
    k = 1
    while k < len(times):
        min_step = 10 * np.spacing(t)
        rejected = False
        while True:
            if h < min_step:
                raise IntegrationError(f"step size underflow at t={t:.6g} (h={h:.3g})")
            h = min(h, t_end - t)
            t_new = t + h
            for s in range(1, n_stages):
                np.dot(h * _A[s, :s], Kr[:s], out=stage_r)
                stage += y
                K[s] = rhs(stage)
            np.dot(h * _B, Kr[:n_stages], out=stage_r)
            y_new = stage + y
            K[n_stages] = rhs(y_new)
            nfev += n_stages
            np.dot(h * _E, Kr, out=stage_r)
            abs_new = np.abs(y_new)
            scale = np.maximum(abs_y, abs_new)
            scale *= rtol
            scale += atol
            stage /= scale
            err_norm = _rms(stage)
            if err_norm < 1:
                factor = MAX_FACTOR if err_norm == 0 else min(
                    MAX_FACTOR, SAFETY * err_norm ** (-1 / (_ORDER + 1)))
                if rejected:
                    factor = min(1.0, factor)
                break
            stats.rejected += 1
            rejected = True
            h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1 / (_ORDER + 1)))
        stats.steps += 1
        if check is not None:
            check(t_new, y_new)
        while k < len(times) and times[k] <= t_new:
            if times[k] == t_new:
                out = y_new.copy()
            else:
                x = (times[k] - t) / h
                coef = _P @ np.cumprod(np.full(_P.shape[1], x))
                out = y + (h * coef @ Kr).view(complex)
            yield float(times[k]), out
            k += 1
        t, y, abs_y = t_new, y_new, abs_new
        K[0] = K[n_stages]
        h *= factor
    stats.nfev += nfev


class _Guard:
    def __init__(self, indices, n_copies, size, limit=GUARD_LIMIT):
        self.indices = np.concatenate([indices + c * size for c in range(n_copies)])
        self.n_copies = n_copies
        self.limit = limit

    def __call__(self, t, y):
        pops = y[self.indices].real.reshape(self.n_copies, -1).sum(axis=1)
        self._raise_if(t, pops.max())

    def _raise_if(self, t, worst):
        worst = float(worst)
        if worst > self.limit:
            raise TruncationError(
                f"top Fock levels hold population {worst:.3e} > {self.limit:g} at t={t:.6g}; "
                "increase n_cav_max")


class _ReducedGuard(_Guard):
    def __init__(self, positions, n_copies, limit=GUARD_LIMIT):
        self.positions = positions
        self.n_copies = n_copies
        self.limit = limit

    def __call__(self, t, y):
        vals = np.where(self.positions >= 0, y[self.positions].real, 0.0)
        self._raise_if(t, vals.reshape(self.n_copies, -1).sum(axis=1).max())


def evolve_many(liouvillians: Sequence[Liouvillian], y0s: Sequence[np.ndarray], times,
                rtol=1e-8, atol=1e-11, stats: IntegratorStats | None = None,
                guard: bool = True) -> Iterator[tuple[float, list[np.ndarray]]]:
    """Integrate several copies of the same-shaped system with one step control.

    Sharing the step sequence keeps integrator error smooth across copies,
    which matters when copies are differenced for a parameter derivative.
    """
    size = liouvillians[0].size
    if any(L.size != size for L in liouvillians):
        raise ValueError("all generators must act on the same block layout")
    n = len(liouvillians)

    mat = sp.block_diag([L.matrix for L in liouvillians], format="csr")
    y0 = np.concatenate([np.asarray(v, dtype=complex) for v in y0s])
    active = reachable(mat, y0 != 0)
    sub = mat[active][:, active].tocsr()

    def rhs(y):
        return sub @ y

    check = None
    if guard:
        _Guard(top_fock_indices(liouvillians[0]), n, size)(float(np.asarray(times)[0]), y0)
        # guard entries in reduced coordinates; unreachable ones stay exactly zero
        position = np.full(y0.size, -1)
        position[active] = np.arange(active.sum())
        watched = _Guard(top_fock_indices(liouvillians[0]), n, size).indices
        check = _ReducedGuard(position[watched], n)

    for t, y in integrate_vector(rhs, y0[active], times, rtol, atol, check, stats):
        out = np.zeros(y0.size, dtype=complex)
        out[active] = y
        yield t, [out[c * size:(c + 1) * size] for c in range(n)]


def reachable(mat: sp.csr_matrix, seed: np.ndarray) -> np.ndarray:
    """Entries the generator can ever feed from the initial support."""
    pattern = sp.csr_matrix((np.ones(mat.nnz), mat.indices, mat.indptr), shape=mat.shape)
    active = np.asarray(seed, dtype=bool).copy()
    while True:
        grown = active | (pattern @ active.astype(float) > 0)
        if np.array_equal(grown, active):
            return active
        active = grown


def integrate(L: Liouvillian, rho0: HybridState, grid: TimeGrid | Sequence[float],
              rtol: float = 1e-8, atol: float = 1e-11) -> Trajectory:
    """Evolve ``rho0`` and keep the state at every grid time."""
    times = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    stats = IntegratorStats()
    states = []
    for _, (y,) in evolve_many([L], [rho0.ravel()], times, rtol, atol, stats):
        states.append(HybridState.from_vector(rho0.space, rho0.n_fock, y))
    return Trajectory(times=times, states=states, stats=stats)
