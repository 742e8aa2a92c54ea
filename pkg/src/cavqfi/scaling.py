"""Power-law fits y(N) = a N^b + c of the maximum QFI, and exponent maps."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

B_STARTS = (0.5, 1.0, 1.5, 2.0)
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ScalingFit:
    a: float | None
    b: float | None
    c: float | None
    residual_norm: float
    stderr: tuple[float, float, float] | None
    converged: bool
    message: str = ""

    def predict(self, ns):
        if not self.converged:
            raise ValueError("fit did not converge")
        return self.a * np.asarray(ns, dtype=float) ** self.b + self.c


def _model(p, n):
    a, b, c = p
    return a * n ** b + c


def _jac(p, n):
    a, b, _ = p
    nb = n ** b
    return np.column_stack([nb, a * nb * np.log(n), np.ones_like(n)])


def _diverged(msg, res=np.inf):
    return ScalingFit(None, None, None, float(res), None, False, msg)


def fit_power_law(ns: Sequence[float], values: Sequence[float],
                  b_starts: Sequence[float] = B_STARTS) -> ScalingFit:
    """Levenberg-Marquardt fit of ``a N^b + c`` with several starting exponents.

    Each start uses ``a0`` from the endpoint slope and ``c0 = min(values)``.
    The smallest residual wins; near-ties go to the smaller ``|b|``.
    """
    n = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.shape != y.shape:
        raise ValueError("ns and values differ in length")
    if len(np.unique(n)) < 4:
        raise ValueError("need at least four distinct N values")
    if np.any(n <= 0):
        raise ValueError("N values must be positive")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("values must be positive and finite")
    order = np.argsort(n)
    n, y = n[order], y[order]

    candidates = []
    for b0 in b_starts:
        span = n[-1] ** b0 - n[0] ** b0
        a0 = (y[-1] - y[0]) / span if span else 1.0
        if a0 == 0:
            a0 = y.mean() / n.mean() ** b0
        p0 = np.array([a0, b0, y.min()])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = least_squares(lambda p: _model(p, n) - y, p0,
                                    jac=lambda p: _jac(p, n), method="lm",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        except (ValueError, FloatingPointError) as exc:
            candidates.append((np.inf, None, str(exc)))
            continue
        ok = res.status > 0 and np.all(np.isfinite(res.x)) and np.isfinite(res.cost)
        rnorm = float(np.linalg.norm(res.fun)) if ok else np.inf
        candidates.append((rnorm, res if ok else None, res.message))

    finite = [c for c in candidates if c[1] is not None]
    if not finite:
        return _diverged("no start converged: " + "; ".join(str(c[2]) for c in candidates))
    best_r = min(c[0] for c in finite)
    tol = TIE_RTOL * max(best_r, np.linalg.norm(y) * 1e-6)
    tied = [c for c in finite if c[0] <= best_r + tol]
    rnorm, res, _ = min(tied, key=lambda c: abs(c[1].x[1]))
    a, b, c = (float(v) for v in res.x)
    return ScalingFit(a, b, c, rnorm, _stderr(res, len(n)), True, res.message)


def _stderr(res, n_points):
    dof = n_points - 3
    if dof <= 0:
        return None
    j = res.jac
    s2 = 2 * res.cost / dof
    try:
        cov = np.linalg.inv(j.T @ j) * s2
    except np.linalg.LinAlgError:
        return None
    return tuple(float(v) for v in np.sqrt(np.clip(np.diag(cov), 0, None)))


@dataclass
class ExponentMap:
    probe: str
    kappas: list[float]
    gammas: list[float]
    b: np.ndarray  # shape (len(gammas), len(kappas)); NaN where diverged
    converged: np.ndarray
    fits: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def rows(self):
        for i, gm in enumerate(self.gammas):
            for k, kp in enumerate(self.kappas):
                yield {"probe": self.probe, "kappa_over_g": kp, "gamma_over_g": gm,
                       "b": None if not self.converged[i, k] else float(self.b[i, k]),
                       "status": "converged" if self.converged[i, k] else "diverged"}


def exponent_map(probe, kappa_grid: Sequence[float], gamma_grid: Sequence[float],
                 n_range: Sequence[int], max_qfi_fn: Callable | None = None,
                 bounds: tuple[float, float] = (0.2, 3.0), **kwargs) -> ExponentMap:
    """Fitted exponent b at each (kappa/g, gamma/g) grid point.

    ``max_qfi_fn(n, kappa, gamma)`` returns the maximum QFI; by default the
    full Dicke-basis pipeline runs with ``g = 1``. Failing points are
    recorded and the map still completes.
    """
    from .model import ProbeState, SystemParams
    from .qfi import qfi_trace

    kappas, gammas = list(kappa_grid), list(gamma_grid)
    if not kappas or not gammas:
        raise ValueError("empty decay-rate grid")
    lo, hi = bounds
    for v in kappas + gammas:
        if not lo <= v <= hi:
            raise ValueError(f"decay rate {v} outside configured range [{lo}, {hi}]")
    if isinstance(probe, str):
        probe = ProbeState.parse(probe)
    if max_qfi_fn is None:
        def max_qfi_fn(n, kappa, gamma):
            return qfi_trace(SystemParams(n, 1.0, kappa, gamma), probe, **kwargs).max_f

    b = np.full((len(gammas), len(kappas)), np.nan)
    conv = np.zeros_like(b, dtype=bool)
    fits, errors = {}, {}
    for i, gm in enumerate(gammas):
        for k, kp in enumerate(kappas):
            try:
                vals = [max_qfi_fn(n, kp, gm) for n in n_range]
                fit = fit_power_law(list(n_range), vals)
            except Exception as exc:  # recorded per point, map continues
                errors[(kp, gm)] = f"{type(exc).__name__}: {exc}"
                continue
            fits[(kp, gm)] = fit
            if fit.converged:
                b[i, k] = fit.b
                conv[i, k] = True
    return ExponentMap(probe.label, kappas, gammas, b, conv, fits, errors)
