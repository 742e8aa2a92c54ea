"""Permutation-symmetric state space of N qubits.

Total-spin sectors are labelled internally by ``twice_j = 2j`` so that
half-integer labels compare exactly. Within a sector the basis is ordered by
ascending m, i.e. index ``i`` holds ``m = -j + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_QUBITS = 24


def _twice(j) -> int:
    tj = round(2 * float(j))
    if abs(2 * float(j) - tj) > 1e-9:
        raise ValueError(f"j={j} is not a half-integer")
    return tj


@lru_cache(maxsize=None)
def _degeneracy_twice(n: int, tj: int) -> int:
    # Add qubits one at a time: spin j for n+1 qubits comes from j -/+ 1/2 for n.
    if n == 1:
        return 1 if tj == 1 else 0
    if tj < 0 or tj > n or (n - tj) % 2:
        return 0
    total = _degeneracy_twice(n - 1, tj + 1)
    if tj >= 1:
        total += _degeneracy_twice(n - 1, tj - 1)
    return total


def _check_n(n_qubits: int, max_qubits: int = MAX_QUBITS) -> int:
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"n_qubits must be a positive integer, got {n_qubits}")
    if n_qubits > max_qubits:
        raise ValueError(f"n_qubits={n_qubits} exceeds the dimension guard ({max_qubits})")
    return int(n_qubits)


def _check_sector(n_qubits: int, tj: int) -> None:
    if tj < 0 or tj > n_qubits or (n_qubits - tj) % 2:
        raise ValueError(f"j={tj / 2} is not on the spin ladder of N={n_qubits}")


def degeneracy(n_qubits: int, j) -> int:
    """Multiplicity d_j of the spin-j representation in N spin-1/2 particles."""
    n = _check_n(n_qubits)
    tj = _twice(j)
    _check_sector(n, tj)
    return _degeneracy_twice(n, tj)


@dataclass(frozen=True)
class SectorInfo:
    twice_j: int
    degeneracy: int

    @property
    def j(self) -> float:
        return self.twice_j / 2

    @property
    def dim(self) -> int:
        return self.twice_j + 1

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim) - self.j


@dataclass(frozen=True)
class OperatorBlocks:
    """Collective J+, J-, Jz restricted to one spin-j sector."""

    jp: np.ndarray
    jm: np.ndarray
    jz: np.ndarray


def _ladder_blocks(tj: int) -> OperatorBlocks:
    j = tj / 2
    m = np.arange(tj + 1) - j
    # <j, m-1| J- |j, m> sits at (i-1, i) in ascending-m order
    lower = np.sqrt(j * (j + 1) - m[1:] * (m[1:] - 1))
    jm = np.diag(lower, k=1)
    jp = jm.T.copy()
    jz = np.diag(m)
    for a in (jp, jm, jz):
        a.setflags(write=False)
    return OperatorBlocks(jp=jp, jm=jm, jz=jz)


@dataclass(frozen=True)
class DickeSpace:
    n_qubits: int
    sectors: tuple[SectorInfo, ...]
    _ops: tuple[OperatorBlocks, ...] = field(repr=False, compare=False, default=())

    def __len__(self) -> int:
        return len(self.sectors)

    def __iter__(self):
        return iter(self.sectors)

    def index(self, j) -> int:
        """Position of sector j in ``sectors`` (top sector is 0)."""
        tj = _twice(j)
        _check_sector(self.n_qubits, tj)
        return (self.n_qubits - tj) // 2

    def operators(self, k: int) -> OperatorBlocks:
        return self._ops[k]

    @property
    def hilbert_dim(self) -> int:
        return sum(s.degeneracy * s.dim for s in self.sectors)


def enumerate_sectors(n_qubits: int, max_qubits: int = MAX_QUBITS) -> DickeSpace:
    n = _check_n(n_qubits, max_qubits)
    sectors = tuple(
        SectorInfo(twice_j=tj, degeneracy=_degeneracy_twice(n, tj))
        for tj in range(n, -1, -2)
    )
    ops = tuple(_ladder_blocks(s.twice_j) for s in sectors)
    return DickeSpace(n_qubits=n, sectors=sectors, _ops=ops)


def local_emission_coefficients(n_qubits: int, j, m) -> tuple[float, float, float]:
    """Branching weights of sum_i sigma_-^(i) . sigma_+^(i) out of |j, m>.

    Returns the weights landing on ``(j-1, m-1)``, ``(j, m-1)`` and
    ``(j+1, m-1)``, for density blocks normalised so that the full state is
    ``sum_j rho_j (x) 1_{d_j} / d_j``. The weights sum to ``m + N/2``, the
    number of excited qubits, which makes the dissipator trace preserving.
    Sectors off the ladder get weight zero.
    """
    n = _check_n(n_qubits)
    tj = _twice(j)
    _check_sector(n, tj)
    tm = _twice(m)
    if abs(tm) > tj or (tj - tm) % 2:
        raise ValueError(f"m={m} is not valid in sector j={j}")
    j = tj / 2
    m = tm / 2
    half = n / 2
    down = same = up = 0.0
    if tj >= 2:
        down = (half + j + 1) / (2 * j * (2 * j + 1)) * (j + m) * (j + m - 1)
    if tj >= 1:
        same = (half + 1) / (2 * j * (j + 1)) * (j + m) * (j - m + 1)
    if tj + 2 <= n:
        up = (half - j) / (2 * (j + 1) * (2 * j + 1)) * (j - m + 1) * (j - m + 2)
    # clip roundoff on vanishing products
    return (max(down, 0.0), max(same, 0.0), max(up, 0.0))


def emission_amplitudes(n_qubits: int, tj_from: int, tj_to: int) -> np.ndarray:
    """Matrix A with ``rho_to += A rho_from A^T`` for the local emission jump.

    Entries are square roots of :func:`local_emission_coefficients`; the
    factorisation over (m, m') follows from the Wigner-Eckart theorem, with
    all relevant Clebsch-Gordan signs positive.
    """
    branch = {tj_from - 2: 0, tj_from: 1, tj_from + 2: 2}[tj_to]
    a = np.zeros((tj_to + 1, tj_from + 1))
    j_from = tj_from / 2
    j_to = tj_to / 2
    for i in range(tj_from + 1):
        m = i - j_from
        w = local_emission_coefficients(n_qubits, j_from, m)[branch]
        if w > 0.0:
            a[int(round(m - 1 + j_to)), i] = np.sqrt(w)
    return a
