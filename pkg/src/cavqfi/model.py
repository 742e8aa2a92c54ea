"""Tavis-Cummings model with cavity and local qubit losses on the Dicke blocks.

A :class:`HybridState` stores one dense block per total-spin sector, acting on
``(spin j) (x) (Fock 0..n_cav_max)`` with index ``i_m * (n_cav_max + 1) + n``.
The full N-qubit state is ``sum_j rho_j (x) 1_{d_j} / d_j``, so block traces
add up to the physical trace and the QFI of the blocks equals the QFI of the
full state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .dicke import DickeSpace, emission_amplitudes, enumerate_sectors

PROBE_KINDS = ("ghz", "x", "dicke", "excited", "ground")


class TruncationError(RuntimeError):
    """Population reached the top Fock levels."""


@dataclass(frozen=True)
class SystemParams:
    n_qubits: int
    coupling: float = 1.0
    kappa: float = 0.0
    gamma: float = 0.0
    omega_q: float = 0.0
    omega_c: float = 0.0
    n_cav_max: int | None = None

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError("n_qubits must be a positive integer")
        if self.n_cav_max is None:
            object.__setattr__(self, "n_cav_max", int(self.n_qubits) + 2)
        if not self.coupling > 0:
            raise ValueError("coupling g must be positive")
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def detuning(self) -> float:
        return self.omega_q - self.omega_c

    @property
    def n_fock(self) -> int:
        return self.n_cav_max + 1

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ProbeState:
    """Initial qubit register; the cavity always starts in vacuum.

    ``kind`` is one of ghz, x, dicke, excited, ground. For ``dicke`` the
    excitation count is ``n``; ``n=None`` means floor(N/2), which lets one
    probe label span a sweep over N.
    """

    kind: str
    n: int | None = None

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ValueError(f"unknown probe kind {self.kind!r}")
        if self.n is not None and (self.kind != "dicke" or self.n < 0):
            raise ValueError(f"invalid excitation count for {self.kind}: {self.n}")

    @classmethod
    def parse(cls, text: str) -> "ProbeState":
        text = text.strip().lower()
        if text in ("x", "xpol", "x-polarized"):
            return cls("x")
        if text.startswith("dicke"):
            rest = text[5:].lstrip(":-")
            if rest in ("", "half"):
                return cls("dicke")
            return cls("dicke", int(rest))
        return cls(text)

    @property
    def label(self) -> str:
        if self.kind == "dicke":
            return "dicke-half" if self.n is None else f"dicke-{self.n}"
        return self.kind

    def excitations(self, n_qubits: int) -> int | None:
        """Excitation count for Dicke-like probes, None for superpositions."""
        if self.kind == "ground":
            return 0
        if self.kind == "excited":
            return n_qubits
        if self.kind == "dicke":
            return n_qubits // 2 if self.n is None else self.n
        return None

    def validate(self, n_qubits: int) -> None:
        k = self.excitations(n_qubits)
        if k is not None and k > n_qubits:
            raise ValueError(f"{self.label}: excitation count {k} exceeds N={n_qubits}")

    def amplitudes(self, n_qubits: int) -> np.ndarray:
        """Amplitudes on |N/2, m = k - N/2>, k = 0..N."""
        self.validate(n_qubits)
        amp = np.zeros(n_qubits + 1)
        if self.kind == "ghz":
            amp[0] = amp[-1] = 1 / math.sqrt(2)
        elif self.kind == "x":
            amp[:] = [math.sqrt(math.comb(n_qubits, k)) for k in range(n_qubits + 1)]
            amp /= 2 ** (n_qubits / 2)
        else:
            amp[self.excitations(n_qubits)] = 1.0
        return amp


@dataclass(frozen=True)
class HybridState:
    space: DickeSpace
    n_fock: int
    blocks: tuple[np.ndarray, ...]

    def spin_dims(self):
        return [s.dim for s in self.space.sectors]

    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks))

    def purity(self) -> float:
        # full state has blocks rho_j / d_j repeated d_j times
        return float(sum(np.vdot(b, b).real / s.degeneracy
                         for b, s in zip(self.blocks, self.space.sectors)))

    def jz(self) -> float:
        total = 0.0
        for b, s in zip(self.blocks, self.space.sectors):
            diag = np.diag(b).real.reshape(s.dim, self.n_fock)
            total += float(s.m_values @ diag.sum(axis=1))
        return total

    def photons(self) -> float:
        n = np.arange(self.n_fock)
        return float(sum(np.diag(b).real.reshape(-1, self.n_fock).sum(axis=0) @ n
                         for b in self.blocks))

    def excitations(self) -> float:
        return self.jz() + self.space.n_qubits / 2 + self.photons()

    def fock_populations(self) -> np.ndarray:
        return sum(np.diag(b).real.reshape(-1, self.n_fock).sum(axis=0) for b in self.blocks)

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(b).min() for b in self.blocks))

    def hermiticity_error(self) -> float:
        scale = max(1.0, max(np.abs(b).max() for b in self.blocks))
        return float(max(np.abs(b - b.conj().T).max() for b in self.blocks) / scale)

    def ravel(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    @classmethod
    def from_vector(cls, space: DickeSpace, n_fock: int, vec: np.ndarray) -> "HybridState":
        return cls(space, n_fock, tuple(_split(vec, [s.dim * n_fock for s in space.sectors])))

    def to_full(self) -> np.ndarray:
        """Block-diagonal matrix over sectors (one copy per sector, no multiplicity)."""
        return _block_diag(self.blocks)


def _split(vec, dims):
    out, pos = [], 0
    for d in dims:
        out.append(vec[pos:pos + d * d].reshape(d, d))
        pos += d * d
    return out


def _block_diag(blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for b in blocks:
        d = b.shape[0]
        out[pos:pos + d, pos:pos + d] = b
        pos += d
    return out


def state_dims(space: DickeSpace, n_fock: int) -> list[int]:
    return [s.dim * n_fock for s in space.sectors]


def cavity_ops(n_fock: int):
    a = sp.diags(np.sqrt(np.arange(1, n_fock)), 1, format="csr")
    return a, a.T.tocsr()


def build_hamiltonian(params: SystemParams, space: DickeSpace) -> list[sp.csr_matrix]:
    """Per-sector H = omega_q Jz + omega_c a^dag a + g (a^dag J- + a J+)."""
    a, ad = cavity_ops(params.n_fock)
    num = sp.diags(np.arange(params.n_fock, dtype=float))
    blocks = []
    for k, s in enumerate(space.sectors):
        ops = space.operators(k)
        i_s = sp.identity(s.dim, format="csr")
        i_c = sp.identity(params.n_fock, format="csr")
        h = (params.omega_q * sp.kron(ops.jz, i_c)
             + params.omega_c * sp.kron(i_s, num)
             + params.coupling * (sp.kron(ops.jm, ad) + sp.kron(ops.jp, a)))
        blocks.append(sp.csr_matrix(h, dtype=complex))
    return blocks


def interaction_blocks(space: DickeSpace, n_fock: int) -> list[sp.csr_matrix]:
    """V = a^dag J- + a J+ per sector (H = gV at resonance)."""
    p = SystemParams(space.n_qubits, coupling=1.0, n_cav_max=n_fock - 1)
    return build_hamiltonian(p, space)


class Liouvillian:
    """GKSL generator on the Dicke-block representation.

    Applied blockwise with sparse operators:
    ``drho_j = -i(Heff rho_j - rho_j Heff^dag) + kappa a rho_j a^dag
    + gamma sum_{j'} A_{j'->j} rho_{j'} A_{j'->j}^T`` where
    ``Heff = H - i/2 (kappa a^dag a + gamma (Jz + N/2))``.
    """

    def __init__(self, params: SystemParams, space: DickeSpace, allow_undersized: bool = False):
        if params.n_qubits != space.n_qubits:
            raise ValueError("params and space disagree on N")
        if params.n_cav_max < params.n_qubits and not allow_undersized:
            raise ValueError(
                f"n_cav_max={params.n_cav_max} < N={params.n_qubits}: Fock truncation "
                "cannot hold N excitations")
        self.params = params
        self.space = space
        nf = params.n_fock
        self.n_fock = nf
        self.dims = state_dims(space, nf)
        self.hamiltonian = build_hamiltonian(params, space)
        a, ad = cavity_ops(nf)
        num = sp.diags(np.arange(nf, dtype=float))
        self._heff, self._heff_conj = [], []
        half = space.n_qubits / 2
        n = len(space)
        grid = [[None] * n for _ in range(n)]
        for k, s in enumerate(space.sectors):
            i_s = sp.identity(s.dim)
            i_c = sp.identity(nf)
            loss = (params.kappa * sp.kron(i_s, num)
                    + params.gamma * sp.kron(space.operators(k).jz + half * np.eye(s.dim), i_c))
            heff = (self.hamiltonian[k] - 0.5j * loss).tocsr()
            self._heff.append(heff)
            self._heff_conj.append(heff.conj().tocsr())
            if params.kappa:
                c = sp.kron(i_s, a)
                grid[k][k] = params.kappa * sp.kron(c, c)
        if params.gamma:
            for k, s in enumerate(space.sectors):
                for src in (k - 1, k, k + 1):
                    if not 0 <= src < n:
                        continue
                    amp = emission_amplitudes(space.n_qubits, space.sectors[src].twice_j, s.twice_j)
                    if not np.any(amp):
                        continue
                    c = sp.kron(amp, sp.identity(nf))
                    term = params.gamma * sp.kron(c, c)
                    grid[k][src] = term if grid[k][src] is None else grid[k][src] + term
        for k, d in enumerate(self.dims):
            if grid[k][k] is None:
                grid[k][k] = sp.csr_matrix((d * d, d * d))
        # all jump terms rho -> C rho C^dag as one real sparse matrix on vec(rho)
        self._jumps = sp.bmat(grid, format="csr")
        self._offsets = np.cumsum([0] + [d * d for d in self.dims])
        self._matrix = None

    @property
    def size(self) -> int:
        return int(self._offsets[-1])

    def apply(self, vec: np.ndarray, hermitian: bool = False) -> np.ndarray:
        """Generator on the row-stacked concatenation of blocks.

        ``hermitian=True`` assumes a Hermitian input and computes
        ``rho Heff^dag`` as ``(Heff rho)^dag``.
        """
        out = self._jumps @ vec
        for k, d in enumerate(self.dims):
            sl = slice(self._offsets[k], self._offsets[k + 1])
            rho = vec[sl].reshape(d, d)
            x = self._heff[k] @ rho
            if hermitian:
                blk = -1j * (x - x.conj().T)
            else:
                blk = -1j * x + 1j * (self._heff_conj[k] @ rho.T).T
            out[sl] += blk.ravel()
        return out

    __call__ = apply

    def apply_blocks(self, blocks, hermitian: bool = False):
        vec = np.concatenate([np.asarray(b, dtype=complex).ravel() for b in blocks])
        return _split(self.apply(vec, hermitian), self.dims)

    def apply_state(self, state: HybridState) -> HybridState:
        return HybridState(state.space, state.n_fock, tuple(self.apply_blocks(state.blocks)))

    @property
    def matrix(self) -> sp.csr_matrix:
        """Cached :meth:`superoperator`; the integrator multiplies by this."""
        if self._matrix is None:
            self._matrix = self.superoperator()
        return self._matrix

    def superoperator(self) -> sp.csr_matrix:
        """Explicit sparse matrix of :meth:`apply` (row-stacked vec)."""
        # row-major vec: vec(A X B) = kron(A, B.T) vec(X)
        coherent = sp.block_diag(
            [-1j * sp.kron(h, sp.identity(d)) + 1j * sp.kron(sp.identity(d), hc)
             for h, hc, d in zip(self._heff, self._heff_conj, self.dims)], format="csr")
        return (coherent + self._jumps).tocsr()


def build_liouvillian(params: SystemParams, space: DickeSpace | None = None,
                      allow_undersized: bool = False) -> Liouvillian:
    """Generator for ``params``; ``allow_undersized`` skips the n_cav_max >= N
    check so that the truncation guard itself can be exercised."""
    return Liouvillian(params, space or enumerate_sectors(params.n_qubits), allow_undersized)


def prepare_probe(probe: ProbeState, params: SystemParams, space: DickeSpace | None = None) -> HybridState:
    space = space or enumerate_sectors(params.n_qubits)
    nf = params.n_fock
    psi = np.kron(probe.amplitudes(params.n_qubits), np.eye(nf)[0]).astype(complex)
    blocks = [np.outer(psi, psi.conj())]
    blocks += [np.zeros((d, d), dtype=complex) for d in state_dims(space, nf)[1:]]
    return HybridState(space, nf, tuple(blocks))


def truncation_guard(state: HybridState, params: SystemParams | None = None) -> float:
    """Population in the two highest Fock levels."""
    return float(state.fock_populations()[-2:].sum())
