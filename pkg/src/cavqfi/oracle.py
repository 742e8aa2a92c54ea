"""Brute-force reference on the full 2^N (x) Fock space.

Nothing here uses the Dicke machinery: operators are tensor products of
single-qubit matrices and the dissipator has one sigma_- channel per qubit.
Basis index is ``bits * n_fock + n`` where bit i (most significant first)
is 1 for an excited qubit.
"""
from __future__ import annotations

import itertools
import math
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .model import ProbeState, SystemParams

MAX_ORACLE_QUBITS = 5

_SM = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))  # |0><1|
_SZ = sp.csr_matrix(np.diag([-1.0, 1.0]))


def _site(op, i, n):
    mats = [sp.identity(2, format="csr")] * n
    mats[i] = op
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


class FullOperators:
    def __init__(self, n_qubits: int, n_fock: int):
        self.n_qubits = n_qubits
        self.n_fock = n_fock
        a = sp.diags(np.sqrt(np.arange(1, n_fock)), 1, format="csr")
        i_q = sp.identity(2 ** n_qubits, format="csr")
        i_c = sp.identity(n_fock, format="csr")
        self.a = sp.kron(i_q, a, format="csr")
        self.num = (self.a.T @ self.a).tocsr()
        self.sm = [sp.kron(_site(_SM, i, n_qubits), i_c, format="csr") for i in range(n_qubits)]
        self.sz = [sp.kron(_site(_SZ, i, n_qubits), i_c, format="csr") for i in range(n_qubits)]
        self.jz = 0.5 * reduce(lambda x, y: x + y, self.sz)

    def hamiltonian(self, p: SystemParams) -> sp.csr_matrix:
        h = 0.5 * p.omega_q * sum(self.sz) + p.omega_c * self.num
        for s in self.sm:
            h = h + p.coupling * (self.a.T @ s + self.a @ s.T)
        return sp.csr_matrix(h, dtype=complex)


class FullLiouvillian:
    """Literal GKSL generator with per-qubit emission channels."""

    def __init__(self, params: SystemParams, max_qubits: int = MAX_ORACLE_QUBITS):
        if params.n_qubits > max_qubits:
            raise ValueError(f"oracle is capped at N={max_qubits}, got N={params.n_qubits}")
        if params.n_cav_max < params.n_qubits:
            raise ValueError("n_cav_max must be at least N")
        self.params = params
        self.ops = FullOperators(params.n_qubits, params.n_fock)
        self.n_fock = params.n_fock
        dim = 2 ** params.n_qubits * params.n_fock
        self.dims = [dim]
        self.size = dim * dim
        self.hamiltonian = self.ops.hamiltonian(params)
        self.c_ops = []
        if params.kappa:
            self.c_ops.append(math.sqrt(params.kappa) * self.ops.a)
        if params.gamma:
            self.c_ops += [math.sqrt(params.gamma) * s for s in self.ops.sm]
        loss = sp.csr_matrix((dim, dim))
        jumps = sp.csr_matrix((self.size, self.size))
        for c in self.c_ops:
            loss = loss + c.T.conj() @ c
            jumps = jumps + sp.kron(c, c.conj())
        self._heff = (self.hamiltonian - 0.5j * loss).tocsr()
        self._heff_conj = self._heff.conj().tocsr()
        self._jumps = jumps.tocsr()
        self._matrix = None

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = self.superoperator()
        return self._matrix

    def apply(self, vec: np.ndarray, hermitian: bool = False) -> np.ndarray:
        d = self.dims[0]
        rho = vec.reshape(d, d)
        x = self._heff @ rho
        if hermitian:
            blk = -1j * (x - x.conj().T)
        else:
            blk = -1j * x + 1j * (self._heff_conj @ rho.T).T
        return self._jumps @ vec + blk.ravel()

    __call__ = apply

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        d = self.dims[0]
        return self.apply(np.asarray(rho, dtype=complex).ravel()).reshape(d, d)

    def superoperator(self) -> sp.csr_matrix:
        d = self.dims[0]
        eye = sp.identity(d, format="csr")
        return (-1j * sp.kron(self._heff, eye) + 1j * sp.kron(eye, self._heff_conj)
                + self._jumps).tocsr()


def full_liouvillian(params: SystemParams) -> FullLiouvillian:
    return FullLiouvillian(params)


def probe_vector(probe: ProbeState, n_qubits: int) -> np.ndarray:
    """Probe ket on the 2^N qubit register, built from bit strings."""
    probe.validate(n_qubits)
    dim = 2 ** n_qubits
    psi = np.zeros(dim, dtype=complex)
    if probe.kind == "ghz":
        psi[0] = psi[-1] = 1 / math.sqrt(2)
    elif probe.kind == "x":
        psi[:] = 2 ** (-n_qubits / 2)
    else:
        k = probe.excitations(n_qubits)
        for ones in itertools.combinations(range(n_qubits), k):
            psi[sum(1 << (n_qubits - 1 - i) for i in ones)] = 1.0
        psi /= np.linalg.norm(psi)
    return psi


def full_probe(probe: ProbeState, params: SystemParams) -> np.ndarray:
    vac = np.zeros(params.n_fock)
    vac[0] = 1.0
    psi = np.kron(probe_vector(probe, params.n_qubits), vac)
    return np.outer(psi, psi.conj())


def full_observables(rho: np.ndarray, ops: FullOperators) -> dict:
    return {
        "jz": float(np.real(np.sum(ops.jz.diagonal() * np.diag(rho)))),
        "photons": float(np.real(np.sum(ops.num.diagonal() * np.diag(rho)))),
        "purity": float(np.vdot(rho, rho).real),
        "trace": float(np.trace(rho).real),
    }


def full_system(params: SystemParams, probe: ProbeState):
    from .qfi import _System

    gen = FullLiouvillian(params)
    d = gen.dims[0]
    nf = params.n_fock

    def observe(y, lam_min):
        rho = y.reshape(d, d)
        out = full_observables(rho, gen.ops)
        out["min_eig"] = lam_min
        out["top_fock"] = float(np.diag(rho).real.reshape(-1, nf)[:, -2:].sum())
        return out

    return _System(FullLiouvillian, full_probe(probe, params).ravel().astype(complex), observe)


def full_evolve_and_qfi(params: SystemParams, probe: ProbeState, target=None, grid=None, **kwargs):
    """Reference QFI trace and observables without the symmetry reduction."""
    from .evolve import TimeGrid
    from .qfi import EstimationTarget, qfi_pipeline

    if params.n_qubits > MAX_ORACLE_QUBITS:
        raise ValueError(f"oracle is capped at N={MAX_ORACLE_QUBITS}")
    probe.validate(params.n_qubits)
    return qfi_pipeline(full_system(params, probe), params, target or EstimationTarget(),
                        grid or TimeGrid(), **kwargs)
