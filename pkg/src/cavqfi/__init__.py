"""Quantum Fisher information of N qubits in a lossy cavity, in the Dicke basis."""

__version__ = "0.1.0"

from .dicke import DickeSpace, degeneracy, enumerate_sectors, local_emission_coefficients
from .evolve import TimeGrid, integrate
from .model import (HybridState, ProbeState, SystemParams, build_hamiltonian,
                    build_liouvillian, prepare_probe, truncation_guard)
from .qfi import EstimationTarget, crb_variance, max_qfi, qfi_at_time, qfi_trace
from .scaling import exponent_map, fit_power_law

__all__ = [
    "DickeSpace", "degeneracy", "enumerate_sectors", "local_emission_coefficients",
    "TimeGrid", "integrate", "HybridState", "ProbeState", "SystemParams",
    "build_hamiltonian", "build_liouvillian", "prepare_probe", "truncation_guard",
    "EstimationTarget", "crb_variance", "max_qfi", "qfi_at_time", "qfi_trace",
    "exponent_map", "fit_power_law",
]
