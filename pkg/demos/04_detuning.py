"""Estimating the detuning instead of the coupling (omega_q = 0.1 g, omega_c = 0).

    python3 demos/04_detuning.py
"""
from cavqfi import EstimationTarget, ProbeState, SystemParams, qfi_trace
from cavqfi.harness import DETUNING

target = EstimationTarget("detuning")
print("kappa/g = gamma/g = 1, max F for Delta (units 1/g^2)")
print("N    " + "".join(f"{p:>12s}" for p in ("x", "ghz", "dicke-1", "dicke-half")))
for n in range(2, 8):
    p = SystemParams(n, 1.0, 1.0, 1.0, omega_q=DETUNING)
    vals = [qfi_trace(p, ProbeState.parse(s), target).max_f for s in ("x", "ghz", "dicke-1", "dicke")]
    print(f"{n:<5d}" + "".join(f"{v:12.4f}" for v in vals))
