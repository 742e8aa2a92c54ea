"""Max QFI against qubit number, and the fitted exponent b in y = a N^b + c.

b = 1 is the standard quantum limit and b = 2 the Heisenberg limit.
Runs N = 2..8 in the weak-coupling corner, a few minutes on one core.

    python3 demos/02_scaling_with_n.py
"""
from cavqfi import ProbeState, SystemParams, fit_power_law, qfi_trace

ns = list(range(2, 9))
kappa = gamma = 3.0

print(f"weak coupling, kappa/g = gamma/g = {kappa}")
for label in ("x", "ghz", "dicke", "excited"):
    probe = ProbeState.parse(label)
    vals = [qfi_trace(SystemParams(n, 1.0, kappa, gamma), probe).max_f for n in ns]
    fit = fit_power_law(ns, vals)
    row = " ".join(f"{v:7.2f}" for v in vals)
    print(f"{probe.label:10s} {row}   b = {fit.b:.2f}")

# ground state: nothing ever happens, so there is nothing to fit
f0 = qfi_trace(SystemParams(4, 1.0, kappa, gamma), ProbeState("ground")).max_f
print(f"\nground state, N=4: max F = {f0}")
