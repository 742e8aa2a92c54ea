"""How F(t) rises, peaks and fades for the X-polarized probe in the four
coupling regimes, four qubits.

    python3 demos/01_qfi_in_four_regimes.py
"""
import numpy as np

from cavqfi import ProbeState, SystemParams, TimeGrid, qfi_trace
from cavqfi.harness import REGIMES

N = 4
grid = TimeGrid(12.0, 241)
probe = ProbeState("x")

print(f"X-polarized probe, N={N}, coupling target\n")
print(f"{'regime':14s} {'kappa/g':>7s} {'gamma/g':>7s} {'max F':>9s} {'t_max g':>8s}  F at t=12")
for name, (k, g) in REGIMES.items():
    tr = qfi_trace(SystemParams(N, 1.0, k, g), probe, grid=grid)
    print(f"{name:14s} {k:7.1f} {g:7.1f} {tr.max_f:9.3f} {tr.t_at_max:8.3f}  {tr.values[-1]:.3g}")

# a coarse text sparkline of the strong-coupling trace
tr = qfi_trace(SystemParams(N, 1.0, *REGIMES["strong"]), probe, grid=grid, step_check=False)
bars = " .:-=+*#%@"
idx = np.linspace(0, len(tr.values) - 1, 60).astype(int)
line = "".join(bars[int(9 * v / tr.max_f)] for v in tr.values[idx])
print(f"\nstrong coupling F(t), t = 0..12/g:\n|{line}|")

# the state loses purity as photons leak out
obs = tr.observables
for t in (0.0, 2.0, 6.0, 12.0):
    i = int(np.argmin(abs(tr.times - t)))
    print(f"t={t:5.1f}  <Jz>={obs['jz'][i]:+.3f}  <n>={obs['photons'][i]:.3f}  purity={obs['purity'][i]:.3f}")
