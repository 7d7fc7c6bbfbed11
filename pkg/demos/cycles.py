"""Relaxation cycle, canard cycle and the super-explosion jump.

Run: python demos/cycles.py
"""
import numpy as np

from stommel_osc import ModelParams, find_limit_cycle, sweep_lambda

ro = find_limit_cycle(ModelParams.reduced(5.0, 0.8, 0.1))
print(f"A=5 lambda=0.8: {ro.kind}, period {ro.period:.4f}, y in [{ro.y_min:.4f}, {ro.y_max:.4f}]")

for A in (1.1, 1.5):
    rep = find_limit_cycle(ModelParams.reduced(A, 0.995, 0.01))
    seg = rep.canard
    note = f", tracks the repelling branch for slow time {seg.duration:.2f}" if seg else ""
    print(f"A={A} lambda=0.995: {rep.kind}, amplitude {rep.amplitude:.4f}{note}")

# close to the corner the A=1.5 orbit appears at full size, the A=1.1 one grows from zero
grid = np.round(0.994 + 5e-4 * np.arange(13), 12)
print("\nlambda    amp(A=1.1)  amp(A=1.5)")
small, large = sweep_lambda(1.1, 0.01, grid), sweep_lambda(1.5, 0.01, grid)
for lam, a, b in zip(grid, small.amplitudes, large.amplitudes):
    print(f"{lam:.4f}   {a:.5f}     {b:.5f}")
