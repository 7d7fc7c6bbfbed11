"""Analytic regime map of the reduced model next to a simulated sweep.

Run: python demos/regimes.py
"""
import numpy as np

from stommel_osc import ModelParams, classify_regime, equilibrium, sweep_lambda

print("A     lambda  delta0  regime              corner type            equilibrium")
for A, lam, d0 in [(5, 0.5, 0.1), (5, 0.8, 0.1), (5, 1.2, 0.1), (1.1, 0.995, 0.01),
                   (1.5, 0.995, 0.01), (0.5, 0.9, 0.01)]:
    p = ModelParams.reduced(A, lam, d0)
    r = classify_regime(p)
    print(f"{A:<5} {lam:<7} {d0:<7} {r.regime:<19} {r.bifurcation_at_corner:<22} {equilibrium(p).eq_class}")

grid = np.round(np.arange(0.4, 1.3 + 1e-9, 0.05), 12)
diagram = sweep_lambda(5.0, 0.1, grid, jobs=2)
print("\nsweep at A=5, delta0=0.1")
for lam, eq, cyc in zip(grid, diagram.equilibria, diagram.cycles):
    extra = f"period {cyc.period:8.3f}  y in [{cyc.y_min:.3f}, {cyc.y_max:.3f}]" if cyc.converged else ""
    print(f"  lambda={lam:.2f}  {eq.eq_class:<16} {cyc.kind:<13} {extra}")
