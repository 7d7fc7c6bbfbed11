"""The three-variable model stays near x = 1 and reproduces the reduced cycle.

Run: python demos/three_timescale.py   (about ten seconds)
"""
import numpy as np

from stommel_osc import ModelParams, find_limit_cycle, integrate, lin3_field

eps = 0.01
p = ModelParams(A=5.0, epsilon=eps, delta0=0.1, lambda_=0.8, a=0.6, b=2.0)
tr = integrate(lin3_field(p), (1.0, 0.5, 1.5), (0.0, 20000.0))
late = tr.times > 10
print(f"max |x - 1| after the transient: {np.abs(tr.states[late, 0] - 1).max():.4f}  (eps = {eps})")

starts = np.array([t for t, _, d in tr.events if d == -1])
period = np.mean(np.diff(starts[2:])) * eps
ref = find_limit_cycle(ModelParams.reduced(5.0, 0.8, 0.1)).period
print(f"slow-time period {period:.3f}, reduced model {ref:.3f}, difference {abs(period / ref - 1):.1%}")
