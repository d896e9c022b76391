"""Walkthrough: hyperbolic times and preballs along doubling-type orbits.

Runs in a few seconds with ``python notebooks/doubling_hyperbolic_times.py``.
"""
import math

import numpy as np

from expansion_lab import catalog
from expansion_lab.core import Word, compose_orbit, composed_lift, composed_log_derivative
from expansion_lab.pliss import hyperbolic_times, is_hyperbolic_time
from expansion_lab.preballs import build_preball, check_bounded_distortion, random_subinterval_pairs
from expansion_lab.rng import task_rng

rng = task_rng(11)

# -- a perturbed doubling orbit and its log-derivative sequence
system = catalog.perturbed_doubling(0.3)
orbit = compose_orbit(system, Word.constant(0, 400), 0.123, 400)
v = orbit.log_theta()              # log of the inverse Lipschitz constant at each step
print("mean log|f'| along the orbit:", float(orbit.log_derivs.mean()))

# every n listed below has all backward tail sums <= -(a/2)*length
rep = hyperbolic_times(v, a=0.2)
print(f"{len(rep.times)} hyperbolic times out of {rep.n}, density {rep.density:.3f}")
assert all(is_hyperbolic_time(v, n, rep.sigma) for n in rep.times)

# -- a noisy sequence sitting close to the threshold
noisy = rng.uniform(-1.0, 0.5, 500)
rep = hyperbolic_times(noisy, a=0.4)
print(f"noisy sequence: density {rep.density:.3f}, sigma {rep.sigma:.4f}")

# -- preballs: contraction and the distortion ratio
for eps in (0.0, 0.3, 0.6):
    s = catalog.perturbed_doubling(eps)
    worst = 0.0
    for n in (2, 6, 10):
        pb = build_preball(s, Word.constant(0, n), 0.37, n, 0.05, sigma=1 / 1.4)
        d = check_bounded_distortion(pb, random_subinterval_pairs(pb, 50, rng))
        worst = max(worst, d.max_observed_ratio / pb.K)
        print(f"eps={eps:.1f} n={n:2d}  diameter {pb.diameter:.3e}  bound {2 * 0.05 * pb.lam ** n:.3e}  "
              f"K={pb.K:.4f}  worst ratio {d.max_observed_ratio:.4f}")
    print(f"  max ratio/K for eps={eps}: {worst:.4f}")

# the sum of log-derivatives telescopes to log|(f^n)'|; check against a finite difference
n, x0, h = 8, 0.2, 1e-7
fd = (composed_lift(system, Word.constant(0, n), x0 + h) - composed_lift(system, Word.constant(0, n), x0 - h)) / (2 * h)
print("log|(f^8)'| analytic vs finite difference:",
      float(composed_log_derivative(system, Word.constant(0, n), x0)), math.log(abs(fd)))
