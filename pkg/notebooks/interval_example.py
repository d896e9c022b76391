"""Walkthrough: the two-generator interval action with neutral endpoints.

Neither map expands on its own (both fix 0 and 1 with derivative 1 there),
yet almost every point has a branch with negative exponent. Runs in about ten
seconds with ``python notebooks/interval_example.py``.
"""
import numpy as np

from expansion_lab import catalog
from expansion_lab.classify import classify_action, exceptional_points
from expansion_lab.ergodicity import (
    equidistribution_test,
    exactness_check,
    invariant_set_closure,
)
from expansion_lab.rng import task_rng

p = catalog.IntervalExampleParams()
system = catalog.paper_interval_example(p)

cond = catalog.verify_example_conditions(system, p)
for name, res in cond.results.items():
    print(f"{name:<28} {'ok' if res.passed else 'FAILED'}  {res.detail}")

print("common fixed points with |f'| <= 1:", exceptional_points(system))

# -- every point eventually enters the trapping interval [a, b]
xs = task_rng(3).uniform(1e-6, 1 - 1e-6, 200)
ms = [catalog.reach_trapping_region(system, float(x), p).m for x in xs]
print(f"entry steps into [{p.a}, {p.b}]: median {np.median(ms):.0f}, max {max(ms)}")

# -- once inside, the staying branch keeps expanding
word, logs = catalog.staying_branch(system, 0.5, 10 ** 5, p, return_logs=True)
print(f"staying branch: mean log|f'| {logs.mean():.4f}, min {logs.min():.4f}")

# -- sample-based classification
rep = classify_action(system, 300, 500, "greedy", seed=5)
print(f"expandable fraction {rep.expandable_fraction:.3f}, "
      f"max exponent {rep.exponents.max():.3f}, uniformly expanding: {rep.uniformly_expanding}")

# -- exactness: images of a small ball eventually cover almost all of [0, 1]
for budget in (100, 1000, 10000):
    st = exactness_check(system, (0.4, 0.41), budget, 2 ** -10)
    print(f"budget {budget:>5}: coverage {st.coverage:.4f}  words {st.words_explored}")
# the last few cells next to 1 need very long words, since f0 is parabolic there

# -- forward-invariant closure of a single cell fills the interval
print("closure fraction:", invariant_set_closure(system, [500], 2 ** -10).fraction)

# -- a random policy drifts towards the neutral endpoint 1, so averages do
#    not match Lebesgue measure
eq = equidistribution_test(system, "random", ["cos:1"], 10 ** 5, 5, seed=1)
print("random-policy deviation for cos 2πx:", round(eq.deviations["cos:1"], 3))
