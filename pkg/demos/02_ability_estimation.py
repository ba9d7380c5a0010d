"""Comparing the four ability estimators on one response pattern.

Shows EAP/MAP shrinkage toward the prior, the ML failure on an all-correct
pattern, the WLE staying finite, and how the fallback chain reacts.
Run: python demos/02_ability_estimation.py
"""

import numpy as np

from catlab.errors import NonFiniteMLEError
from catlab.estimation import Prior, estimate_eap, estimate_map, estimate_ml, estimate_wle, fallback_chain
from catlab.irt import ItemParameters, Response, probability_correct

rng = np.random.default_rng(18)
theta_true = 0.8
items = [
    ItemParameters(f"q{k}", "2PL", a=float(rng.uniform(0.9, 2.0)), b=float(rng.normal()))
    for k in range(12)
]
responses = [
    Response(item.item_id, int(rng.random() < probability_correct(item, theta_true)))
    for item in items
]

print(f"true theta: {theta_true:+.2f}, pattern: {[r.value for r in responses]}")
print()
for name, estimate in [
    ("EAP", estimate_eap(items, responses)),
    ("MAP", estimate_map(items, responses)),
    ("ML ", estimate_ml(items, responses)),
    ("WLE", estimate_wle(items, responses)),
]:
    print(f"{name}: theta = {estimate.theta:+.4f}  se = {estimate.se:.4f}  "
          f"iterations = {estimate.iterations}")

# With a diffuse prior the Bayesian estimates land on the ML solution.
diffuse = estimate_map(items, responses, Prior(0.0, 10.0))
print(f"\nMAP with sd=10 prior: {diffuse.theta:+.4f} (ML {estimate_ml(items, responses).theta:+.4f})")

# ML has no finite maximum for an all-correct pattern; WLE and EAP do.
perfect = [Response(item.item_id, 1) for item in items]
try:
    estimate_ml(items, perfect)
except NonFiniteMLEError as error:
    print(f"\nall-correct pattern: ML fails ({error})")
print(f"  WLE stays finite: {estimate_wle(items, perfect).theta:+.4f}")
print(f"  EAP stays finite: {estimate_eap(items, perfect).theta:+.4f}")

# The chain tries the configured method and falls back to EAP on failure.
chained = fallback_chain(items, perfect, "ML", alternate="WLE")
print(f"  chain ML -> WLE -> EAP produced: {chained.method} at {chained.theta:+.4f}")
