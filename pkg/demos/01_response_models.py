"""A tour of the four response models.

Walks the probability curves and information functions for 1PL/2PL/3PL items
and a graded (GRM) item, and saves a figure when matplotlib is available.
Run: python demos/01_response_models.py
"""

import numpy as np

from catlab.irt import ItemParameters, category_probabilities, item_information

thetas = np.linspace(-4, 4, 17)

items = [
    ItemParameters("rasch", "1PL", a=1.0, b=0.0),
    ItemParameters("steep", "2PL", a=2.0, b=0.5),
    ItemParameters("guessy", "3PL", a=1.3, b=0.5, c=0.2),
]

print("P(correct) by theta")
print("theta   " + "  ".join(f"{item.item_id:>7}" for item in items))
for theta in thetas:
    row = "  ".join(f"{category_probabilities(item, theta)[1]:7.3f}" for item in items)
    print(f"{theta:+5.1f}  {row}")

# The 3PL curve never drops below its guessing floor.
floor = category_probabilities(items[2], -8.0)[1]
print(f"\n3PL floor at theta=-8: {floor:.3f} (c = {items[2].c})")

# A graded item spreads its information across category boundaries.
grm = ItemParameters("likert", "GRM", a=1.8, thresholds=(-1.5, -0.5, 0.5, 1.5))
print("\nGRM category probabilities at theta = 0:")
for k, p in enumerate(category_probabilities(grm, 0.0)):
    print(f"  category {k}: {p:.3f}")

print("\nInformation by theta (where each item measures best)")
print("theta   " + "  ".join(f"{item.item_id:>7}" for item in items) + "   likert")
for theta in thetas:
    row = "  ".join(f"{item_information(item, theta):7.3f}" for item in items)
    print(f"{theta:+5.1f}  {row}  {item_information(grm, theta):7.3f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = np.linspace(-4, 4, 201)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    for item in items:
        top.plot(grid, [category_probabilities(item, t)[1] for t in grid], label=item.item_id)
    top.set_ylabel("P(correct)")
    top.legend()
    for item in items + [grm]:
        bottom.plot(grid, [item_information(item, t) for t in grid], label=item.item_id)
    bottom.set_xlabel("theta")
    bottom.set_ylabel("information")
    bottom.legend()
    fig.tight_layout()
    fig.savefig("demos/response_models.png", dpi=120)
    print("\nsaved demos/response_models.png")
except ImportError:
    print("\n(matplotlib not installed; skipping the figure)")
