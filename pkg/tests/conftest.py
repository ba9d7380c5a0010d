"""Shared helpers for building random items and response patterns."""

import numpy as np
import pytest

from catlab.irt import ItemParameters, Response, category_probabilities

MODELS = ("1PL", "2PL", "3PL", "GRM")


def random_item(rng: np.random.Generator, item_id: str, model: str | None = None) -> ItemParameters:
    model = model or MODELS[int(rng.integers(len(MODELS)))]
    a = 1.0 if model == "1PL" else float(rng.uniform(0.5, 2.5))
    if model == "GRM":
        m = int(rng.integers(3, 8))
        base = float(rng.normal())
        return ItemParameters(item_id, model, a=a, thresholds=tuple(base + np.linspace(-1.0, 1.0, m - 1)))
    c = float(rng.uniform(0.0, 0.35)) if model == "3PL" else 0.0
    return ItemParameters(item_id, model, a=a, b=float(rng.normal()), c=c)


def random_pattern(
    rng: np.random.Generator,
    n_items: int,
    theta_true: float | None = None,
    models: tuple[str, ...] = MODELS,
) -> tuple[list[ItemParameters], list[Response]]:
    """Items plus model-consistent responses drawn at theta_true."""
    if theta_true is None:
        theta_true = float(rng.normal())
    items, responses = [], []
    for k in range(n_items):
        item = random_item(rng, f"p{k}", models[int(rng.integers(len(models)))])
        probs = category_probabilities(item, theta_true)
        value = int(np.searchsorted(np.cumsum(probs), rng.random()))
        items.append(item)
        responses.append(Response(item.item_id, min(value, item.n_categories - 1)))
    return items, responses


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
