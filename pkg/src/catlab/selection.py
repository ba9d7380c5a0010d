"""Next-item selection: information criteria, constraint weighting, and
Sympson-Hetter exposure control.

All selectors are pure functions of their inputs and break score ties
lexicographically by item_id, so a fixed bank, theta and ledger always yield
the same choice. The ExposureLedger is the only mutable piece and is shared
across sessions by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .bank import ItemBank
from .errors import PoolExhaustedError
from .estimation import AbilityEstimate


@dataclass(frozen=True)
class SelectionWeights:
    """Weights of the composite criterion alpha*info + beta*content +
    gamma/exposure + delta*external."""

    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 0.25
    delta: float = 0.0
    external_scores: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.alpha == self.beta == self.gamma == self.delta == 0:
            raise ValueError("at least one selection weight must be positive")


@dataclass
class ExposureLedger:
    """Cross-session administration and proposal counts with exposure targets.

    `administrations` counts items actually delivered (the reported exposure
    rates); `proposals` counts how often the selection criterion nominated an
    item, which is the rate the Sympson-Hetter filter throttles against. A
    filter driven by the administration rate instead would equilibrate near
    sqrt(K) rather than K.
    """

    administrations: dict[str, int] = field(default_factory=dict)
    proposals: dict[str, int] = field(default_factory=dict)
    sessions_total: int = 0
    targets: dict[str, float] = field(default_factory=dict)
    item_ids: frozenset[str] | None = None

    @classmethod
    def for_bank(cls, bank: ItemBank, target: float | Mapping[str, float] = 1.0) -> "ExposureLedger":
        if isinstance(target, Mapping):
            targets = {item_id: float(target.get(item_id, 1.0)) for item_id in bank.ids}
        else:
            targets = {item_id: float(target) for item_id in bank.ids}
        bad = [i for i, k in targets.items() if not 0 < k <= 1]
        if bad:
            raise ValueError(f"exposure targets must lie in (0, 1], bad: {bad[:5]}")
        return cls(targets=targets, item_ids=frozenset(bank.ids))

    def record_session(self) -> None:
        self.sessions_total += 1

    def record_proposal(self, item_id: str) -> None:
        self.proposals[item_id] = self.proposals.get(item_id, 0) + 1

    def exposure_rate(self, item_id: str) -> float:
        return self.administrations.get(item_id, 0) / max(1, self.sessions_total)

    def selection_rate(self, item_id: str) -> float:
        return self.proposals.get(item_id, 0) / max(1, self.sessions_total)

    def max_rate(self) -> float:
        if not self.administrations:
            return 0.0
        return max(self.exposure_rate(i) for i in self.administrations)


def record_administration(ledger: ExposureLedger, item_id: str) -> ExposureLedger:
    """Count one administration of item_id; rates are recomputed lazily."""
    if ledger.item_ids is not None and item_id not in ledger.item_ids:
        raise ValueError(f"unknown item {item_id!r}")
    ledger.administrations[item_id] = ledger.administrations.get(item_id, 0) + 1
    return ledger


def sympson_hetter_filter(
    candidate: str,
    ledger: ExposureLedger,
    rng: np.random.Generator,
    use_total_n: bool = False,
) -> bool:
    """Accept the candidate with probability min(1, K / r).

    K is the item's target exposure rate and r its observed selection
    (proposal) rate, so the delivered exposure settles at min(r, K). Items
    never yet proposed (r = 0) are always accepted. The caller records the
    proposal and, on rejection, re-selects from the remaining pool.
    `use_total_n` switches to the literal min(1, K / (r * N)) variant, which
    drives acceptance to zero as the examinee count N grows; off by default.

    An item already delivered at or above its target rate is rejected
    outright: the probabilistic filter alone overshoots the target by its
    cold-start transient, while the eligibility ceiling pins the realized
    maximum at K + 1/N.
    """
    target = ledger.targets.get(candidate, 1.0)
    if target < 1.0 and ledger.exposure_rate(candidate) >= target:
        return False
    rate = ledger.selection_rate(candidate)
    if rate <= 0:
        probability = 1.0
    else:
        denominator = rate * max(1, ledger.sessions_total) if use_total_n else rate
        probability = min(1.0, target / denominator)
    return rng.random() < probability


def information_scores(bank: ItemBank, theta: float) -> np.ndarray:
    """Fisher information of every bank item at theta."""
    return bank.information_at(theta)


def precision_weighted_scores(bank: ItemBank, estimate: AbilityEstimate) -> np.ndarray:
    """Information discounted by current precision: I / (1 + I * se^2).

    The map x -> x / (1 + x*s) is increasing in x for any s >= 0, so the
    argmax coincides with plain maximum information; the score scale differs.
    """
    info = bank.information_at(estimate.theta)
    return info / (1.0 + info * estimate.se * estimate.se)


def content_shortfalls(
    bank: ItemBank,
    administered: Iterable[str],
    group_targets: Mapping[str, float] | None,
) -> np.ndarray:
    """Per-item content-balance score in [0, 1].

    The raw shortfall target_share - observed_share is scaled by the target
    so a group at zero representation scores 1; groups at or above target
    score 0. Items without a targeted group score 0.
    """
    scores = np.zeros(len(bank))
    if not group_targets:
        return scores
    administered = list(administered)
    total = max(1, len(administered))
    counts: dict[str, int] = {}
    for item_id in administered:
        group = bank.get(item_id).group
        if group:
            counts[group] = counts.get(group, 0) + 1
    for pos, item in enumerate(bank.items):
        target = group_targets.get(item.group) if item.group else None
        if target:
            observed = counts.get(item.group, 0) / total
            scores[pos] = min(1.0, max(0.0, (target - observed) / target))
    return scores


def constrained_scores(
    bank: ItemBank,
    administered: Iterable[str],
    estimate: AbilityEstimate,
    weights: SelectionWeights,
    ledger: ExposureLedger,
    group_targets: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Composite criterion alpha*I + beta*C + gamma/(1+count) + delta*ML."""
    scores = weights.alpha * bank.information_at(estimate.theta)
    if weights.beta:
        scores = scores + weights.beta * content_shortfalls(bank, administered, group_targets)
    if weights.gamma:
        counts = np.array([ledger.administrations.get(i, 0) for i in bank.ids], dtype=float)
        scores = scores + weights.gamma / (1.0 + counts)
    if weights.delta and weights.external_scores:
        external = np.array([weights.external_scores.get(i, 0.0) for i in bank.ids])
        scores = scores + weights.delta * external
    return scores


def best_item(bank: ItemBank, scores: np.ndarray, eligible: Iterable[str]) -> str:
    """Highest-scoring eligible item; exact ties go to the smallest item_id."""
    best_id, best_score = None, -np.inf
    for item_id in eligible:
        score = scores[bank.index_of(item_id)]
        if score > best_score or (score == best_score and (best_id is None or item_id < best_id)):
            best_id, best_score = item_id, score
    if best_id is None:
        raise PoolExhaustedError("no unadministered items remain")
    return best_id


def top_items(bank: ItemBank, scores: np.ndarray, eligible: Iterable[str], k: int) -> list[str]:
    """The k highest-scoring eligible items, ordered by score then item_id."""
    ranked = sorted(eligible, key=lambda i: (-scores[bank.index_of(i)], i))
    if not ranked:
        raise PoolExhaustedError("no unadministered items remain")
    return ranked[:k]


def _eligible(bank: ItemBank, administered: Iterable[str]) -> list[str]:
    administered = set(administered)
    return [item_id for item_id in bank.ids if item_id not in administered]


def mfi_select(bank: ItemBank, administered: Iterable[str], theta: float) -> str:
    """Unadministered item with maximum Fisher information at theta."""
    return best_item(bank, information_scores(bank, theta), _eligible(bank, administered))


def precision_weighted_mfi(
    bank: ItemBank, administered: Iterable[str], estimate: AbilityEstimate
) -> str:
    """Argmax of the precision-weighted information criterion."""
    return best_item(bank, precision_weighted_scores(bank, estimate), _eligible(bank, administered))


def constrained_weighted_select(
    bank: ItemBank,
    administered: Iterable[str],
    estimate: AbilityEstimate,
    weights: SelectionWeights,
    ledger: ExposureLedger,
    group_targets: Mapping[str, float] | None = None,
) -> str:
    """Argmax of the constraint-weighted composite criterion."""
    scores = constrained_scores(bank, administered, estimate, weights, ledger, group_targets)
    return best_item(bank, scores, _eligible(bank, administered))
