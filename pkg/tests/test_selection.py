"""Selection-rule tests: argmax correctness against brute-force scans,
exposure filtering, and ledger bookkeeping."""

import numpy as np
import pytest

from catlab.bank import ItemBank, generate_bank
from catlab.errors import PoolExhaustedError
from catlab.estimation import AbilityEstimate
from catlab.irt import ItemParameters, item_information
from catlab.selection import (
    ExposureLedger,
    SelectionWeights,
    constrained_scores,
    constrained_weighted_select,
    content_shortfalls,
    mfi_select,
    precision_weighted_mfi,
    record_administration,
    sympson_hetter_filter,
)


def three_item_bank() -> ItemBank:
    return ItemBank(
        [
            ItemParameters("low", "2PL", a=1.0, b=-2.0),
            ItemParameters("mid", "2PL", a=1.0, b=0.0),
            ItemParameters("high", "2PL", a=1.0, b=2.0),
        ]
    )


def estimate(theta: float, se: float = 1.0) -> AbilityEstimate:
    return AbilityEstimate(theta, se, "EAP", converged=True)


class TestMFISelect:
    def test_picks_difficulty_matching_theta(self):
        bank = three_item_bank()
        assert mfi_select(bank, set(), 0.0) == "mid"
        assert mfi_select(bank, set(), 2.0) == "high"

    def test_never_picks_administered(self):
        bank = three_item_bank()
        assert mfi_select(bank, {"mid"}, 0.0) in ("low", "high")

    def test_pool_exhausted(self):
        bank = three_item_bank()
        with pytest.raises(PoolExhaustedError):
            mfi_select(bank, {"low", "mid", "high"}, 0.0)

    def test_matches_brute_force_scan(self, rng):
        bank = generate_bank("2PL", 100, seed=17)
        theta = 0.5
        chosen = mfi_select(bank, set(), theta)
        by_scan = max(bank.items, key=lambda item: (item_information(item, theta), item.item_id))
        assert chosen == by_scan.item_id

    def test_brute_force_property_many_trials(self, rng):
        # 1,000 seeded trials over random banks, thetas and administered sets
        for trial in range(1000):
            bank = generate_bank("2PL", 20, seed=trial)
            theta = float(rng.uniform(-3, 3))
            administered = set(rng.choice(bank.ids, size=int(rng.integers(0, 10)), replace=False))
            chosen = mfi_select(bank, administered, theta)
            remaining = [item for item in bank.items if item.item_id not in administered]
            best = max(remaining, key=lambda item: item_information(item, theta))
            assert item_information(bank.get(chosen), theta) >= item_information(best, theta) - 1e-12

    def test_lexicographic_tie_break(self):
        bank = ItemBank(
            [
                ItemParameters("b", "2PL", a=1.0, b=0.0),
                ItemParameters("a", "2PL", a=1.0, b=0.0),
            ]
        )
        assert mfi_select(bank, set(), 0.0) == "a"


class TestPrecisionWeightedMFI:
    def test_same_argmax_as_mfi(self, rng):
        for trial in range(50):
            bank = generate_bank("2PL", 30, seed=1000 + trial)
            est = estimate(float(rng.uniform(-2, 2)), se=float(rng.uniform(0.1, 2.0)))
            assert precision_weighted_mfi(bank, set(), est) == mfi_select(bank, set(), est.theta)

    def test_hand_evaluated_scores(self):
        # I=(0.5, 1.0), se=2: scores 0.5/3 vs 1/5 -> the second item wins
        assert 0.5 / (1 + 0.5 * 4) == pytest.approx(1.0 / 6)
        assert 1.0 / (1 + 1.0 * 4) == pytest.approx(0.2)
        bank = ItemBank(
            [
                # at theta=0: I = a^2/4 -> 0.5 needs a=sqrt(2); 1.0 needs a=2
                ItemParameters("half", "2PL", a=float(np.sqrt(2.0)), b=0.0),
                ItemParameters("one", "2PL", a=2.0, b=0.0),
            ]
        )
        assert precision_weighted_mfi(bank, set(), estimate(0.0, se=2.0)) == "one"

    def test_pool_of_one(self):
        bank = three_item_bank()
        assert precision_weighted_mfi(bank, {"low", "mid"}, estimate(-2.0)) == "high"


class TestConstrainedWeightedSelect:
    def test_alpha_only_reduces_to_mfi(self, rng):
        weights = SelectionWeights(alpha=1.0, beta=0.0, gamma=0.0, delta=0.0)
        for trial in range(25):
            bank = generate_bank("2PL", 25, seed=2000 + trial)
            ledger = ExposureLedger.for_bank(bank)
            theta = float(rng.uniform(-2, 2))
            assert constrained_weighted_select(
                bank, set(), estimate(theta), weights, ledger
            ) == mfi_select(bank, set(), theta)

    def test_beta_only_prefers_underrepresented_group(self):
        bank = ItemBank(
            [
                ItemParameters("g1", "2PL", a=1.0, b=0.0, group="geometry"),
                ItemParameters("a1", "2PL", a=2.0, b=0.0, group="algebra"),
                ItemParameters("a2", "2PL", a=2.0, b=0.0, group="algebra"),
            ]
        )
        weights = SelectionWeights(alpha=0.0, beta=1.0, gamma=0.0, delta=0.0)
        ledger = ExposureLedger.for_bank(bank)
        targets = {"algebra": 0.5, "geometry": 0.5}
        chosen = constrained_weighted_select(
            bank, ["a1", "a2"], estimate(0.0), weights, ledger, targets
        )
        assert chosen == "g1"

    def test_mixed_weights_match_exhaustive_scan(self, rng):
        bank = generate_bank("2PL", 50, seed=31, group_labels=["x", "y"])
        ledger = ExposureLedger.for_bank(bank)
        for item_id in bank.ids[:10]:
            record_administration(ledger, item_id)
        ledger.sessions_total = 4
        external = {item_id: float(rng.random()) for item_id in bank.ids}
        weights = SelectionWeights(alpha=1.0, beta=0.7, gamma=0.4, delta=0.3, external_scores=external)
        targets = {"x": 0.6, "y": 0.4}
        administered = bank.ids[:2]
        est = estimate(0.4)
        scores = constrained_scores(bank, administered, est, weights, ledger, targets)
        shortfalls = content_shortfalls(bank, administered, targets)
        best_id, best_score = None, -np.inf
        for pos, item in enumerate(bank.items):
            if item.item_id in administered:
                continue
            manual = (
                1.0 * item_information(item, est.theta)
                + 0.7 * shortfalls[pos]
                + 0.4 / (1.0 + ledger.administrations.get(item.item_id, 0))
                + 0.3 * external[item.item_id]
            )
            assert manual == pytest.approx(scores[pos], abs=1e-12)
            if manual > best_score:
                best_id, best_score = item.item_id, manual
        chosen = constrained_weighted_select(bank, administered, est, weights, ledger, targets)
        assert chosen == best_id

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            SelectionWeights(alpha=0.0, beta=0.0, gamma=0.0, delta=0.0)
        with pytest.raises(ValueError):
            SelectionWeights(alpha=-1.0)


class TestSympsonHetter:
    def test_unproposed_item_always_accepted(self):
        ledger = ExposureLedger(targets={"i": 0.25})
        ledger.sessions_total = 50
        rng = np.random.default_rng(1)
        assert all(sympson_hetter_filter("i", ledger, rng) for _ in range(100))

    def test_target_at_or_above_rate_always_accepts(self):
        ledger = ExposureLedger(targets={"i": 0.5})
        ledger.sessions_total = 100
        ledger.proposals["i"] = 30  # selection rate 0.3 < K
        ledger.administrations["i"] = 20  # exposure 0.2 < K
        rng = np.random.default_rng(2)
        assert all(sympson_hetter_filter("i", ledger, rng) for _ in range(200))

    def test_acceptance_probability_monte_carlo(self):
        # K=0.25 against a selection rate of 0.5 -> accept probability 0.5
        ledger = ExposureLedger(targets={"i": 0.25})
        ledger.sessions_total = 1000
        ledger.proposals["i"] = 500
        ledger.administrations["i"] = 100  # exposure 0.1, below target
        rng = np.random.default_rng(20240811)
        accepted = sum(sympson_hetter_filter("i", ledger, rng) for _ in range(10000))
        assert 0.49 <= accepted / 10000 <= 0.51

    def test_exposure_ceiling_rejects(self):
        ledger = ExposureLedger(targets={"i": 0.25})
        ledger.sessions_total = 100
        ledger.administrations["i"] = 25  # at target: ineligible
        rng = np.random.default_rng(3)
        assert not any(sympson_hetter_filter("i", ledger, rng) for _ in range(50))

    def test_literal_total_n_variant_vanishes(self):
        ledger = ExposureLedger(targets={"i": 0.25})
        ledger.sessions_total = 1000
        ledger.proposals["i"] = 500
        rng = np.random.default_rng(4)
        accepted = sum(
            sympson_hetter_filter("i", ledger, rng, use_total_n=True) for _ in range(2000)
        )
        assert accepted / 2000 < 0.01  # K/(r*N) = 0.0005


class TestExposureLedger:
    def test_rates(self):
        ledger = ExposureLedger()
        ledger.record_session()
        record_administration(ledger, "a")
        assert ledger.exposure_rate("a") == 1.0
        ledger = ExposureLedger()
        for _ in range(100):
            ledger.record_session()
        for _ in range(25):
            record_administration(ledger, "a")
        assert ledger.exposure_rate("a") == 0.25

    def test_interleaved_sessions_are_additive(self):
        ledger = ExposureLedger()
        per_session = [["a", "b"], ["a", "c"], ["b", "a"]]
        for administered in per_session:
            ledger.record_session()
            for item_id in administered:
                record_administration(ledger, item_id)
        assert ledger.administrations == {"a": 3, "b": 2, "c": 1}
        assert ledger.sessions_total == 3

    def test_unknown_item_rejected(self):
        bank = three_item_bank()
        ledger = ExposureLedger.for_bank(bank, 0.25)
        with pytest.raises(ValueError):
            record_administration(ledger, "nope")

    def test_bad_targets_rejected(self):
        bank = three_item_bank()
        with pytest.raises(ValueError):
            ExposureLedger.for_bank(bank, 0.0)
