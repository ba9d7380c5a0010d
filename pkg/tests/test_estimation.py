"""Estimator tests against dense-grid quadrature and grid-scan oracles."""

import numpy as np
import pytest

from catlab.errors import NonFiniteMLEError
from catlab.estimation import (
    DEFAULT_BOUNDS,
    Prior,
    QuadratureGrid,
    default_grid,
    estimate_eap,
    estimate_map,
    estimate_ml,
    estimate_wle,
    fallback_chain,
)
from catlab.irt import (
    ItemParameters,
    Response,
    pattern_log_likelihood,
    score_function,
    total_information,
)

from conftest import random_pattern

DENSE = np.linspace(-5.0, 5.0, 10001)
SCAN = np.arange(DEFAULT_BOUNDS[0], DEFAULT_BOUNDS[1] + 1e-12, 1e-4)


def eap_oracle(items, responses, prior=Prior()):
    """Dense 10,001-point quadrature of the posterior mean."""
    log_post = pattern_log_likelihood(items, responses, DENSE) - 0.5 * (
        (DENSE - prior.mean) / prior.sd
    ) ** 2
    w = np.exp(log_post - log_post.max())
    return float(np.dot(DENSE, w) / w.sum())

def ml_oracle(items, responses):
    """Argmax of the log-likelihood on a 1e-4-step grid scan."""
    ll = pattern_log_likelihood(items, responses, SCAN)
    return float(SCAN[int(np.argmax(ll))])


def map_oracle(items, responses, prior=Prior()):
    ll = pattern_log_likelihood(items, responses, SCAN) - 0.5 * ((SCAN - prior.mean) / prior.sd) ** 2
    return float(SCAN[int(np.argmax(ll))])


def wle_roots(items, responses, h=1e-5):
    """All roots of the weighted score located by sign-change grid scan."""
    def weighted(theta):
        info = total_information(items, theta)
        d_info = (total_information(items, theta + h) - total_information(items, theta - h)) / (2 * h)
        return score_function(items, responses, theta) + d_info / (2 * info)

    coarse = np.arange(DEFAULT_BOUNDS[0], DEFAULT_BOUNDS[1] + 1e-12, 0.05)
    values = np.array([weighted(t) for t in coarse])
    roots = []
    for idx in np.flatnonzero(np.diff(np.sign(values)) != 0):
        fine = np.linspace(coarse[idx], coarse[idx + 1], 51)
        fine_values = np.array([weighted(t) for t in fine])
        for flip in np.flatnonzero(np.diff(np.sign(fine_values)) != 0):
            x0, x1 = fine[flip], fine[flip + 1]
            y0, y1 = fine_values[flip], fine_values[flip + 1]
            roots.append(float(x0 - y0 * (x1 - x0) / (y1 - y0)))
    assert roots, "oracle found no sign change"
    return roots


def symmetric_pair():
    items = [ItemParameters("a", "2PL", a=1.4, b=0.0), ItemParameters("b", "2PL", a=1.4, b=0.0)]
    return items, [Response("a", 1), Response("b", 0)]


class TestEAP:
    def test_no_responses_returns_prior_moments(self):
        est = estimate_eap([], [], Prior(0.3, 1.2))
        assert (est.theta, est.se) == (0.3, 1.2)
        assert est.converged and est.method == "EAP"

    def test_single_correct_item_vs_dense_oracle(self):
        items = [ItemParameters("x", "1PL", a=1.0, b=0.0)]
        responses = [Response("x", 1)]
        est = estimate_eap(items, responses)
        assert est.theta == pytest.approx(eap_oracle(items, responses), abs=1e-3)
        assert est.theta == pytest.approx(0.41, abs=0.01)
        assert est.se < 1.0

    def test_symmetric_pattern_is_zero(self):
        items, responses = symmetric_pair()
        est = estimate_eap(items, responses)
        assert abs(est.theta) < 1e-9

    def test_random_patterns_vs_dense_oracle(self, rng):
        for _ in range(40):
            items, responses = random_pattern(rng, 8)
            est = estimate_eap(items, responses)
            assert est.theta == pytest.approx(eap_oracle(items, responses), abs=1e-3)

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            estimate_eap([], [], grid=default_grid(11))

    def test_grid_invariants(self):
        with pytest.raises(ValueError):
            QuadratureGrid(np.array([0.0, 0.0, 1.0]), np.array([1.0, 1.0, 1.0]))
        with pytest.raises(ValueError):
            QuadratureGrid(np.array([0.0, 1.0]), np.array([1.0, -1.0]))


class TestML:
    def test_symmetric_root(self):
        items, responses = symmetric_pair()
        est = estimate_ml(items, responses)
        assert est.theta == pytest.approx(0.0, abs=1e-8)
        assert est.converged
        assert est.se == pytest.approx(1.0 / np.sqrt(total_information(items, est.theta)), rel=1e-12)

    def test_all_extreme_patterns_raise(self):
        items, _ = symmetric_pair()
        with pytest.raises(NonFiniteMLEError):
            estimate_ml(items, [Response("a", 1), Response("b", 1)])
        with pytest.raises(NonFiniteMLEError):
            estimate_ml(items, [Response("a", 0), Response("b", 0)])

    def test_vs_grid_scan_oracle(self, rng):
        checked = 0
        while checked < 25:
            items, responses = random_pattern(rng, 10)
            try:
                est = estimate_ml(items, responses)
            except NonFiniteMLEError:
                continue
            assert est.theta == pytest.approx(ml_oracle(items, responses), abs=1e-3)
            checked += 1

    def test_score_at_root_is_tiny(self, rng):
        items, responses = random_pattern(rng, 12, theta_true=0.3, models=("2PL",))
        est = estimate_ml(items, responses)
        assert abs(score_function(items, responses, est.theta)) < 1e-8

    def test_adding_easy_correct_item_never_lowers_theta(self, rng):
        for trial in range(20):
            items, responses = random_pattern(rng, 12, models=("1PL",))
            try:
                base = estimate_ml(items, responses)
            except NonFiniteMLEError:
                continue
            easy = ItemParameters("easy", "1PL", a=1.0, b=base.theta - 3.5)
            extended = estimate_ml(items + [easy], responses + [Response("easy", 1)])
            assert extended.theta >= base.theta - 1e-9


class TestMAP:
    def test_no_responses(self):
        est = estimate_map([], [], Prior(0.0, 1.0))
        assert (est.theta, est.se) == (0.0, 1.0)

    def test_all_correct_finite_positive(self):
        items, _ = symmetric_pair()
        est = estimate_map(items, [Response("a", 1), Response("b", 1)])
        assert est.converged and 0.0 < est.theta < DEFAULT_BOUNDS[1]

    def test_vs_penalized_grid_scan(self, rng):
        for _ in range(25):
            items, responses = random_pattern(rng, 10)
            est = estimate_map(items, responses)
            assert est.theta == pytest.approx(map_oracle(items, responses), abs=1e-3)

    def test_se_includes_prior_information(self):
        items, responses = symmetric_pair()
        est = estimate_map(items, responses, Prior(0.0, 1.0))
        expected = 1.0 / np.sqrt(total_information(items, est.theta) + 1.0)
        assert est.se == pytest.approx(expected, rel=1e-12)


class TestWLE:
    def test_symmetric_root(self):
        items, responses = symmetric_pair()
        est = estimate_wle(items, responses)
        assert est.theta == pytest.approx(0.0, abs=1e-6)

    def test_all_correct_stays_finite(self):
        items = [ItemParameters(f"i{k}", "1PL", a=1.0, b=0.0) for k in range(5)]
        responses = [Response(f"i{k}", 1) for k in range(5)]
        est = estimate_wle(items, responses)
        # analytic root of n(1-P) + (1-2P)/2 = 0 is P = 11/12, theta = ln 11
        assert est.converged
        assert est.theta == pytest.approx(np.log(11.0), abs=1e-6)

    def test_vs_sign_change_oracle(self, rng):
        for _ in range(20):
            items, responses = random_pattern(rng, 10)
            est = estimate_wle(items, responses)
            assert min(abs(est.theta - r) for r in wle_roots(items, responses)) < 1e-3


class TestFallbackChain:
    def test_forced_fallback_on_extreme_pattern(self):
        items, _ = symmetric_pair()
        responses = [Response("a", 1), Response("b", 1)]
        est = fallback_chain(items, responses, "ML")
        assert est.method == "EAP" and np.isfinite(est.theta)
        est = fallback_chain(items, responses, "ML", alternate="MAP")
        assert est.method == "MAP"

    def test_eap_head_always_wins(self, rng):
        items, responses = random_pattern(rng, 6)
        assert fallback_chain(items, responses, "EAP").method == "EAP"

    def test_ml_on_well_mixed_pattern(self, rng):
        while True:
            items, responses = random_pattern(rng, 15, theta_true=0.2)
            values = {r.value for r in responses}
            if len(values) > 1:
                break
        est = fallback_chain(items, responses, "ML")
        if est.method == "ML":
            assert est.theta == pytest.approx(ml_oracle(items, responses), abs=1e-3)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            fallback_chain([], [], "BOGUS")


class TestCrossEstimatorProperties:
    def test_agreement_on_long_well_mixed_patterns(self, rng):
        # well-mixed: informative items whose difficulties bracket theta
        from catlab.irt import probability_correct

        agreements = 0
        for _ in range(15):
            theta_true = float(rng.uniform(-1, 1))
            items = [
                ItemParameters(
                    f"w{k}", "2PL", a=float(rng.uniform(1.2, 2.0)), b=theta_true + float(s)
                )
                for k, s in enumerate(np.linspace(-1.2, 1.2, 30))
            ]
            responses = [
                Response(item.item_id, int(rng.random() < probability_correct(item, theta_true)))
                for item in items
            ]
            if len({r.value for r in responses}) < 2:
                continue
            try:
                ml = estimate_ml(items, responses)
            except NonFiniteMLEError:
                continue
            map_diffuse = estimate_map(items, responses, Prior(0.0, 10.0))
            wle = estimate_wle(items, responses)
            assert abs(ml.theta - map_diffuse.theta) < 0.02
            assert abs(ml.theta - wle.theta) < 0.02
            agreements += 1
        assert agreements >= 8

    def test_se_weakly_decreases_with_items_at_fixed_theta(self, rng):
        items, responses = random_pattern(rng, 20, theta_true=0.0, models=("2PL",))
        theta = 0.25
        info = [total_information(items[:n], theta) for n in range(1, 21)]
        se = [1.0 / np.sqrt(i) for i in info]
        assert all(x >= y - 1e-12 for x, y in zip(se, se[1:]))

    def test_determinism(self, rng):
        items, responses = random_pattern(rng, 12)
        first = fallback_chain(items, responses, "WLE", alternate="MAP")
        second = fallback_chain(items, responses, "WLE", alternate="MAP")
        assert first == second
