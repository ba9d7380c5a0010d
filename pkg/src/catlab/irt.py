"""Item response functions for the 1PL, 2PL, 3PL and graded response models.

Everything in this module is a pure function of item parameters and a latent
ability value theta. Probabilities use the pure logistic metric (no 1.7
scaling constant). Probabilities are never clamped on output; clamping to
[1e-12, 1 - 1e-12] happens only inside log-likelihood evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

MODELS = ("1PL", "2PL", "3PL", "GRM")
DICHOTOMOUS_MODELS = ("1PL", "2PL", "3PL")

MAX_GUESSING = 0.35
_P_FLOOR = 1e-12


def _logistic(x: float) -> float:
    """Numerically stable scalar logistic (no exp of large positive args)."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class ItemParameters:
    """Calibrated parameters for a single item.

    For dichotomous models `b` is the difficulty; for GRM the ordered
    `thresholds` take its place (difficulty of each category boundary).
    `c` is the lower asymptote and only meaningful for 3PL.
    """

    item_id: str
    model: str
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    thresholds: tuple[float, ...] = ()
    group: str | None = None
    text: str = ""
    labels: tuple[str, ...] = ()

    @property
    def n_categories(self) -> int:
        if self.model == "GRM":
            return len(self.thresholds) + 1
        return 2

    @property
    def location(self) -> float:
        """Difficulty location: b for dichotomous items, mean threshold for GRM."""
        if self.model == "GRM":
            return float(np.mean(self.thresholds)) if self.thresholds else 0.0
        return self.b


@dataclass(frozen=True)
class Response:
    """A scored response: 0/1 for dichotomous items, category index for GRM."""

    item_id: str
    value: int
    latency_ms: int | None = None


def validate_item(item: ItemParameters) -> list[str]:
    """Return a list of invariant violations (empty when the item is valid)."""
    problems = []
    if item.model not in MODELS:
        problems.append(f"unknown model {item.model!r}")
        return problems
    if not np.isfinite(item.a) or item.a <= 0:
        problems.append(f"discrimination a={item.a} must be positive")
    if item.model == "1PL" and item.a != 1.0:
        problems.append(f"1PL requires a=1.0, got a={item.a}")
    if not 0.0 <= item.c <= MAX_GUESSING:
        problems.append(f"guessing c={item.c} outside [0, {MAX_GUESSING}]")
    if item.model != "3PL" and item.c != 0.0:
        problems.append(f"guessing c={item.c} only allowed for 3PL")
    if item.model == "GRM":
        if len(item.thresholds) < 1:
            problems.append("GRM item needs at least one threshold")
        elif any(not np.isfinite(t) for t in item.thresholds):
            problems.append("GRM thresholds must be finite")
        elif any(
            item.thresholds[i] >= item.thresholds[i + 1]
            for i in range(len(item.thresholds) - 1)
        ):
            problems.append(f"GRM thresholds {item.thresholds} not strictly increasing")
        if item.labels and len(item.labels) != item.n_categories:
            problems.append("label count does not match category count")
    else:
        if item.thresholds:
            problems.append("thresholds only allowed for GRM")
        if not np.isfinite(item.b):
            problems.append(f"difficulty b={item.b} must be finite")
        if item.labels and len(item.labels) != 2:
            problems.append("dichotomous items take exactly two labels")
    return problems


def _require_finite_theta(theta: float) -> None:
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")


def probability_correct(item: ItemParameters, theta: float) -> float:
    """P(correct) for a dichotomous item: c + (1-c) / (1 + exp(-a(theta-b)))."""
    _require_finite_theta(theta)
    p = _logistic(item.a * (theta - item.b))
    return item.c + (1.0 - item.c) * p


def cumulative_probability(item: ItemParameters, k: int, theta: float) -> float:
    """GRM cumulative probability P*_k of responding in category k or above.

    P*_0 = 1 and P*_m = 0 by convention; for 1 <= k <= m-1,
    P*_k(theta) = 1 / (1 + exp(-a(theta - b_k))).
    """
    _require_finite_theta(theta)
    if item.model != "GRM":
        raise ValueError(f"cumulative_probability requires a GRM item, got {item.model}")
    m = item.n_categories
    if not 0 <= k <= m:
        raise ValueError(f"category boundary k={k} outside [0, {m}]")
    if k == 0:
        return 1.0
    if k == m:
        return 0.0
    return _logistic(item.a * (theta - item.thresholds[k - 1]))


def category_probabilities(item: ItemParameters, theta: float) -> np.ndarray:
    """Probability of each response category at theta.

    Length-2 vector (incorrect, correct) for dichotomous models; for GRM the
    vector of adjacent differences of the cumulative probabilities, which sums
    to one by construction.
    """
    _require_finite_theta(theta)
    if item.model == "GRM":
        star = [1.0] + [_logistic(item.a * (theta - t)) for t in item.thresholds] + [0.0]
        return np.array([star[k] - star[k + 1] for k in range(len(star) - 1)])
    p = probability_correct(item, theta)
    return np.array([1.0 - p, p])


def item_information(item: ItemParameters, theta: float) -> float:
    """Fisher information of the item at theta.

    1PL/2PL: a^2 P (1-P).
    3PL:     a^2 ((P-c)/(1-c))^2 (1-P)/P.
    GRM:     a^2 sum_k (A_k - A_{k+1})^2 / P_k with A_k = P*_k (1 - P*_k).
    """
    _require_finite_theta(theta)
    a = item.a
    if item.model == "GRM":
        star = [1.0] + [_logistic(a * (theta - t)) for t in item.thresholds] + [0.0]
        slope = [s * (1.0 - s) for s in star]
        total = 0.0
        for k in range(len(star) - 1):
            prob = star[k] - star[k + 1]
            if prob > 0.0:
                total += (slope[k] - slope[k + 1]) ** 2 / prob
        return a * a * total
    p = probability_correct(item, theta)
    q = 1.0 - p
    if item.c == 0.0:
        return a * a * p * q
    if p <= 0.0:
        return 0.0
    pstar = (p - item.c) / (1.0 - item.c)
    return a * a * pstar * pstar * q / p


def total_information(items: Sequence[ItemParameters], theta: float) -> float:
    """Test information: the sum of item informations at theta."""
    return float(sum(item_information(item, theta) for item in items))


def _check_aligned(items: Sequence[ItemParameters], responses: Sequence[Response]) -> None:
    if not responses:
        raise ValueError("response set is empty")
    if len(items) != len(responses):
        raise ValueError(f"{len(items)} items but {len(responses)} responses")
    for item, resp in zip(items, responses):
        if item.item_id != resp.item_id:
            raise ValueError(f"response for {resp.item_id!r} paired with item {item.item_id!r}")
        if not 0 <= resp.value < item.n_categories:
            raise ValueError(
                f"value {resp.value} outside category range of item {item.item_id!r}"
            )


@dataclass
class _PatternArrays:
    """Response pattern split by model family, vectorised for grid evaluation.

    Each GRM response is reduced to its bracketing boundary difficulties
    (lo, hi) with -inf/+inf padding, so its category probability is
    expit(a(theta - lo)) - expit(a(theta - hi)) for every model uniformly.
    """

    d_a: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_b: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_c: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_u: np.ndarray = field(default_factory=lambda: np.empty(0))
    g_a: np.ndarray = field(default_factory=lambda: np.empty(0))
    g_lo: np.ndarray = field(default_factory=lambda: np.empty(0))
    g_hi: np.ndarray = field(default_factory=lambda: np.empty(0))


def _pattern_arrays(items: Sequence[ItemParameters], responses: Sequence[Response]) -> _PatternArrays:
    d_a, d_b, d_c, d_u = [], [], [], []
    g_a, g_lo, g_hi = [], [], []
    for item, resp in zip(items, responses):
        if item.model == "GRM":
            ext = (-np.inf, *item.thresholds, np.inf)
            g_a.append(item.a)
            g_lo.append(ext[resp.value])
            g_hi.append(ext[resp.value + 1])
        else:
            d_a.append(item.a)
            d_b.append(item.b)
            d_c.append(item.c)
            d_u.append(resp.value)
    return _PatternArrays(
        np.asarray(d_a), np.asarray(d_b), np.asarray(d_c), np.asarray(d_u, dtype=float),
        np.asarray(g_a), np.asarray(g_lo), np.asarray(g_hi),
    )


def pattern_log_likelihood(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    thetas: np.ndarray,
) -> np.ndarray:
    """Log-likelihood of the response pattern evaluated at each theta.

    Vectorised over `thetas`; this is the hot path for grid-based estimation.
    """
    arrays = _pattern_arrays(items, responses)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ll = np.zeros_like(thetas)
    if arrays.d_a.size:
        p = arrays.d_c[:, None] + (1.0 - arrays.d_c[:, None]) * expit(
            arrays.d_a[:, None] * (thetas[None, :] - arrays.d_b[:, None])
        )
        pu = np.where(arrays.d_u[:, None] > 0, p, 1.0 - p)
        ll += np.log(np.clip(pu, _P_FLOOR, 1.0)).sum(axis=0)
    if arrays.g_a.size:
        p = expit(arrays.g_a[:, None] * (thetas[None, :] - arrays.g_lo[:, None])) - expit(
            arrays.g_a[:, None] * (thetas[None, :] - arrays.g_hi[:, None])
        )
        ll += np.log(np.clip(p, _P_FLOOR, 1.0)).sum(axis=0)
    return ll


def response_log_likelihood(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    theta: float,
) -> float:
    """Sum of log category probabilities of the observed responses at theta."""
    _require_finite_theta(theta)
    _check_aligned(items, responses)
    return float(pattern_log_likelihood(items, responses, np.array([theta]))[0])


def score_function(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    theta: float,
) -> float:
    """First derivative of the response log-likelihood with respect to theta."""
    _require_finite_theta(theta)
    _check_aligned(items, responses)
    arrays = _pattern_arrays(items, responses)
    score = 0.0
    if arrays.d_a.size:
        pstar = expit(arrays.d_a * (theta - arrays.d_b))
        p = arrays.d_c + (1.0 - arrays.d_c) * pstar
        dp = arrays.d_a * (1.0 - arrays.d_c) * pstar * (1.0 - pstar)
        denom = np.clip(p * (1.0 - p), _P_FLOOR, None)
        score += float((dp * (arrays.d_u - p) / denom).sum())
    if arrays.g_a.size:
        lo = expit(arrays.g_a * (theta - arrays.g_lo))
        hi = expit(arrays.g_a * (theta - arrays.g_hi))
        dp = arrays.g_a * (lo * (1.0 - lo) - hi * (1.0 - hi))
        p = np.clip(lo - hi, _P_FLOOR, None)
        score += float((dp / p).sum())
    return score
