"""Ability estimation: EAP, ML, MAP and WLE with a configurable fallback chain.

The quadrature estimators (EAP) run on a fixed grid and cannot fail, which is
why EAP terminates every fallback chain. The root-finding estimators use a
safeguarded Newton iteration (Fisher scoring step with a bisection fallback
whenever a step would leave the root bracket).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EstimationError, NonFiniteMLEError
from .irt import (
    ItemParameters,
    Response,
    pattern_log_likelihood,
    score_function,
    total_information,
)

DEFAULT_BOUNDS = (-4.5, 4.5)
SCORE_TOL = 1e-8
MAX_ITERATIONS = 50
_INFO_DERIV_STEP = 1e-5


@dataclass(frozen=True)
class AbilityEstimate:
    """A point estimate of theta with its standard error and provenance."""

    theta: float
    se: float
    method: str
    converged: bool
    iterations: int = 0


@dataclass(frozen=True)
class Prior:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self) -> None:
        if self.sd <= 0:
            raise ValueError(f"prior sd must be positive, got {self.sd}")


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.size != weights.size:
            raise ValueError("nodes and weights must be 1-d and the same length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("grid weights must be positive")


def default_grid(n_nodes: int = 101, lo: float = -5.0, hi: float = 5.0) -> QuadratureGrid:
    """Equally spaced quadrature grid with uniform weights."""
    nodes = np.linspace(lo, hi, n_nodes)
    return QuadratureGrid(nodes, np.full(n_nodes, 1.0 / n_nodes))


DEFAULT_PRIOR = Prior()
DEFAULT_GRID = default_grid()


def _log_prior(nodes: np.ndarray, prior: Prior) -> np.ndarray:
    return -0.5 * ((nodes - prior.mean) / prior.sd) ** 2


def estimate_eap(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    prior: Prior = DEFAULT_PRIOR,
    grid: QuadratureGrid | None = None,
) -> AbilityEstimate:
    """Posterior mean and sd of theta on the quadrature grid.

    With no responses the posterior is the prior, so the prior moments are
    returned exactly.
    """
    grid = grid or DEFAULT_GRID
    if grid.nodes.size < 21:
        raise ValueError(f"quadrature grid needs at least 21 nodes, got {grid.nodes.size}")
    if not responses:
        return AbilityEstimate(prior.mean, prior.sd, "EAP", converged=True)
    log_post = (
        pattern_log_likelihood(items, list(responses), grid.nodes)
        + _log_prior(grid.nodes, prior)
        + np.log(grid.weights)
    )
    weights = np.exp(log_post - log_post.max())
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        raise EstimationError("posterior mass vanished on the quadrature grid")
    theta = float(np.dot(grid.nodes, weights) / total)
    var = float(np.dot((grid.nodes - theta) ** 2, weights) / total)
    theta = float(np.clip(theta, *DEFAULT_BOUNDS))
    return AbilityEstimate(theta, math.sqrt(var), "EAP", converged=True)


def _safeguarded_newton(
    f: Callable[[float], float],
    curvature: Callable[[float], float],
    lo: float,
    hi: float,
) -> tuple[float, bool, int]:
    """Find the root of a decreasing-through-zero f on [lo, hi].

    `curvature(theta)` supplies -f'(theta) (a positive quantity such as the
    test information). Newton steps that would leave the current bracket, or
    that stall, are replaced by bisection. Returns (root, converged, iters).
    """
    f_lo, f_hi = f(lo), f(hi)
    if f_lo < 0 or f_hi > 0:
        raise EstimationError("root not bracketed")
    theta = 0.5 * (lo + hi)
    value = f(theta)
    iterations = 0
    force_bisect = False
    while abs(value) >= SCORE_TOL and iterations < MAX_ITERATIONS:
        iterations += 1
        if value > 0:
            lo = theta
        else:
            hi = theta
        candidate = None
        if not force_bisect:
            curv = curvature(theta)
            if curv > 0:
                candidate = theta + value / curv
                if not lo < candidate < hi:
                    candidate = None
        if candidate is None:
            candidate = 0.5 * (lo + hi)
        new_value = f(candidate)
        # when the supplied curvature misjudges the slope the Newton step
        # stalls; a bisection round restores guaranteed bracket shrinkage
        force_bisect = abs(new_value) > 0.7 * abs(value)
        theta, value = candidate, new_value
    return theta, abs(value) < SCORE_TOL, iterations


def estimate_ml(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> AbilityEstimate:
    """Maximum-likelihood theta: the root of the score function.

    Raises NonFiniteMLEError when the score has no sign change inside the
    bounds, which is what an all-correct or all-incorrect dichotomous pattern
    produces.
    """
    responses = list(responses)
    if not responses:
        raise ValueError("ML estimation needs at least one response")
    lo, hi = bounds

    def score(theta: float) -> float:
        return score_function(items, responses, theta)

    s_lo, s_hi = score(lo), score(hi)
    if s_lo < 0 and s_hi < 0 or s_lo > 0 and s_hi > 0:
        raise NonFiniteMLEError("score has no root inside the estimation bounds")
    theta, converged, iterations = _safeguarded_newton(
        score, lambda t: total_information(items, t), lo, hi
    )
    info = total_information(items, theta)
    se = 1.0 / math.sqrt(info) if info > 0 else math.inf
    return AbilityEstimate(theta, se, "ML", converged, iterations)


def estimate_map(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    prior: Prior = DEFAULT_PRIOR,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> AbilityEstimate:
    """Posterior mode of theta under a normal prior.

    The prior penalty regularises extreme response patterns, so an interior
    maximum always exists and no pattern is rejected.
    """
    responses = list(responses)
    var = prior.sd * prior.sd
    if not responses:
        return AbilityEstimate(prior.mean, prior.sd, "MAP", converged=True)
    lo, hi = bounds

    def penalized(theta: float) -> float:
        return score_function(items, responses, theta) - (theta - prior.mean) / var

    def curvature(theta: float) -> float:
        return total_information(items, theta) + 1.0 / var

    if penalized(lo) <= 0:
        theta, converged, iterations = lo, True, 0
    elif penalized(hi) >= 0:
        theta, converged, iterations = hi, True, 0
    else:
        theta, converged, iterations = _safeguarded_newton(penalized, curvature, lo, hi)
    se = 1.0 / math.sqrt(total_information(items, theta) + 1.0 / var)
    return AbilityEstimate(theta, se, "MAP", converged, iterations)


def estimate_wle(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> AbilityEstimate:
    """Warm's weighted likelihood estimate.

    Solves score(theta) + I'(theta) / (2 I(theta)) = 0, where I is the test
    information; the correction term keeps the root finite for all-extreme
    dichotomous patterns. I' is taken by central difference.
    """
    responses = list(responses)
    if not responses:
        raise ValueError("WLE estimation needs at least one response")
    lo, hi = bounds
    h = _INFO_DERIV_STEP

    def weighted_score(theta: float) -> float:
        info = total_information(items, theta)
        d_info = (total_information(items, theta + h) - total_information(items, theta - h)) / (2 * h)
        return score_function(items, responses, theta) + d_info / (2.0 * info)

    w_lo, w_hi = weighted_score(lo), weighted_score(hi)
    if w_lo < 0 and w_hi < 0 or w_lo > 0 and w_hi > 0:
        raise EstimationError("weighted score has no root inside the estimation bounds")
    theta, converged, iterations = _safeguarded_newton(
        weighted_score, lambda t: total_information(items, t), lo, hi
    )
    info = total_information(items, theta)
    se = 1.0 / math.sqrt(info) if info > 0 else math.inf
    return AbilityEstimate(theta, se, "WLE", converged, iterations)


_ESTIMATORS = {
    "EAP": lambda items, responses, prior, grid, bounds: estimate_eap(items, responses, prior, grid),
    "ML": lambda items, responses, prior, grid, bounds: estimate_ml(items, responses, bounds),
    "MAP": lambda items, responses, prior, grid, bounds: estimate_map(items, responses, prior, bounds),
    "WLE": lambda items, responses, prior, grid, bounds: estimate_wle(items, responses, bounds),
}

ESTIMATION_METHODS = tuple(_ESTIMATORS)


def _acceptable(est: AbilityEstimate, bounds: tuple[float, float]) -> bool:
    return (
        est.converged
        and np.isfinite(est.theta)
        and np.isfinite(est.se)
        and est.se > 0
        and bounds[0] <= est.theta <= bounds[1]
    )


def fallback_chain(
    items: Sequence[ItemParameters],
    responses: Sequence[Response],
    method: str,
    alternate: str | None = None,
    prior: Prior = DEFAULT_PRIOR,
    grid: QuadratureGrid | None = None,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> AbilityEstimate:
    """Estimate theta by the configured method, falling back on failure.

    The chain is primary -> alternate -> EAP. An attempt fails when the
    estimator raises, does not converge, or produces a theta outside the
    bounds; EAP always succeeds, so the chain always returns. The returned
    estimate's `method` records which stage produced it.
    """
    chain: list[str] = []
    for name in (method, alternate, "EAP"):
        if name and name not in chain:
            if name not in _ESTIMATORS:
                raise ValueError(f"unknown estimation method {name!r}")
            chain.append(name)
    for name in chain[:-1]:
        if not responses and name in ("ML", "WLE"):
            continue
        try:
            est = _ESTIMATORS[name](items, responses, prior, grid, bounds)
        except (NonFiniteMLEError, EstimationError):
            continue
        if _acceptable(est, bounds):
            return est
    return _ESTIMATORS[chain[-1]](items, responses, prior, grid, bounds)
