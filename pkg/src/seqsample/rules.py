"""Sampling rules and stopping rules, plus comparison baselines.

Sampling rules map the current belief to the next experiment:

* ``greedy_fi`` -- most shared-informative experiment at the ML point.
* ``greedy_trace`` -- largest trace of the per-experiment information
  matrix (shared + private terms; cross terms vanish for the built-in
  families) at the profile-ML point.
* ``cost_aware`` -- draw from the tolerance-weighted simplex minimizer.
* ``uniform_random``, ``genie`` (fixed index), ``fixed_distribution``.

Stopping rules test the conditional posterior costs against the
tolerance vector; ``unified_cost`` is the fixed-sampling-cost baseline,
stopping when the one-step expected cost reduction no longer exceeds c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .belief import Belief
from .errors import ConfigurationError
from .model import ExperimentSuite, fisher_private, fisher_shared, observation_moments
from .optimizer import minimize

GREEDY_FI = "greedy_fi"
GREEDY_TRACE = "greedy_trace"
COST_AWARE = "cost_aware"
UNIFORM_RANDOM = "uniform_random"
GENIE = "genie"
FIXED_DISTRIBUTION = "fixed_distribution"
_SAMPLING_KINDS = (
    GREEDY_FI, GREEDY_TRACE, COST_AWARE, UNIFORM_RANDOM, GENIE, FIXED_DISTRIBUTION,
)

SHARED_THRESHOLD = "shared_threshold"
JOINT_THRESHOLD = "joint_threshold"
UNIFIED_COST = "unified_cost"
_STOPPING_KINDS = (SHARED_THRESHOLD, JOINT_THRESHOLD, UNIFIED_COST)

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(16)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(math.pi)


@dataclass(frozen=True)
class Tolerances:
    """Guarantee vector (beta, beta_1..beta_K) and the hard trial budget."""

    beta: float
    beta_private: tuple = ()
    t_max: int = 100_000

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError("beta must be positive")
        object.__setattr__(
            self, "beta_private", tuple(float(b) for b in self.beta_private)
        )
        if any(b <= 0 for b in self.beta_private):
            raise ConfigurationError("private tolerances must be positive")
        if self.t_max < 1:
            raise ConfigurationError("t_max must be at least 1")


@dataclass(frozen=True)
class SamplingRule:
    """Tagged sampling-rule configuration. ``index`` is 0-based internally."""

    kind: str
    index: Optional[int] = None
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in _SAMPLING_KINDS:
            raise ConfigurationError(f"unknown sampling rule {self.kind!r}")
        if self.kind == GENIE:
            if self.index is None or self.index < 0:
                raise ConfigurationError("genie rule needs a non-negative index")
        elif self.index is not None:
            raise ConfigurationError(f"{self.kind} takes no index")
        if self.kind == FIXED_DISTRIBUTION:
            if self.weights is None:
                raise ConfigurationError("fixed_distribution needs weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ConfigurationError("weights must be on the probability simplex")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        elif self.weights is not None:
            raise ConfigurationError(f"{self.kind} takes no weights")

    def label(self) -> str:
        if self.kind == GENIE:
            return f"genie_{self.index + 1}"
        if self.kind == FIXED_DISTRIBUTION:
            return "fixed_" + "_".join(f"{w:g}" for w in self.weights)
        return self.kind


@dataclass(frozen=True)
class StoppingRule:
    kind: str
    c: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _STOPPING_KINDS:
            raise ConfigurationError(f"unknown stopping rule {self.kind!r}")
        if self.kind == UNIFIED_COST:
            if self.c is None or not self.c > 0:
                raise ConfigurationError("unified_cost needs c > 0")
        elif self.c is not None:
            raise ConfigurationError(f"{self.kind} takes no cost parameter")


def _argmax_uniform(values, rng) -> int:
    values = np.asarray(values, dtype=float)
    ties = np.flatnonzero(values == values.max())
    if ties.size == 1:
        return int(ties[0])
    if rng is None:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


def _categorical(weights, rng) -> int:
    cdf = np.cumsum(np.asarray(weights, dtype=float))
    cdf /= cdf[-1]
    return int(np.searchsorted(cdf, rng.random(), side="right").clip(0, cdf.size - 1))


def shared_information(suite: ExperimentSuite, theta: float, alphas=()) -> np.ndarray:
    """Per-experiment shared-parameter FI at a parameter point."""
    if suite.is_joint:
        return np.array(
            [fisher_shared(m, theta, a) for m, a in zip(suite.models, alphas)]
        )
    return np.array([fisher_shared(m, theta) for m in suite.models])


def private_information(suite: ExperimentSuite, theta: float, alphas) -> np.ndarray:
    return np.array(
        [fisher_private(m, theta, a) for m, a in zip(suite.models, alphas)]
    )


def cost_aware_distribution(
    belief: Belief, suite: ExperimentSuite, tol: Tolerances, rng, cache=None
) -> np.ndarray:
    """The simplex distribution of the cost-aware rule at the current ML point."""
    ml = belief.ml_estimates(rng)
    key = (ml.theta_index, ml.alpha_indices)
    if cache is not None:
        q = cache.get(key)
        if q is not None:
            return q
    js = shared_information(suite, ml.theta, ml.alphas)
    jp = private_information(suite, ml.theta, ml.alphas) if suite.is_joint else None
    q = minimize(js, jp, tol)
    if cache is not None:
        cache[key] = q
    return q


def select(
    rule: SamplingRule,
    belief: Belief,
    suite: ExperimentSuite,
    tol: Tolerances,
    rng,
    cache=None,
) -> int:
    """Next experiment index (0-based); ties broken uniformly at random."""
    k = suite.k
    if rule.kind == UNIFORM_RANDOM:
        return int(rng.integers(k))
    if rule.kind == GENIE:
        if rule.index >= k:
            raise ConfigurationError(f"genie index {rule.index + 1} exceeds K={k}")
        return rule.index
    if rule.kind == FIXED_DISTRIBUTION:
        if len(rule.weights) != k:
            raise ConfigurationError("fixed_distribution weights must have length K")
        return _categorical(rule.weights, rng)
    if rule.kind == COST_AWARE:
        q = cost_aware_distribution(belief, suite, tol, rng, cache=cache)
        return _categorical(q, rng)

    ml = belief.ml_estimates(rng)
    if rule.kind == GREEDY_FI:
        scores = shared_information(suite, ml.theta, ml.alphas)
    else:  # greedy_trace: trace of the 2x2 FIM, zero cross-terms for built-ins
        scores = shared_information(suite, ml.theta, ml.alphas)
        if suite.is_joint:
            scores = scores + private_information(suite, ml.theta, ml.alphas)
    return _argmax_uniform(scores, rng)


def _lookahead_experiment(
    belief: Belief, suite: ExperimentSuite, sampling: Optional[SamplingRule]
) -> int:
    """Deterministic next selection used by the unified-cost lookahead."""
    if sampling is not None and sampling.kind == GENIE:
        return sampling.index
    ml = belief.ml_estimates(rng=None)  # first-index tie-break
    scores = shared_information(suite, ml.theta, ml.alphas)
    if sampling is not None and sampling.kind == GREEDY_TRACE and suite.is_joint:
        scores = scores + private_information(suite, ml.theta, ml.alphas)
    return _argmax_uniform(scores, rng=None)


def expected_one_step_cost(belief: Belief, suite: ExperimentSuite, experiment: int) -> float:
    """E[cost_shared(t+1) | F_t] under one more sample from the experiment.

    Posterior-predictive average over a 16-point Gauss-Hermite rule whose
    location/scale come from the predictive moments.
    """
    model = suite.models[experiment]
    theta_mean, theta_var = belief.shared_moments()
    alpha_mean = None
    if suite.is_joint:
        alpha_mean, _ = belief.private_moments(experiment, theta_mean)
    mom = observation_moments(model, theta_mean, alpha_mean)
    if mom is None:
        raise ConfigurationError(
            "unified_cost needs observation moments; custom family lacks them"
        )
    mean, var = mom
    var = var + theta_var
    sd = math.sqrt(max(var, 1e-300))
    total = 0.0
    for x, w in zip(_GH_NODES, _GH_WEIGHTS):
        nxt = belief.copy()
        nxt.update(experiment, mean + math.sqrt(2.0) * sd * x)
        total += w * nxt.costs()[0]
    return total


def should_stop(
    rule: StoppingRule,
    belief: Belief,
    tol: Tolerances,
    suite: Optional[ExperimentSuite] = None,
    sampling: Optional[SamplingRule] = None,
) -> bool:
    """Whether the posterior-cost constraints (or the cost trade-off) allow stopping."""
    cost_shared, cost_private = belief.costs()
    if rule.kind == SHARED_THRESHOLD:
        return cost_shared <= tol.beta
    if rule.kind == JOINT_THRESHOLD:
        if len(tol.beta_private) != len(cost_private):
            raise ConfigurationError(
                "joint stopping needs one private tolerance per experiment"
            )
        return cost_shared <= tol.beta and all(
            c <= b for c, b in zip(cost_private, tol.beta_private)
        )
    # unified_cost
    suite = suite if suite is not None else belief.suite
    nxt = _lookahead_experiment(belief, suite, sampling)
    reduction = cost_shared - expected_one_step_cost(belief, suite, nxt)
    return reduction <= rule.c
