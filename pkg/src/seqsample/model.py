"""Parameter spaces, priors, and observation families.

Two Gaussian families are built in:

* ``gaussian_known_mean_theta_variance`` -- zero-mean observations whose
  variance is an affine function of the shared parameter,
  sigma^2(theta) = a + b*theta.  Shared-only mode.
* ``gaussian_theta_mean_alpha_variance`` -- observations N(theta, alpha)
  with the mean shared across experiments and the variance private to
  each experiment.

Custom families plug in their own log-density, sampler, and Fisher
information callbacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BoundaryError, ConfigurationError, ModelEvaluationError

GAUSSIAN_VARIANCE_PROFILE = "gaussian_known_mean_theta_variance"
GAUSSIAN_MEAN_VARIANCE = "gaussian_theta_mean_alpha_variance"
CUSTOM = "custom"

FI_DEFINITIONAL = "definitional"
FI_PAPER_NARRATIVE = "paper_narrative"

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ParameterSpace:
    """Compact interval with a fixed uniform evaluation grid."""

    lower: float
    upper: float
    grid_size: int = 197

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConfigurationError("space bounds must be finite")
        if not self.lower < self.upper:
            raise ConfigurationError(
                f"space must have non-empty interior, got [{self.lower}, {self.upper}]"
            )
        if self.grid_size < 2:
            raise ConfigurationError("grid_size must be at least 2")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.grid_size)

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.grid_size - 1)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def nearest_index(self, x: float) -> int:
        idx = round((x - self.lower) / self.spacing)
        return int(min(max(idx, 0), self.grid_size - 1))


def trapezoid_weights(space: ParameterSpace) -> np.ndarray:
    w = np.full(space.grid_size, space.spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class Prior:
    """Prior density on a parameter space, evaluated on its grid.

    ``uniform`` has constant density 1/width; ``tabulated`` takes
    non-negative weights on the grid and normalizes them to integrate
    to one under the trapezoid rule.
    """

    kind: str
    support: ParameterSpace
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "tabulated"):
            raise ConfigurationError(f"unknown prior kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.weights is None:
                raise ConfigurationError("tabulated prior requires weights")
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.support.grid_size,):
                raise ConfigurationError(
                    "tabulated prior weights must match the grid size"
                )
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ConfigurationError("prior weights must be finite and non-negative")
            if w.sum() <= 0:
                raise ConfigurationError("prior weights must have positive mass")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        elif self.weights is not None:
            raise ConfigurationError("uniform prior takes no weights")

    def density(self) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(self.support.grid_size, 1.0 / self.support.width)
        w = np.asarray(self.weights, dtype=float)
        z = float(np.sum(w * trapezoid_weights(self.support)))
        return w / z

    def log_density(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.density())


@dataclass(frozen=True)
class CustomFamily:
    """Callback bundle for user-defined observation families.

    ``log_pdf(y, theta, alpha)`` and ``fisher_shared(theta, alpha)`` are
    required (pass ``alpha=None`` in shared-only mode);
    ``fisher_private`` is required when a private space is declared.
    ``moments(theta, alpha) -> (mean, var)`` is optional and enables the
    standardized Fisher oracle and predictive lookahead.
    """

    log_pdf: Callable
    sampler: Callable
    fisher_shared: Callable
    fisher_private: Optional[Callable] = None
    moments: Optional[Callable] = None


@dataclass(frozen=True)
class ExperimentModel:
    family: str
    shared_space: ParameterSpace
    private_space: Optional[ParameterSpace] = None
    var_intercept: float = 0.0
    var_slope: float = 0.0
    fisher_variant: str = FI_DEFINITIONAL
    custom: Optional[CustomFamily] = None
    label: str = ""

    def __post_init__(self):
        if self.family == GAUSSIAN_VARIANCE_PROFILE:
            if self.private_space is not None:
                raise ConfigurationError(
                    "variance-profile family has no private parameter"
                )
            v = variance_profile(self, self.shared_space.points)
            if np.any(v <= 0):
                raise ConfigurationError(
                    f"sigma^2(theta) = {self.var_intercept} + {self.var_slope}*theta "
                    "is not positive over the shared grid"
                )
        elif self.family == GAUSSIAN_MEAN_VARIANCE:
            if self.private_space is None:
                raise ConfigurationError(
                    "mean-variance family requires a private space"
                )
            if self.private_space.lower <= 0:
                raise ConfigurationError("variance parameter space must be positive")
        elif self.family == CUSTOM:
            if self.custom is None:
                raise ConfigurationError("custom family requires callbacks")
            if self.private_space is not None and self.custom.fisher_private is None:
                raise ConfigurationError(
                    "custom family with a private space requires fisher_private"
                )
        else:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.fisher_variant not in (FI_DEFINITIONAL, FI_PAPER_NARRATIVE):
            raise ConfigurationError(f"unknown fisher variant {self.fisher_variant!r}")
        if self.fisher_variant == FI_PAPER_NARRATIVE and self.family != GAUSSIAN_VARIANCE_PROFILE:
            raise ConfigurationError(
                "paper-narrative FI applies only to the variance-profile family"
            )

    @property
    def has_private(self) -> bool:
        return self.private_space is not None


def variance_profile(model: ExperimentModel, theta) -> np.ndarray:
    """sigma^2(theta) = a + b*theta for the variance-profile family."""
    return model.var_intercept + model.var_slope * np.asarray(theta, dtype=float)


@dataclass(frozen=True)
class ExperimentSuite:
    models: tuple
    shared_space: ParameterSpace

    def __post_init__(self):
        if len(self.models) < 1:
            raise ConfigurationError("suite needs at least one experiment")
        for m in self.models:
            if m.shared_space != self.shared_space:
                raise ConfigurationError("all models must share the same shared space")
        private = [m.has_private for m in self.models]
        if any(private) and not all(private):
            raise ConfigurationError(
                "either every model has a private space or none do"
            )
        object.__setattr__(self, "models", tuple(self.models))

    @property
    def k(self) -> int:
        return len(self.models)

    @property
    def is_joint(self) -> bool:
        return self.models[0].has_private


@dataclass(frozen=True)
class GroundTruth:
    theta: float
    alphas: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))


def validate_truth(suite: ExperimentSuite, truth: GroundTruth) -> None:
    if not suite.shared_space.contains(truth.theta):
        raise ConfigurationError(
            f"theta*={truth.theta} outside shared space "
            f"[{suite.shared_space.lower}, {suite.shared_space.upper}]"
        )
    if suite.is_joint:
        if len(truth.alphas) != suite.k:
            raise ConfigurationError(
                f"expected {suite.k} private ground-truth values, got {len(truth.alphas)}"
            )
        for i, (m, a) in enumerate(zip(suite.models, truth.alphas), start=1):
            if not m.private_space.contains(a):
                raise ConfigurationError(
                    f"alpha*_{i}={a} outside its private space"
                )
    elif truth.alphas:
        raise ConfigurationError("shared-only suite takes no private ground truth")


def log_pdf(model: ExperimentModel, y: float, theta: float, alpha: float | None = None):
    """Log-density of one observation, log f_i(y | theta, alpha)."""
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        if alpha is not None:
            raise ConfigurationError("variance-profile family takes no alpha")
        v = model.var_intercept + model.var_slope * theta
        if v <= 0:
            raise ModelEvaluationError(f"sigma^2({theta}) = {v} <= 0")
        out = -0.5 * (_LOG_2PI + math.log(v)) - (y * y) / (2.0 * v)
    elif model.family == GAUSSIAN_MEAN_VARIANCE:
        if alpha is None:
            raise ConfigurationError("mean-variance family requires alpha")
        if alpha <= 0:
            raise ModelEvaluationError(f"variance alpha = {alpha} <= 0")
        r = y - theta
        out = -0.5 * (_LOG_2PI + math.log(alpha)) - (r * r) / (2.0 * alpha)
    else:
        out = model.custom.log_pdf(y, theta, alpha)
    if not math.isfinite(out):
        raise ModelEvaluationError(
            f"non-finite log-density at y={y}, theta={theta}, alpha={alpha}"
        )
    return float(out)


def draw_sample(model: ExperimentModel, truth: GroundTruth, rng, index: int = 0) -> float:
    """One observation from f_i(. | theta*, alpha*_i), driven by the caller's rng."""
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        v = model.var_intercept + model.var_slope * truth.theta
        return float(rng.normal(0.0, math.sqrt(v)))
    if model.family == GAUSSIAN_MEAN_VARIANCE:
        return float(rng.normal(truth.theta, math.sqrt(truth.alphas[index])))
    alpha = truth.alphas[index] if truth.alphas else None
    return float(model.custom.sampler(truth.theta, alpha, rng))


def fisher_shared(
    model: ExperimentModel,
    theta: float,
    alpha: float | None = None,
    variant: str | None = None,
) -> float:
    """Fisher information about the shared parameter, -E[d^2 lambda / d theta^2].

    For the variance-profile family the ``paper_narrative`` variant drops
    the d sigma^2/d theta chain-rule factor and returns 1/(2 sigma^4);
    the ``definitional`` variant keeps it: (d sigma^2/d theta)^2 / (2 sigma^4).
    """
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        v = model.var_intercept + model.var_slope * theta
        if v <= 0:
            raise ModelEvaluationError(f"sigma^2({theta}) = {v} <= 0")
        chosen = variant or model.fisher_variant
        if chosen == FI_PAPER_NARRATIVE:
            return 1.0 / (2.0 * v * v)
        return (model.var_slope ** 2) / (2.0 * v * v)
    if model.family == GAUSSIAN_MEAN_VARIANCE:
        return 1.0 / alpha
    return float(model.custom.fisher_shared(theta, alpha))


def fisher_private(model: ExperimentModel, theta: float, alpha: float) -> float:
    """Fisher information about the private parameter, -E[d^2 lambda / d alpha^2]."""
    if not model.has_private:
        raise ConfigurationError("model has no private parameter")
    if model.family == GAUSSIAN_MEAN_VARIANCE:
        return 1.0 / (2.0 * alpha * alpha)
    return float(model.custom.fisher_private(theta, alpha))


def observation_moments(model: ExperimentModel, theta: float, alpha: float | None):
    """(mean, variance) of one observation, when the family exposes them."""
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        return 0.0, model.var_intercept + model.var_slope * theta
    if model.family == GAUSSIAN_MEAN_VARIANCE:
        return theta, float(alpha)
    if model.custom.moments is not None:
        return model.custom.moments(theta, alpha)
    return None


def numeric_fisher(
    model: ExperimentModel,
    theta: float,
    alpha: float | None,
    which: str,
    step: float = 1e-3,
    n_draws: int = 100_000,
    rng=None,
    standardize: bool = True,
) -> float:
    """Monte Carlo + central-finite-difference estimate of the Fisher information.

    Test oracle: draws from the model at (theta, alpha) and averages the
    second difference of the log-likelihood. ``standardize`` recentres and
    rescales the draws to the model's stated observation moments, which
    removes most of the Monte Carlo variance without consulting any
    analytic information formula.
    """
    if step <= 0:
        raise ConfigurationError("step must be positive")
    if which not in ("shared", "private"):
        raise ConfigurationError(f"which must be 'shared' or 'private', got {which!r}")
    if which == "shared":
        space = model.shared_space
        center = theta
    else:
        if not model.has_private:
            raise ConfigurationError("model has no private parameter")
        space = model.private_space
        center = alpha
    if center - step < space.lower or center + step > space.upper:
        raise BoundaryError(
            f"step {step} crosses the boundary of [{space.lower}, {space.upper}] "
            f"around {center}"
        )

    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        m, v = 0.0, model.var_intercept + model.var_slope * theta
        ys = rng.normal(m, math.sqrt(v), size=n_draws)
    elif model.family == GAUSSIAN_MEAN_VARIANCE:
        m, v = theta, alpha
        ys = rng.normal(m, math.sqrt(v), size=n_draws)
    else:
        truth = GroundTruth(theta, (alpha,) if alpha is not None else ())
        ys = np.array([draw_sample(model, truth, rng) for _ in range(n_draws)])

    if standardize:
        mom = observation_moments(model, theta, alpha)
        if mom is not None:
            m, v = mom
            centered = ys - ys.mean()
            s2 = float(np.mean(centered * centered))
            if s2 > 0:
                ys = m + centered * math.sqrt(v / s2)

    def ll(th, al):
        return _log_pdf_batch(model, ys, th, al)

    if which == "shared":
        hi, mid, lo = ll(theta + step, alpha), ll(theta, alpha), ll(theta - step, alpha)
    else:
        hi, mid, lo = ll(theta, alpha + step), ll(theta, alpha), ll(theta, alpha - step)
    second = (hi - 2.0 * mid + lo) / (step * step)
    return float(-np.mean(second))


def _log_pdf_batch(model: ExperimentModel, ys: np.ndarray, theta: float, alpha):
    if model.family == GAUSSIAN_VARIANCE_PROFILE:
        v = model.var_intercept + model.var_slope * theta
        if v <= 0:
            raise ModelEvaluationError(f"sigma^2({theta}) = {v} <= 0")
        return -0.5 * (_LOG_2PI + math.log(v)) - (ys * ys) / (2.0 * v)
    if model.family == GAUSSIAN_MEAN_VARIANCE:
        if alpha <= 0:
            raise ModelEvaluationError(f"variance alpha = {alpha} <= 0")
        r = ys - theta
        return -0.5 * (_LOG_2PI + math.log(alpha)) - (r * r) / (2.0 * alpha)
    return np.array([model.custom.log_pdf(y, theta, alpha) for y in ys])


def sensor_profile_coefficients(k: int) -> list[tuple[float, float]]:
    """(intercept, slope) pairs of the K-sensor variance profile."""
    if k < 2 or k % 2 != 0:
        raise ConfigurationError(f"sensor network needs an even K >= 2, got {k}")
    coeffs = []
    for i in range(1, k + 1):
        if i <= k // 2:
            a = (i - 1) ** 2 / (k * (k - i + 1))
            b = (k - 2 * i + 2) / (k - i + 1)
        else:
            a = i / k
            b = (k - 2 * i) / i
        coeffs.append((a, b))
    return coeffs


def make_sensor_network(
    k: int,
    shared_space: ParameterSpace | None = None,
    fisher_variant: str = FI_PAPER_NARRATIVE,
) -> ExperimentSuite:
    """K zero-mean Gaussian sensors whose variances tile the theta range.

    Sensor i is most informative (paper-narrative FI) for
    theta in ((i-1)/K, i/K).
    """
    space = shared_space or ParameterSpace(0.01, 0.99)
    models = tuple(
        ExperimentModel(
            family=GAUSSIAN_VARIANCE_PROFILE,
            shared_space=space,
            var_intercept=a,
            var_slope=b,
            fisher_variant=fisher_variant,
            label=f"sensor_{i}",
        )
        for i, (a, b) in enumerate(sensor_profile_coefficients(k), start=1)
    )
    return ExperimentSuite(models=models, shared_space=space)
