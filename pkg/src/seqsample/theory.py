"""Sample-complexity characteristics and theorem-bound reference values.

``v_beta`` and ``w_beta`` are the quantities that scale the optimal
average sample complexity in the shared-only and joint settings.  The
theorem bounds are reported as displayed -- they depend on an analysis
parameter h in (0,1) whose admissible range involves existential
constants, so the report is an asymptotic reference, not a certified
envelope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, IllPosedError
from .model import ExperimentSuite, GroundTruth
from .optimizer import minimize, objective
from .rules import Tolerances, private_information, shared_information


@dataclass(frozen=True)
class BoundReport:
    """Inputs for the theorem displays at one parameter point."""

    mode: str                       # "shared" or "joint"
    k: int
    beta: float
    v_beta: float
    q_star: tuple
    w_beta: Optional[float] = None
    v_shared: Optional[float] = None
    v_private: tuple = ()
    v_max: Optional[float] = None
    v_min: Optional[float] = None
    beta_max: float = 0.0
    beta_min: float = 0.0


@dataclass(frozen=True)
class TheoremBounds:
    """Right-hand sides of the converse/achievability displays at one h."""

    h: float
    mode: str
    converse: float
    achievable: float


def v_beta(suite: ExperimentSuite, theta: float, beta: float, alphas=()) -> float:
    """min_i 1/(beta * I_i(theta)) -- the shared-only complexity scale."""
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    if not suite.shared_space.contains(theta):
        raise ConfigurationError(f"theta={theta} outside the shared space")
    if suite.is_joint and len(alphas) != suite.k:
        raise ConfigurationError("joint suite needs alphas to evaluate the FI")
    fi = shared_information(suite, theta, alphas)
    top = fi.max()
    if top <= 0:
        raise IllPosedError(f"all experiments carry zero information at theta={theta}")
    return float(1.0 / (beta * top))


def w_beta(suite: ExperimentSuite, truth: GroundTruth, tol: Tolerances):
    """(W, q*) at the ground truth -- the joint complexity scale and its argmin."""
    if not suite.is_joint:
        raise ConfigurationError("w_beta is defined for shared+private suites")
    js = shared_information(suite, truth.theta, truth.alphas)
    jp = private_information(suite, truth.theta, truth.alphas)
    q = minimize(js, jp, tol)
    return float(objective(q, js, jp, tol)), q


def bound_report(suite: ExperimentSuite, truth: GroundTruth, tol: Tolerances) -> BoundReport:
    if suite.is_joint:
        w, q = w_beta(suite, truth, tol)
        js = shared_information(suite, truth.theta, truth.alphas)
        jp = private_information(suite, truth.theta, truth.alphas)
        v_sh = float(1.0 / (tol.beta * (q @ js)))
        v_pr = tuple(
            float(1.0 / (b * qi * j)) for b, qi, j in zip(tol.beta_private, q, jp)
        )
        parts = (v_sh,) + v_pr
        betas = (tol.beta,) + tol.beta_private
        return BoundReport(
            mode="joint",
            k=suite.k,
            beta=tol.beta,
            v_beta=v_sh,
            q_star=tuple(float(x) for x in q),
            w_beta=w,
            v_shared=v_sh,
            v_private=v_pr,
            v_max=max(parts),
            v_min=min(parts),
            beta_max=max(betas),
            beta_min=min(betas),
        )
    v = v_beta(suite, truth.theta, tol.beta)
    fi = shared_information(suite, truth.theta)
    best = np.flatnonzero(fi == fi.max())
    q = np.zeros(suite.k)
    q[best] = 1.0 / best.size
    return BoundReport(
        mode="shared",
        k=suite.k,
        beta=tol.beta,
        v_beta=v,
        q_star=tuple(float(x) for x in q),
        beta_max=tol.beta,
        beta_min=tol.beta,
    )


def theorem_bounds(report: BoundReport, h: float) -> TheoremBounds:
    """Displayed converse/achievability values at analysis parameter h."""
    if not 0 < h < 1:
        raise ConfigurationError("h must lie in (0, 1)")
    if report.mode == "shared":
        converse = (report.v_beta - h / report.beta) * (1.0 - h)
        achievable = report.v_beta + h / report.beta + 1.0
    else:
        k = report.k
        converse = (report.w_beta - h) * (1.0 - (k + 1) * h) / (k + 1)
        achievable = (
            report.w_beta / (k + 1)
            + (report.v_max - report.v_min)
            + (1.0 / report.beta_min + 1.0 / report.beta_max) * h
            + 2.0
        )
    return TheoremBounds(h=h, mode=report.mode, converse=converse, achievable=achievable)
