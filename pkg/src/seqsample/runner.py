"""Trial execution, Monte Carlo batches, beta sweeps, and calibration.

A trial runs the full sequential loop: check the stopping rule on the
current belief (time zero included), and while the budget allows, pick
the next experiment from the observed history only, draw one sample from
the ground truth, and fold it into the belief.  Everything is
deterministic given the seed; trials are independent and can run in
separate processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .belief import Belief, Estimates
from .errors import (
    CalibrationError,
    ConfigurationError,
    DegenerateLikelihoodError,
    TrialError,
)
from .model import ExperimentSuite, GroundTruth, Prior, draw_sample, validate_truth
from .rules import (
    COST_AWARE,
    GENIE,
    GREEDY_FI,
    GREEDY_TRACE,
    UNIFIED_COST,
    SamplingRule,
    StoppingRule,
    Tolerances,
    private_information,
    select,
    shared_information,
    should_stop,
)


@dataclass(frozen=True)
class TrialSetup:
    """Everything a single trial needs besides its seed."""

    suite: ExperimentSuite
    truth: GroundTruth
    sampling: SamplingRule
    stopping: StoppingRule
    tolerances: Tolerances
    shared_prior: Optional[Prior] = None
    private_priors: Optional[tuple] = None


@dataclass(frozen=True)
class TrajectoryStep:
    t: int
    experiment: int
    y: float
    cost_shared: float
    cost_private: tuple


@dataclass(frozen=True)
class TrialResult:
    stopped: bool
    T: int
    estimates: Optional[Estimates]
    selection_counts: tuple
    selection_freq: tuple
    seed: int
    trajectory: Optional[tuple] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class MonteCarloSummary:
    """T statistics over stopped trials; budget/error outcomes kept separate.

    ``mean_T_censored`` averages T over all non-error trials, counting
    budget-exhausted trials at their final t (a lower bound on their
    true stopping time).
    """

    mean_T: float
    std_T: float
    stop_rate: float
    n_trials: int
    n_error: int
    mean_T_censored: float
    trials: tuple


@dataclass(frozen=True)
class SweepCell:
    rule: str
    beta: float
    mean_T: float
    std_T: float
    stop_rate: float
    n: int
    mean_T_censored: float
    summary: MonteCarloSummary


def make_belief(setup: TrialSetup) -> Belief:
    return Belief(setup.suite, setup.shared_prior, setup.private_priors)


def run_trial(setup: TrialSetup, seed: int, log_trajectory: bool = False) -> TrialResult:
    """One sequential trial; raises TrialError on a degenerate posterior."""
    validate_truth(setup.suite, setup.truth)
    rng = np.random.default_rng(seed)
    suite, tol = setup.suite, setup.tolerances
    belief = make_belief(setup)
    cache: dict = {}
    steps = [] if log_trajectory else None
    stopped = False
    try:
        while True:
            if should_stop(setup.stopping, belief, tol, suite=suite, sampling=setup.sampling):
                stopped = True
                break
            if belief.t >= tol.t_max:
                break
            i = select(setup.sampling, belief, suite, tol, rng, cache=cache)
            y = draw_sample(suite.models[i], setup.truth, rng, index=i)
            belief.update(i, y)
            if steps is not None:
                cs, cp = belief.costs()
                steps.append(
                    TrajectoryStep(t=belief.t, experiment=i, y=y,
                                   cost_shared=cs, cost_private=cp)
                )
        est = belief.estimates(rng)
    except DegenerateLikelihoodError as exc:
        raise TrialError(
            f"trial with seed {seed} aborted at t={belief.t}: {exc}"
        ) from exc
    counts = tuple(belief.sample_counts)
    total = belief.t
    freq = tuple(c / total for c in counts) if total > 0 else (0.0,) * suite.k
    return TrialResult(
        stopped=stopped,
        T=total,
        estimates=est,
        selection_counts=counts,
        selection_freq=freq,
        seed=seed,
        trajectory=tuple(steps) if steps is not None else None,
    )


def _run_trial_record(setup: TrialSetup, seed: int, log_trajectory: bool) -> TrialResult:
    try:
        return run_trial(setup, seed, log_trajectory)
    except TrialError as exc:
        return TrialResult(
            stopped=False,
            T=0,
            estimates=None,
            selection_counts=(0,) * setup.suite.k,
            selection_freq=(0.0,) * setup.suite.k,
            seed=seed,
            error=str(exc),
        )


def summarize(trials: Sequence[TrialResult]) -> MonteCarloSummary:
    stopped_T = [t.T for t in trials if t.stopped]
    valid_T = [t.T for t in trials if t.error is None]
    n = len(trials)
    if stopped_T:
        mean_T = float(np.mean(stopped_T))
        std_T = float(np.std(stopped_T, ddof=1)) if len(stopped_T) > 1 else 0.0
    else:
        mean_T = math.nan
        std_T = math.nan
    return MonteCarloSummary(
        mean_T=mean_T,
        std_T=std_T,
        stop_rate=len(stopped_T) / n if n else 0.0,
        n_trials=n,
        n_error=sum(1 for t in trials if t.error is not None),
        mean_T_censored=float(np.mean(valid_T)) if valid_T else math.nan,
        trials=tuple(trials),
    )


def run_monte_carlo(
    setup: TrialSetup,
    n_trials: int,
    base_seed: int,
    threads: int = 1,
    log_trajectory: bool = False,
) -> MonteCarloSummary:
    """n_trials independent trials seeded base_seed .. base_seed+n_trials-1."""
    if n_trials < 1:
        raise ConfigurationError("n_trials must be at least 1")
    seeds = [base_seed + j for j in range(n_trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trials = list(
                pool.map(_run_trial_record, [setup] * n_trials, seeds,
                         [log_trajectory] * n_trials)
            )
    else:
        trials = [_run_trial_record(setup, s, log_trajectory) for s in seeds]
    return summarize(trials)


def sweep_beta(
    setup: TrialSetup,
    beta_grid: Sequence[float],
    rules: Sequence[SamplingRule],
    n_trials: int,
    base_seed: int,
    threads: int = 1,
) -> list[SweepCell]:
    """Full factorial over (rule, beta) with the seed schedule shared across rules."""
    cells = []
    for beta in beta_grid:
        if beta <= 0:
            raise ConfigurationError("beta values must be positive")
        tol = replace(setup.tolerances, beta=float(beta))
        for rule in rules:
            cell_setup = replace(setup, sampling=rule, tolerances=tol)
            summary = run_monte_carlo(cell_setup, n_trials, base_seed, threads=threads)
            cells.append(
                SweepCell(
                    rule=rule.label(),
                    beta=float(beta),
                    mean_T=summary.mean_T,
                    std_T=summary.std_T,
                    stop_rate=summary.stop_rate,
                    n=summary.n_trials,
                    mean_T_censored=summary.mean_T_censored,
                    summary=summary,
                )
            )
    return cells


def _pilot_mean_cost(setup: TrialSetup, c: float, n_pilot: int, base_seed: int) -> float:
    pilot = replace(setup, stopping=StoppingRule(UNIFIED_COST, c=c))
    summary = run_monte_carlo(pilot, n_pilot, base_seed)
    costs = [t.estimates.cost_shared for t in summary.trials if t.error is None]
    if not costs:
        raise CalibrationError("every pilot trial errored")
    return float(np.mean(costs))


def calibrate_unified_cost(
    setup: TrialSetup,
    beta_target: float,
    n_pilot: int,
    base_seed: int,
    c_init: Optional[float] = None,
    max_steps: int = 40,
) -> float:
    """Bisect c until the pilot-mean final shared cost lands in [0.9, 1.0]*beta.

    Larger c stops earlier and leaves a larger final cost, so the pilot
    mean is (stochastically) non-decreasing in c; the premise is checked
    on the bracket endpoints.
    """
    if beta_target <= 0:
        raise ConfigurationError("beta_target must be positive")
    lo_target, hi_target = 0.9 * beta_target, beta_target

    def cost(c):
        return _pilot_mean_cost(setup, c, n_pilot, base_seed)

    c = c_init if c_init is not None else beta_target * beta_target
    evals = 0
    val = cost(c)
    evals += 1
    if lo_target <= val <= hi_target:
        return c
    c_lo = c_hi = c
    v_lo = v_hi = val
    while v_hi < lo_target:
        c_hi *= 8.0
        v_hi = cost(c_hi)
        evals += 1
        if evals >= max_steps:
            raise CalibrationError("could not bracket the target cost from below")
        if lo_target <= v_hi <= hi_target:
            return c_hi
    while v_lo > hi_target:
        c_lo /= 8.0
        v_lo = cost(c_lo)
        evals += 1
        if evals >= max_steps:
            raise CalibrationError("could not bracket the target cost from above")
        if lo_target <= v_lo <= hi_target:
            return c_lo
    if v_hi < v_lo:
        raise CalibrationError(
            f"monotonicity premise violated: cost({c_lo})={v_lo} > cost({c_hi})={v_hi}"
        )
    while evals < max_steps:
        c_mid = math.sqrt(c_lo * c_hi)
        v_mid = cost(c_mid)
        evals += 1
        if lo_target <= v_mid <= hi_target:
            return c_mid
        if v_mid < lo_target:
            c_lo = c_mid
        else:
            c_hi = c_mid
    raise CalibrationError(
        f"no c found in {max_steps} pilot evaluations; last bracket [{c_lo}, {c_hi}]"
    )


def audit_trial(result: TrialResult, setup: TrialSetup, replay: bool = True) -> None:
    """Measurability audit: re-derive every logged decision from its prefix.

    For deterministic rules each logged selection must be an argmax of
    the rule's score computed from the belief built on the strictly
    earlier samples (over every ML tie candidate, since ties are broken
    at random).  With ``replay`` the trial is also re-run from its seed
    and must reproduce the result exactly.
    """
    if result.trajectory is None:
        raise ConfigurationError("audit needs a logged trajectory")
    suite = setup.suite
    if replay:
        again = run_trial(setup, result.seed, log_trajectory=True)
        if again != result:
            raise TrialError(f"replay of seed {result.seed} diverged from the log")
    if setup.sampling.kind not in (GENIE, GREEDY_FI, GREEDY_TRACE):
        return
    belief = make_belief(setup)
    for step in result.trajectory:
        _check_prefix_decision(setup, belief, step.experiment)
        belief.update(step.experiment, step.y)


def _check_prefix_decision(setup: TrialSetup, belief: Belief, selected: int) -> None:
    suite = setup.suite
    rule = setup.sampling
    if rule.kind == GENIE:
        if selected != rule.index:
            raise TrialError(f"genie log selected {selected + 1}, not {rule.index + 1}")
        return
    total = np.zeros_like(belief.theta_grid)
    for i in range(suite.k):
        total = total + belief._profile(i)
    theta_ties = np.flatnonzero(total == total.max())
    for j in theta_ties:
        theta = float(belief.theta_grid[j])
        if suite.is_joint:
            best_sel = -math.inf
            rivals = []
            for i in range(suite.k):
                row = belief.log_likelihood_table(i)[j, :]
                ties = np.flatnonzero(row == row.max())
                grid = belief.alpha_grids[i]
                scores = [
                    _rule_score(rule, suite, i, theta, float(grid[kk])) for kk in ties
                ]
                if i == selected:
                    best_sel = max(scores)
                else:
                    rivals.append(min(scores))
            if not rivals or best_sel >= max(rivals):
                return
        else:
            scores = shared_information(suite, theta)
            if scores[selected] == scores.max():
                return
    raise TrialError(
        f"logged selection {selected + 1} is not optimal for any ML tie candidate"
    )


def _rule_score(rule, suite, i, theta, alpha):
    score = shared_information(suite, theta, [alpha] * suite.k)[i]
    if rule.kind == GREEDY_TRACE and suite.is_joint:
        score += private_information(suite, theta, [alpha] * suite.k)[i]
    return score
