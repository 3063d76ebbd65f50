"""Active sampling for sequential Bayesian estimation with shared and private parameters."""

from .belief import Belief, Estimates
from .errors import (
    BoundaryError,
    CalibrationError,
    ConfigurationError,
    DegenerateLikelihoodError,
    IllPosedError,
    ModelEvaluationError,
    OptimizationError,
    SeqSampleError,
    TrialError,
)
from .model import (
    ExperimentModel,
    ExperimentSuite,
    GroundTruth,
    ParameterSpace,
    Prior,
    draw_sample,
    fisher_private,
    fisher_shared,
    log_pdf,
    make_sensor_network,
    numeric_fisher,
)
from .optimizer import brute_force, minimize, objective
from .rules import SamplingRule, StoppingRule, Tolerances, select, should_stop
from .runner import (
    MonteCarloSummary,
    TrialResult,
    TrialSetup,
    calibrate_unified_cost,
    run_monte_carlo,
    run_trial,
    sweep_beta,
)
from .theory import BoundReport, bound_report, theorem_bounds, v_beta, w_beta

__version__ = "0.1.0"
