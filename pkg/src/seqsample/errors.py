"""Exception hierarchy shared across the package."""


class SeqSampleError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SeqSampleError):
    """Invalid space, prior, suite, rule, or config-file contents."""


class ModelEvaluationError(SeqSampleError):
    """A model produced a non-finite log-density for valid-looking inputs."""


class BoundaryError(SeqSampleError):
    """A finite-difference step would leave the parameter space."""


class DegenerateLikelihoodError(SeqSampleError):
    """The posterior lost all mass (observation outside the common support)."""


class IllPosedError(SeqSampleError):
    """An objective or bound is undefined for the given information values."""


class OptimizationError(SeqSampleError):
    """Simplex solver failed to converge; carries the best iterate found."""

    def __init__(self, message, best=None, value=None):
        super().__init__(message)
        self.best = best
        self.value = value


class CalibrationError(SeqSampleError):
    """Unified-cost calibration could not bracket the target cost."""


class TrialError(SeqSampleError):
    """A simulation trial aborted; carries a diagnostic message."""
