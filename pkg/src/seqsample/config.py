"""Config-file schema: parsing, strict validation, and round-trip serialization.

Configs are flat JSON documents (conventionally ``*.cfg``).  Unknown keys
are rejected with their dotted path; missing required keys are reported
by name.  ``genie`` indices and every experiment number on the user
surface are 1-based; internals are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .model import (
    FI_DEFINITIONAL,
    FI_PAPER_NARRATIVE,
    GAUSSIAN_MEAN_VARIANCE,
    GAUSSIAN_VARIANCE_PROFILE,
    ExperimentModel,
    ExperimentSuite,
    GroundTruth,
    ParameterSpace,
    Prior,
    make_sensor_network,
    validate_truth,
)
from .rules import SamplingRule, StoppingRule, Tolerances
from .runner import TrialSetup

SENSOR_NETWORK = "sensor_network"
VARIANCE_PROFILE = "variance_profile"
MEAN_VARIANCE = "gaussian_mean_variance"

_DEFAULT_SHARED_GRID = 197
_DEFAULT_PRIVATE_GRID = 101


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigurationError(f"missing required field '{where}{key}'")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed, where: str):
    unknown = set(mapping) - set(allowed)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigurationError(f"unknown field '{where}{name}'")


def _space_from(d: dict, where: str, default_grid: int) -> dict:
    _reject_unknown(d, ("lower", "upper", "grid_size"), where)
    return {
        "lower": float(_require(d, "lower", where)),
        "upper": float(_require(d, "upper", where)),
        "grid_size": int(d.get("grid_size", default_grid)),
    }


def _prior_from(d: dict, where: str) -> dict:
    _reject_unknown(d, ("kind", "weights"), where)
    out = {"kind": str(_require(d, "kind", where))}
    if "weights" in d:
        out["weights"] = [float(w) for w in d["weights"]]
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated, construction-ready run description."""

    name: str
    suite_kind: str
    k: int
    shared_space: dict
    private_spaces: tuple
    fisher_variant: Optional[str]
    intercepts: tuple
    slopes: tuple
    shared_prior: Optional[dict]
    private_priors: tuple
    theta: float
    alphas: tuple
    beta: float
    beta_private: tuple
    t_max: int
    sampling: dict
    stopping: dict
    n_trials: int
    base_seed: int
    output: Optional[str]
    notes: Optional[str]

    # -- parsing ---------------------------------------------------------------

    @staticmethod
    def from_dict(doc: dict, name: str = "config") -> "RunConfig":
        top = (
            "name", "notes", "suite", "shared_space", "private_spaces", "priors",
            "truth", "tolerances", "sampling", "stopping", "n_trials",
            "base_seed", "output",
        )
        _reject_unknown(doc, top, "")

        suite = _require(doc, "suite", "")
        _reject_unknown(
            suite, ("kind", "k", "fisher_variant", "intercepts", "slopes"), "suite."
        )
        kind = str(_require(suite, "kind", "suite."))
        if kind not in (SENSOR_NETWORK, VARIANCE_PROFILE, MEAN_VARIANCE):
            raise ConfigurationError(f"unknown suite kind '{kind}'")

        shared_space = _space_from(
            _require(doc, "shared_space", ""), "shared_space.", _DEFAULT_SHARED_GRID
        )

        intercepts: tuple = ()
        slopes: tuple = ()
        fisher_variant = suite.get("fisher_variant")
        if fisher_variant is not None and fisher_variant not in (
            FI_DEFINITIONAL, FI_PAPER_NARRATIVE,
        ):
            raise ConfigurationError(
                f"unknown fisher_variant '{fisher_variant}' in suite"
            )
        if kind == SENSOR_NETWORK:
            k = int(_require(suite, "k", "suite."))
        elif kind == VARIANCE_PROFILE:
            intercepts = tuple(float(a) for a in _require(suite, "intercepts", "suite."))
            slopes = tuple(float(b) for b in _require(suite, "slopes", "suite."))
            if len(intercepts) != len(slopes) or not intercepts:
                raise ConfigurationError("suite.intercepts and suite.slopes must match")
            k = len(intercepts)
            if "k" in suite and int(suite["k"]) != k:
                raise ConfigurationError("suite.k disagrees with the coefficient lists")
        else:
            k = int(_require(suite, "k", "suite."))

        private_spaces: tuple = ()
        if kind == MEAN_VARIANCE:
            raw = _require(doc, "private_spaces", "")
            if len(raw) != k:
                raise ConfigurationError(f"need {k} private_spaces entries")
            private_spaces = tuple(
                _space_from(s, f"private_spaces[{i + 1}].", _DEFAULT_PRIVATE_GRID)
                for i, s in enumerate(raw)
            )
        elif "private_spaces" in doc and doc["private_spaces"]:
            raise ConfigurationError(f"suite kind '{kind}' takes no private_spaces")

        shared_prior = None
        private_priors: tuple = ()
        if "priors" in doc:
            priors = doc["priors"]
            _reject_unknown(priors, ("shared", "private"), "priors.")
            if "shared" in priors:
                shared_prior = _prior_from(priors["shared"], "priors.shared.")
            if "private" in priors:
                if kind != MEAN_VARIANCE:
                    raise ConfigurationError("private priors need a joint suite")
                raw = priors["private"]
                if len(raw) != k:
                    raise ConfigurationError(f"need {k} private prior entries")
                private_priors = tuple(
                    _prior_from(p, f"priors.private[{i + 1}].")
                    for i, p in enumerate(raw)
                )

        truth = _require(doc, "truth", "")
        _reject_unknown(truth, ("theta", "alphas"), "truth.")
        theta = float(_require(truth, "theta", "truth."))
        alphas = tuple(float(a) for a in truth.get("alphas", []))

        tol = _require(doc, "tolerances", "")
        _reject_unknown(tol, ("beta", "beta_private", "t_max"), "tolerances.")
        beta = float(_require(tol, "beta", "tolerances."))
        beta_private = tuple(float(b) for b in tol.get("beta_private", []))
        t_max = int(tol.get("t_max", 100_000))

        sampling = dict(_require(doc, "sampling", ""))
        _reject_unknown(sampling, ("kind", "index", "weights"), "sampling.")
        _require(sampling, "kind", "sampling.")
        stopping = dict(_require(doc, "stopping", ""))
        _reject_unknown(stopping, ("kind", "c"), "stopping.")
        _require(stopping, "kind", "stopping.")

        return RunConfig(
            name=str(doc.get("name", name)),
            suite_kind=kind,
            k=k,
            shared_space=shared_space,
            private_spaces=private_spaces,
            fisher_variant=fisher_variant,
            intercepts=intercepts,
            slopes=slopes,
            shared_prior=shared_prior,
            private_priors=private_priors,
            theta=theta,
            alphas=alphas,
            beta=beta,
            beta_private=beta_private,
            t_max=t_max,
            sampling=sampling,
            stopping=stopping,
            n_trials=int(doc.get("n_trials", 100)),
            base_seed=int(doc.get("base_seed", 0)),
            output=doc.get("output"),
            notes=doc.get("notes"),
        )

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "suite": {"kind": self.suite_kind},
            "shared_space": dict(self.shared_space),
            "truth": {"theta": self.theta, "alphas": list(self.alphas)},
            "tolerances": {
                "beta": self.beta,
                "beta_private": list(self.beta_private),
                "t_max": self.t_max,
            },
            "sampling": dict(self.sampling),
            "stopping": dict(self.stopping),
            "n_trials": self.n_trials,
            "base_seed": self.base_seed,
            "output": self.output,
        }
        if self.notes is not None:
            doc["notes"] = self.notes
        if self.suite_kind == VARIANCE_PROFILE:
            doc["suite"]["intercepts"] = list(self.intercepts)
            doc["suite"]["slopes"] = list(self.slopes)
        else:
            doc["suite"]["k"] = self.k
        if self.fisher_variant is not None:
            doc["suite"]["fisher_variant"] = self.fisher_variant
        if self.private_spaces:
            doc["private_spaces"] = [dict(s) for s in self.private_spaces]
        if self.shared_prior is not None or self.private_priors:
            doc["priors"] = {}
            if self.shared_prior is not None:
                doc["priors"]["shared"] = dict(self.shared_prior)
            if self.private_priors:
                doc["priors"]["private"] = [dict(p) for p in self.private_priors]
        return doc

    # -- construction ------------------------------------------------------------

    def build_suite(self) -> ExperimentSuite:
        space = ParameterSpace(**self.shared_space)
        if self.suite_kind == SENSOR_NETWORK:
            variant = self.fisher_variant or FI_PAPER_NARRATIVE
            return make_sensor_network(self.k, shared_space=space, fisher_variant=variant)
        if self.suite_kind == VARIANCE_PROFILE:
            variant = self.fisher_variant or FI_DEFINITIONAL
            models = tuple(
                ExperimentModel(
                    family=GAUSSIAN_VARIANCE_PROFILE,
                    shared_space=space,
                    var_intercept=a,
                    var_slope=b,
                    fisher_variant=variant,
                )
                for a, b in zip(self.intercepts, self.slopes)
            )
            return ExperimentSuite(models=models, shared_space=space)
        models = tuple(
            ExperimentModel(
                family=GAUSSIAN_MEAN_VARIANCE,
                shared_space=space,
                private_space=ParameterSpace(**ps),
            )
            for ps in self.private_spaces
        )
        return ExperimentSuite(models=models, shared_space=space)

    def build_priors(self, suite: ExperimentSuite):
        shared = None
        if self.shared_prior is not None:
            w = self.shared_prior.get("weights")
            shared = Prior(
                self.shared_prior["kind"],
                suite.shared_space,
                tuple(w) if w is not None else None,
            )
        private = None
        if self.private_priors:
            private = tuple(
                Prior(
                    p["kind"],
                    m.private_space,
                    tuple(p["weights"]) if p.get("weights") is not None else None,
                )
                for p, m in zip(self.private_priors, suite.models)
            )
        return shared, private

    def build_sampling(self) -> SamplingRule:
        d = self.sampling
        index = d.get("index")
        if index is not None:
            index = int(index) - 1          # user-facing indices are 1-based
        weights = d.get("weights")
        return SamplingRule(
            kind=d["kind"],
            index=index,
            weights=tuple(float(w) for w in weights) if weights is not None else None,
        )

    def build_stopping(self) -> StoppingRule:
        d = self.stopping
        c = d.get("c")
        return StoppingRule(kind=d["kind"], c=float(c) if c is not None else None)

    def build_setup(self) -> TrialSetup:
        suite = self.build_suite()
        truth = GroundTruth(self.theta, self.alphas)
        validate_truth(suite, truth)
        shared_prior, private_priors = self.build_priors(suite)
        return TrialSetup(
            suite=suite,
            truth=truth,
            sampling=self.build_sampling(),
            stopping=self.build_stopping(),
            tolerances=Tolerances(self.beta, self.beta_private, self.t_max),
            shared_prior=shared_prior,
            private_priors=private_priors,
        )


def parse_text(text: str, name: str = "config") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{name}: top level must be an object")
    return RunConfig.from_dict(doc, name=name)


def resolve_config_path(spec: str) -> tuple[str, str]:
    """Resolve a config argument to (text, display name).

    Accepts a filesystem path or the bare name of a bundled config
    (``sensor4``, ``twosensor``, ``weather``, with or without ``.cfg``).
    """
    p = Path(spec)
    if p.exists():
        return p.read_text(), str(p)
    stem = spec if spec.endswith(".cfg") else spec + ".cfg"
    ref = resources.files("seqsample").joinpath("configs", stem)
    if ref.is_file():
        return ref.read_text(), f"bundled:{stem}"
    raise ConfigurationError(f"config '{spec}' is neither a file nor a bundled config")


def load_config(spec: str) -> RunConfig:
    text, name = resolve_config_path(spec)
    return parse_text(text, name=name)


def serialize(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
