"""Grid-quadrature posterior over the shared and private parameters.

The joint posterior factorizes as

    g_t(theta, alpha_1..K)  ~  pi_theta(theta) * prod_i pi_i(alpha_i) * exp(LL_i(theta, alpha_i))

because each observation touches a single experiment's likelihood table.
All integration is trapezoid on the fixed parameter grids, accumulation is
in log space.

For the built-in Gaussian families the accumulated log-likelihood is an
exact linear function of (n, sum y, sum y^2); those scalars are kept as
`fractions.Fraction` so the materialized tables are bit-identical under any
reordering of the same multiset of updates.  Custom families fall back to
incremental table accumulation, which commutes only up to float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateLikelihoodError
from .model import (
    CUSTOM,
    GAUSSIAN_MEAN_VARIANCE,
    GAUSSIAN_VARIANCE_PROFILE,
    ExperimentSuite,
    Prior,
    trapezoid_weights,
    variance_profile,
)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Estimates:
    """Point estimates and conditional posterior costs at one time step."""

    theta_mmse: float
    theta_ml: float
    alpha_mmse: tuple
    alpha_ml: tuple
    cost_shared: float
    cost_private: tuple


@dataclass(frozen=True)
class MlEstimates:
    theta_index: int
    theta: float
    alpha_indices: tuple
    alphas: tuple


def _logsumexp_rows(table: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp that tolerates all-(-inf) rows."""
    m = table.max(axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    s = np.exp(table - safe[:, None]).sum(axis=1)
    with np.errstate(divide="ignore"):
        out = safe + np.log(s)
    out[~np.isfinite(m)] = -np.inf
    return out


def _logsumexp_vec(v: np.ndarray) -> float:
    m = v.max()
    if not np.isfinite(m):
        return -np.inf
    return float(m + np.log(np.exp(v - m).sum()))


class _SufficientStats:
    """Exact (n, sum y, sum y^2) accumulator for one experiment."""

    __slots__ = ("n", "s1", "s2")

    def __init__(self):
        self.n = 0
        self.s1 = Fraction(0)
        self.s2 = Fraction(0)

    def add(self, y: float) -> None:
        fy = Fraction(y)
        self.n += 1
        self.s1 += fy
        self.s2 += fy * fy

    def copy(self) -> "_SufficientStats":
        out = _SufficientStats.__new__(_SufficientStats)
        out.n = self.n
        out.s1 = self.s1
        out.s2 = self.s2
        return out


class Belief:
    """Posterior state for one trial; single-owner mutable."""

    def __init__(
        self,
        suite: ExperimentSuite,
        shared_prior: Optional[Prior] = None,
        private_priors: Optional[Sequence[Prior]] = None,
    ):
        self.suite = suite
        space = suite.shared_space
        self.theta_grid = space.points
        self._theta_w = trapezoid_weights(space)

        if shared_prior is None:
            shared_prior = Prior("uniform", space)
        if shared_prior.support != space:
            raise ConfigurationError("shared prior support does not match the suite")
        self.shared_prior = shared_prior
        self._log_prior_shared = shared_prior.log_density()

        if suite.is_joint:
            if private_priors is None:
                private_priors = [Prior("uniform", m.private_space) for m in suite.models]
            if len(private_priors) != suite.k:
                raise ConfigurationError("need one private prior per experiment")
            for p, m in zip(private_priors, suite.models):
                if p.support != m.private_space:
                    raise ConfigurationError(
                        "private prior support does not match its model"
                    )
            self.private_priors = tuple(private_priors)
        else:
            if private_priors:
                raise ConfigurationError("shared-only suite takes no private priors")
            self.private_priors = ()

        self.alpha_grids = tuple(
            m.private_space.points if m.has_private else None for m in suite.models
        )
        self._alpha_w = tuple(
            trapezoid_weights(m.private_space) if m.has_private else None
            for m in suite.models
        )
        self._log_prior_private = tuple(
            p.log_density() for p in self.private_priors
        ) if suite.is_joint else ()
        # log(pi_i(alpha) * trapezoid weight), the alpha-integration row
        self._alpha_log_pw = tuple(
            (lp + np.log(w)) if lp is not None else None
            for lp, w in zip(
                self._log_prior_private if suite.is_joint else (None,) * suite.k,
                self._alpha_w,
            )
        )

        self.sample_counts = [0] * suite.k
        self.t = 0
        self._stats = []
        self._tables = []          # incremental tables (custom families only)
        self._basis = []           # (A, B, C) grid tables for built-ins
        for m in suite.models:
            if m.family == CUSTOM:
                shape = (
                    (space.grid_size, m.private_space.grid_size)
                    if m.has_private
                    else (space.grid_size,)
                )
                self._tables.append(np.zeros(shape))
                self._stats.append(None)
                self._basis.append(None)
            else:
                self._tables.append(None)
                self._stats.append(_SufficientStats())
                self._basis.append(self._build_basis(m))

        self._version = [0] * suite.k
        self._cache = {}

    # -- construction helpers -------------------------------------------------

    def _build_basis(self, model):
        th = self.theta_grid
        if model.family == GAUSSIAN_VARIANCE_PROFILE:
            v = variance_profile(model, th)
            a = -0.5 * (_LOG_2PI + np.log(v))
            c = -1.0 / (2.0 * v)
            return a, None, c
        # N(theta, alpha): sum lambda = n*A + S1*B + S2*C
        al = model.private_space.points
        inv2a = 1.0 / (2.0 * al)[None, :]
        a = -0.5 * (_LOG_2PI + np.log(al))[None, :] - (th[:, None] ** 2) * inv2a
        b = th[:, None] / al[None, :]
        c = np.broadcast_to(-inv2a, (th.size, al.size))
        return a, b, c

    def copy(self) -> "Belief":
        out = Belief.__new__(Belief)
        out.__dict__.update(self.__dict__)
        out.sample_counts = list(self.sample_counts)
        out._stats = [s.copy() if s is not None else None for s in self._stats]
        out._tables = [t.copy() if t is not None else None for t in self._tables]
        out._version = list(self._version)
        out._cache = dict(self._cache)
        return out

    # -- update ---------------------------------------------------------------

    def update(self, experiment: int, y: float) -> None:
        """Fold one observation from the given experiment into the posterior."""
        k = self.suite.k
        if not 0 <= experiment < k:
            raise ConfigurationError(f"experiment index {experiment} out of range [0, {k})")
        if not math.isfinite(y):
            raise DegenerateLikelihoodError(f"non-finite observation {y!r}")
        model = self.suite.models[experiment]
        if model.family == CUSTOM:
            inc = self._custom_table(model, y)
            if np.all(np.isinf(inc) & (inc < 0)):
                raise DegenerateLikelihoodError(
                    f"observation {y} has zero density everywhere on experiment "
                    f"{experiment + 1}'s grid"
                )
            self._tables[experiment] += inc
        else:
            self._stats[experiment].add(y)
        self.sample_counts[experiment] += 1
        self.t += 1
        self._version[experiment] += 1
        self._cache.clear()

    def _custom_table(self, model, y):
        th = self.theta_grid
        if model.has_private:
            al = model.private_space.points
            try:
                out = np.asarray(
                    model.custom.log_pdf(y, th[:, None], al[None, :]), dtype=float
                )
                if out.shape == (th.size, al.size):
                    return out
            except Exception:
                pass
            return np.array(
                [[model.custom.log_pdf(y, t_, a_) for a_ in al] for t_ in th],
                dtype=float,
            )
        try:
            out = np.asarray(model.custom.log_pdf(y, th, None), dtype=float)
            if out.shape == th.shape:
                return out
        except Exception:
            pass
        return np.array([model.custom.log_pdf(y, t_, None) for t_ in th], dtype=float)

    # -- likelihood tables ----------------------------------------------------

    def log_likelihood_table(self, experiment: int) -> np.ndarray:
        """Accumulated log-likelihood over the (theta, alpha_i) grid.

        Shared-only mode returns a vector over the theta grid.
        """
        key = ("ll", experiment, self._version[experiment])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        model = self.suite.models[experiment]
        if model.family == CUSTOM:
            table = self._tables[experiment]
        else:
            st = self._stats[experiment]
            a, b, c = self._basis[experiment]
            # float(Fraction) is correctly rounded, so this expression is
            # independent of the update order
            table = st.n * a + float(st.s2) * c
            if b is not None:
                table = table + float(st.s1) * b
        self._cache[key] = table
        return table

    def _log_alpha_integral(self, experiment: int) -> np.ndarray:
        """log integral pi_i(a) exp(LL_i(theta, a)) da as a theta vector."""
        key = ("int", experiment, self._version[experiment])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        table = self.log_likelihood_table(experiment)
        if table.ndim == 1:
            out = table
        else:
            out = _logsumexp_rows(table + self._alpha_log_pw[experiment][None, :])
        self._cache[key] = out
        return out

    def _profile(self, experiment: int) -> np.ndarray:
        """max over alpha of LL_i(theta, alpha), as a theta vector."""
        key = ("prof", experiment, self._version[experiment])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        table = self.log_likelihood_table(experiment)
        out = table if table.ndim == 1 else table.max(axis=1)
        self._cache[key] = out
        return out

    # -- posteriors -----------------------------------------------------------

    def _shared_log_posterior(self) -> np.ndarray:
        key = ("post", tuple(self._version))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        logpost = self._log_prior_shared.copy()
        for i in range(self.suite.k):
            logpost += self._log_alpha_integral(i)
        self._cache[key] = logpost
        return logpost

    def marginal_shared(self) -> np.ndarray:
        """Marginal posterior density of theta on the grid (trapezoid-normalized)."""
        logpost = self._shared_log_posterior()
        with np.errstate(divide="ignore"):
            logz = _logsumexp_vec(logpost + np.log(self._theta_w))
        if not math.isfinite(logz):
            raise DegenerateLikelihoodError("shared posterior has no mass left")
        return np.exp(logpost - logz)

    def shared_moments(self) -> tuple[float, float]:
        """(posterior mean, posterior variance) of theta."""
        key = ("mom", tuple(self._version))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        dens = self.marginal_shared()
        w = self._theta_w * dens
        mean = float(w @ self.theta_grid)
        var = float(w @ (self.theta_grid - mean) ** 2)
        out = (mean, var)
        self._cache[key] = out
        return out

    def conditional_private(self, experiment: int, theta_hat: float) -> np.ndarray:
        """Posterior density of alpha_i conditioned on the snapped theta_hat."""
        model = self.suite.models[experiment]
        if not model.has_private:
            raise ConfigurationError("experiment has no private parameter")
        if not self.suite.shared_space.contains(theta_hat):
            raise ConfigurationError(f"theta_hat={theta_hat} outside the shared space")
        j = self.suite.shared_space.nearest_index(theta_hat)
        logh = self._log_prior_private[experiment] + self.log_likelihood_table(experiment)[j, :]
        with np.errstate(divide="ignore"):
            logz = _logsumexp_vec(logh + np.log(self._alpha_w[experiment]))
        if not math.isfinite(logz):
            raise DegenerateLikelihoodError(
                f"conditional posterior of experiment {experiment + 1} has no mass"
            )
        return np.exp(logh - logz)

    def private_moments(self, experiment: int, theta_hat: float) -> tuple[float, float]:
        dens = self.conditional_private(experiment, theta_hat)
        grid = self.alpha_grids[experiment]
        w = self._alpha_w[experiment] * dens
        mean = float(w @ grid)
        var = float(w @ (grid - mean) ** 2)
        return mean, var

    # -- costs and estimates ----------------------------------------------------

    def costs(self) -> tuple[float, tuple]:
        """(cost_shared, cost_private per experiment) under quadratic loss."""
        key = ("costs", tuple(self._version))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mean, var = self.shared_moments()
        if self.suite.is_joint:
            private = tuple(
                self.private_moments(i, mean)[1] for i in range(self.suite.k)
            )
        else:
            private = ()
        out = (var, private)
        self._cache[key] = out
        return out

    def _argmax_uniform(self, values: np.ndarray, rng) -> int:
        ties = np.flatnonzero(values == values.max())
        if ties.size == 1:
            return int(ties[0])
        return int(ties[rng.integers(ties.size)])

    def ml_estimates(self, rng) -> MlEstimates:
        """Grid ML point; profile likelihood over theta in joint mode.

        Argmax ties are broken uniformly at random with the caller's rng,
        which covers the flat-likelihood cold start.
        """
        total = np.zeros_like(self.theta_grid)
        for i in range(self.suite.k):
            total = total + self._profile(i)
        j = self._argmax_uniform(total, rng)
        alpha_idx = []
        alphas = []
        if self.suite.is_joint:
            for i in range(self.suite.k):
                row = self.log_likelihood_table(i)[j, :]
                kk = self._argmax_uniform(row, rng)
                alpha_idx.append(kk)
                alphas.append(float(self.alpha_grids[i][kk]))
        return MlEstimates(
            theta_index=j,
            theta=float(self.theta_grid[j]),
            alpha_indices=tuple(alpha_idx),
            alphas=tuple(alphas),
        )

    def estimates(self, rng) -> Estimates:
        """MMSE and ML point estimates plus the conditional posterior costs."""
        mean, var = self.shared_moments()
        ml = self.ml_estimates(rng)
        if self.suite.is_joint:
            priv = [self.private_moments(i, mean) for i in range(self.suite.k)]
            alpha_mmse = tuple(p[0] for p in priv)
            cost_private = tuple(p[1] for p in priv)
        else:
            alpha_mmse = ()
            cost_private = ()
        return Estimates(
            theta_mmse=mean,
            theta_ml=ml.theta,
            alpha_mmse=alpha_mmse,
            alpha_ml=ml.alphas,
            cost_shared=var,
            cost_private=cost_private,
        )

    # -- introspection ----------------------------------------------------------

    @property
    def shared_log_prior(self) -> np.ndarray:
        return self._log_prior_shared

    def private_log_prior(self, experiment: int) -> np.ndarray:
        return self._log_prior_private[experiment]
