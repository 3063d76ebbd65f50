"""Simplex minimization for the cost-aware sampling distribution.

The objective combines the shared-parameter information pooled across
experiments with each experiment's private information:

    f(q) = (1/beta) * (sum_i q_i * Js_i)^-1  +  sum_i (1/beta_i) * (q_i * Jp_i)^-1

It is convex on the simplex, diverges on the boundary whenever private
tolerances are present (so the optimum is interior), and collapses to a
vertex problem when there are no private terms.

The solver is exponentiated-gradient (mirror descent with the entropy
mirror map) with backtracking; ``brute_force`` is the certification
oracle for K <= 3.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, IllPosedError, OptimizationError

INTERIOR_FLOOR = 1e-9


def check_simplex(q, atol: float = 1e-12) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise ConfigurationError("simplex point must be a non-empty vector")
    if np.any(q < 0):
        raise ConfigurationError("simplex point has negative components")
    if abs(q.sum() - 1.0) > atol:
        raise ConfigurationError(f"simplex point sums to {q.sum()!r}, not 1")
    return q


def _as_info(j_shared, j_private):
    js = np.asarray(j_shared, dtype=float)
    if js.ndim != 1 or js.size < 1:
        raise ConfigurationError("J_shared must be a non-empty vector")
    if np.all(js <= 0):
        raise IllPosedError("every experiment has zero shared information")
    jp = None
    if j_private is not None and len(j_private) > 0:
        jp = np.asarray(j_private, dtype=float)
        if jp.shape != js.shape:
            raise ConfigurationError("J_private must match J_shared in length")
        if np.any(jp <= 0):
            raise IllPosedError("private information must be positive in joint mode")
    return js, jp


def _betas(tol, k: int, joint: bool):
    beta = float(tol.beta)
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    if not joint:
        return beta, None
    bp = np.asarray(tol.beta_private, dtype=float)
    if bp.shape != (k,):
        raise ConfigurationError(f"need {k} private tolerances, got {bp.shape}")
    if np.any(bp <= 0):
        raise ConfigurationError("private tolerances must be positive")
    return beta, bp


def objective(q, j_shared, j_private, tol) -> float:
    """Weighted inverse-information cost of a sampling distribution q."""
    js, jp = _as_info(j_shared, j_private)
    q = check_simplex(q, atol=1e-9)
    beta, bp = _betas(tol, js.size, jp is not None)
    pooled = float(q @ js)
    val = np.inf if pooled <= 0 else 1.0 / (beta * pooled)
    if jp is not None:
        with np.errstate(divide="ignore"):
            val += float(np.sum(1.0 / (bp * q * jp)))
    return float(val)


def _objective_batch(Q: np.ndarray, js, jp, beta, bp) -> np.ndarray:
    pooled = Q @ js
    with np.errstate(divide="ignore"):
        vals = 1.0 / (beta * pooled)
        vals[pooled <= 0] = np.inf
        if jp is not None:
            vals = vals + (1.0 / (Q * (bp * jp)[None, :])).sum(axis=1)
    return vals


def _gradient(q, js, jp, beta, bp) -> np.ndarray:
    pooled = float(q @ js)
    g = -js / (beta * pooled * pooled)
    if jp is not None:
        g = g - 1.0 / (bp * jp * q * q)
    return g


def minimize(
    j_shared,
    j_private,
    tol,
    max_iter: int = 10_000,
    rtol: float = 1e-10,
    floor: float = INTERIOR_FLOOR,
) -> np.ndarray:
    """Minimizer of ``objective`` over the probability simplex.

    Shared-only instances are solved in closed form (the optimum sits on
    the most-informative vertex; exact ties get equal mass).  Joint
    instances run interior exponentiated-gradient updates; the floor
    keeps iterates strictly positive and is inactive at the optimum.
    """
    js, jp = _as_info(j_shared, j_private)
    k = js.size
    beta, bp = _betas(tol, k, jp is not None)

    if jp is None:
        best = np.flatnonzero(js == js.max())
        q = np.zeros(k)
        q[best] = 1.0 / best.size
        return q
    if k == 1:
        return np.ones(1)

    # private terms alone are minimized at q_i ~ sqrt(1/(beta_i Jp_i));
    # a good warm start for the full objective
    q = np.sqrt(1.0 / (bp * jp))
    q = 0.5 * q / q.sum() + 0.5 / k
    f = float(_objective_batch(q[None, :], js, jp, beta, bp)[0])

    eta = 0.1
    flat_steps = 0
    for _ in range(max_iter):
        g = _gradient(q, js, jp, beta, bp)
        improved = False
        while eta > 1e-18:
            z = -eta * (g - g.min())
            np.clip(z, -700.0, 0.0, out=z)
            cand = q * np.exp(z)
            cand = np.maximum(cand / cand.sum(), floor)
            cand /= cand.sum()
            f_cand = float(_objective_batch(cand[None, :], js, jp, beta, bp)[0])
            if f_cand <= f:
                improved = True
                break
            eta *= 0.5
        if not improved:
            return q
        drop = f - f_cand
        q, f = cand, f_cand
        eta *= 1.5
        if drop <= rtol * max(abs(f), 1e-300):
            flat_steps += 1
            if flat_steps >= 3:
                return q
        else:
            flat_steps = 0
    raise OptimizationError(
        f"no convergence within {max_iter} iterations", best=q, value=f
    )


def brute_force(j_shared, j_private, tol, resolution: float) -> np.ndarray:
    """Exhaustive simplex grid search; certification oracle for K <= 3."""
    if resolution <= 0:
        raise ConfigurationError("resolution must be positive")
    js, jp = _as_info(j_shared, j_private)
    k = js.size
    if k > 3:
        raise ConfigurationError("brute force supports K <= 3 only")
    beta, bp = _betas(tol, k, jp is not None)
    if k == 1:
        return np.ones(1)

    axis = np.arange(0.0, 1.0 + resolution / 2, resolution)
    axis[-1] = min(axis[-1], 1.0)
    if k == 2:
        Q = np.column_stack([axis, 1.0 - axis])
        vals = _objective_batch(Q, js, jp, beta, bp)
        return Q[int(np.argmin(vals))].copy()

    best_q, best_v = None, np.inf
    for q1 in axis:
        q2 = axis[axis <= 1.0 - q1 + resolution / 2]
        q3 = np.maximum(1.0 - q1 - q2, 0.0)
        Q = np.column_stack([np.full(q2.size, q1), q2, q3])
        vals = _objective_batch(Q, js, jp, beta, bp)
        j = int(np.argmin(vals))
        if vals[j] < best_v:
            best_v = float(vals[j])
            best_q = Q[j].copy()
    return best_q
