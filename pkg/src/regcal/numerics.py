"""Shared numerical kernels: Cholesky with jitter, damped Newton, stable link functions."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import MaxIterationsExceeded, NotPositiveDefinite

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_CAP = 1e-4

# Armijo sufficient-decrease constant for the backtracking line search.
ARMIJO_C = 1e-4
MAX_HALVINGS = 60


def cholesky(m, jitter=0.0):
    """Lower Cholesky factor of ``m + jitter * I``.

    When the factorization fails, the diagonal jitter is escalated by a
    factor of 10 from ``1e-10`` up to ``1e-4`` before giving up.

    Raises
    ------
    NotPositiveDefinite
        If the matrix is not positive definite even with the capped jitter.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return np.zeros((0, 0))
    eye = np.eye(m.shape[0])
    try:
        return scipy.linalg.cholesky(m + jitter * eye, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    extra = max(JITTER_START, jitter)
    while extra <= JITTER_CAP * (1 + 1e-9):
        try:
            L = scipy.linalg.cholesky(m + extra * eye, lower=True, check_finite=False)
            logger.debug("cholesky succeeded with jitter %.1e", extra)
            return L
        except np.linalg.LinAlgError:
            extra *= 10.0
    raise NotPositiveDefinite(f"matrix of dim {m.shape[0]} not PD with jitter up to {JITTER_CAP:g}")


def cho_solve(L, b):
    """Solve ``(L L^T) x = b`` given the lower factor ``L``."""
    return scipy.linalg.cho_solve((L, True), b, check_finite=False)


def solve_lower(L, b):
    return scipy.linalg.solve_triangular(L, b, lower=True, check_finite=False)


def sigmoid(x):
    """Logistic function, stable for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def log_sigmoid(x):
    """``log(sigmoid(x))`` without underflow."""
    x = np.asarray(x, dtype=float)
    out = -np.logaddexp(0.0, -x)
    return out if out.ndim else float(out)


def logit(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("logit is only defined on the open interval (0, 1)")
    out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NewtonResult:
    solution: np.ndarray
    objective: float
    iterations: int
    converged: bool
    gradient_norm: float


def newton_minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    start,
    tol: float = 1e-8,
    max_iter: int = 100,
    strict: bool = False,
) -> NewtonResult:
    """Minimize a twice-differentiable convex-ish function by damped Newton.

    ``objective(w)`` returns ``(value, gradient, hessian)``. Steps are
    accepted through a halving backtracking line search with the Armijo
    condition, so the objective never increases across accepted iterates.

    On non-convergence a result with ``converged=False`` is returned, or
    :class:`MaxIterationsExceeded` is raised when ``strict`` is set; the
    exception carries the best iterate.
    """
    w = np.array(start, dtype=float).ravel()
    f, g, H = objective(w)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        H = np.atleast_2d(H)
        try:
            L = cholesky(0.5 * (H + H.T))
            step = -cho_solve(L, g)
        except NotPositiveDefinite:
            step = -g
        slope = float(g @ step)
        if slope >= 0:
            step = -g
            slope = -float(g @ g)
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            w_new = w + t * step
            f_new, g_new, H_new = objective(w_new)
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        w, f, g, H = w_new, f_new, g_new, H_new
        gnorm = float(np.linalg.norm(g))
    result = NewtonResult(w, float(f), it, gnorm <= tol, gnorm)
    if not result.converged and strict:
        raise MaxIterationsExceeded(f"newton stopped after {it} iterations, |grad|={gnorm:.3e}", result)
    return result


def check_gradient(f: Callable, grad: Callable, point, step: float = 1e-5) -> float:
    """Max relative discrepancy between ``grad`` and central differences of ``f``.

    Per coordinate: ``|analytic - numeric| / (|analytic| + step)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=float).ravel()
    analytic = np.atleast_1d(np.asarray(grad(x), dtype=float)).ravel()
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        numeric = (f(x + e) - f(x - e)) / (2 * step)
        worst = max(worst, abs(analytic[i] - numeric) / (abs(analytic[i]) + step))
    return worst


def make_rng(seed=None, *stream) -> np.random.Generator:
    """Seeded generator; extra integers select an independent sub-stream."""
    if stream:
        return np.random.default_rng(np.random.SeedSequence([0 if seed is None else int(seed), *map(int, stream)]))
    return np.random.default_rng(seed)
