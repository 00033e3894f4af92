"""Gaussian-output base regressors: OLS, Bayesian ridge and RBF Gaussian process regression.

All models expect standardized inputs; the harness handles scaling.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import numerics
from .distributions import STDDEV_FLOOR, GaussianPredictive
from .exceptions import DegenerateData, DimensionMismatch, NotPositiveDefinite

logger = logging.getLogger(__name__)


def _as_2d(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


@dataclass(frozen=True, eq=False)
class OlsModel:
    weights: np.ndarray
    intercept: float
    residual_std: float


@dataclass(frozen=True, eq=False)
class BrrModel:
    weights: np.ndarray
    intercept: float
    alpha: float
    lambda_: float
    posterior_covariance: np.ndarray
    x_mean: np.ndarray
    n_iter: int = 0
    converged: bool = True


@dataclass(frozen=True, eq=False)
class GprModel:
    kernel_variance: float
    length_scale: float
    noise_variance: float
    training_inputs: np.ndarray
    alpha_vector: np.ndarray
    chol_factor: np.ndarray
    y_mean: float = 0.0
    log_marginal: float = float("nan")


def fit_ols(X, y) -> OlsModel:
    """Least squares with intercept; residual std shared by all predictions."""
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n <= d + 1:
        raise DegenerateData(f"OLS needs more than {d + 1} rows, got {n}")
    A = np.hstack([X, np.ones((n, 1))])
    L = numerics.cholesky(A.T @ A)
    beta = numerics.cho_solve(L, A.T @ y)
    resid = y - A @ beta
    sse = float(resid @ resid)
    std = max(np.sqrt(sse / (n - d - 1)), STDDEV_FLOOR)
    return OlsModel(beta[:-1], float(beta[-1]), float(std))


def brr_posterior(X, y, alpha, lambda_):
    """Posterior mean/covariance of the weights for fixed precisions (centred data)."""
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    prec = lambda_ * np.eye(X.shape[1]) + alpha * Xc.T @ Xc
    L = numerics.cholesky(prec)
    cov = numerics.cho_solve(L, np.eye(X.shape[1]))
    w = alpha * cov @ Xc.T @ yc
    return w, float(y_mean - x_mean @ w), cov, x_mean


def fit_brr(X, y, max_iter=300, tol=1e-6) -> BrrModel:
    """Bayesian ridge regression with evidence (type-II ML) updates of the precisions.

    ``alpha`` is the noise precision, ``lambda_`` the weight precision. Starts
    from ``alpha = 1/var(y)`` and ``lambda_ = 1`` and runs MacKay's fixed
    point until both change by less than ``tol`` relative.
    """
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n <= 1:
        raise DegenerateData("BRR needs at least two rows")
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    eig = np.clip(np.linalg.eigvalsh(Xc.T @ Xc), 0, None)
    alpha = 1.0 / max(np.var(y), 1e-12)
    lam = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w, _, _, _ = brr_posterior(X, y, alpha, lam)
        gamma = float(np.sum(alpha * eig / (lam + alpha * eig)))
        sse = float(np.sum((yc - Xc @ w) ** 2))
        lam_new = float(np.clip(gamma / max(w @ w, 1e-300), 1e-12, 1e12))
        alpha_new = float(np.clip((n - gamma) / max(sse, 1e-300), 1e-12, 1e12))
        done = abs(alpha_new - alpha) <= tol * alpha and abs(lam_new - lam) <= tol * lam
        alpha, lam = alpha_new, lam_new
        if done:
            converged = True
            break
    if not converged:
        warnings.warn(f"BRR evidence iteration did not converge in {max_iter} iterations", RuntimeWarning)
    w, b, cov, x_mean = brr_posterior(X, y, alpha, lam)
    return BrrModel(w, b, alpha, lam, cov, x_mean, it, converged)


def _rbf(A, B, variance, length_scale):
    d2 = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2 * A @ B.T
    return variance * np.exp(-0.5 * np.maximum(d2, 0.0) / length_scale**2)


def _sqdist(A):
    s = np.sum(A**2, 1)
    return np.maximum(s[:, None] + s[None, :] - 2 * A @ A.T, 0.0)


GPR_BOUNDS = (np.log(1e-6), np.log(1e4))


def gpr_log_marginal(log_params, X, y, need_grad=True):
    """Log marginal likelihood of an RBF GP and its gradient in log-parameters.

    ``log_params = (log variance, log length-scale, log noise variance)``.
    """
    X = _as_2d(X)
    v, ell, s2 = np.exp(log_params)
    n = X.shape[0]
    D2 = _sqdist(X)
    Kf = v * np.exp(-0.5 * D2 / ell**2)
    L = numerics.cholesky(Kf + s2 * np.eye(n))
    a = numerics.cho_solve(L, y)
    lml = -0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2 * np.pi)
    if not need_grad:
        return float(lml)
    Kinv = numerics.cho_solve(L, np.eye(n))
    inner = np.outer(a, a) - Kinv
    dK = [Kf, Kf * D2 / ell**2, s2 * np.eye(n)]
    grad = np.array([0.5 * np.sum(inner * d) for d in dK])
    return float(lml), grad


def gpr_posterior(X, y, kernel_variance, length_scale, noise_variance) -> GprModel:
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    y_mean = float(y.mean())
    yc = y - y_mean
    K = _rbf(X, X, kernel_variance, length_scale) + noise_variance * np.eye(X.shape[0])
    L = numerics.cholesky(K)
    a = numerics.cho_solve(L, yc)
    lml = -0.5 * yc @ a - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
    return GprModel(kernel_variance, length_scale, noise_variance, X, a, L, y_mean, float(lml))


def fit_gpr(X, y, restarts=3, seed=0) -> GprModel:
    """RBF GP regression with hyperparameters maximizing the marginal likelihood.

    Each restart runs gradient-based ascent (L-BFGS-B) in log-space from a
    log-uniform draw in [1e-2, 1e2]; the best restart is kept.
    """
    X = _as_2d(X)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 2:
        raise DegenerateData("GPR needs at least two rows")
    yc = y - y.mean()
    rng = numerics.make_rng(seed)

    def neg(p):
        try:
            lml, g = gpr_log_marginal(p, X, yc)
        except NotPositiveDefinite:
            return 1e25, np.zeros(3)
        return -lml, -g

    best = None
    for _ in range(max(restarts, 1)):
        x0 = rng.uniform(np.log(1e-2), np.log(1e2), size=3)
        res = minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=[GPR_BOUNDS] * 3)
        if best is None or res.fun < best.fun:
            best = res
    v, ell, s2 = np.exp(best.x)
    logger.debug("gpr hyperparameters var=%.3g ell=%.3g noise=%.3g", v, ell, s2)
    return gpr_posterior(X, y, v, ell, s2)


def predict_base(model, x) -> GaussianPredictive:
    """Predictive Gaussian for one feature vector."""
    mean, std = predict_base_batch(model, np.atleast_2d(np.asarray(x, dtype=float)))
    return GaussianPredictive(mean[0], std[0])


def predict_base_batch(model, X):
    """Predictive means and stddevs for the rows of ``X``."""
    X = _as_2d(X)
    if isinstance(model, OlsModel):
        _check_dim(X, model.weights.size)
        mean = X @ model.weights + model.intercept
        std = np.full(X.shape[0], model.residual_std)
    elif isinstance(model, BrrModel):
        _check_dim(X, model.weights.size)
        mean = X @ model.weights + model.intercept
        Xc = X - model.x_mean
        var = 1.0 / model.alpha + np.einsum("ij,jk,ik->i", Xc, model.posterior_covariance, Xc)
        std = np.sqrt(np.maximum(var, 1.0 / model.alpha))
    elif isinstance(model, GprModel):
        _check_dim(X, model.training_inputs.shape[1])
        Ks = _rbf(X, model.training_inputs, model.kernel_variance, model.length_scale)
        mean = Ks @ model.alpha_vector + model.y_mean
        v = numerics.solve_lower(model.chol_factor, Ks.T)
        var = model.kernel_variance - np.sum(v**2, axis=0) + model.noise_variance
        std = np.sqrt(np.maximum(var, model.noise_variance))
    else:
        raise TypeError(f"unknown base model {type(model).__name__}")
    return mean, np.maximum(std, STDDEV_FLOOR)


def _check_dim(X, d):
    if X.shape[1] != d:
        raise DimensionMismatch(f"model expects {d} features, got {X.shape[1]}")


def fit_base(kind: str, X, y, seed=0):
    if kind == "ols":
        return fit_ols(X, y)
    if kind == "brr":
        return fit_brr(X, y)
    if kind == "gpr":
        return fit_gpr(X, y, seed=seed)
    raise ValueError(f"unknown base model {kind!r}")
