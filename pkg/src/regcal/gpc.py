"""Gaussian process classifier calibration over (q(t), t) pairs.

Each calibration instance and threshold gives one binary example: the
features are the base model's CDF value ``q(t)`` and the (standardized)
threshold ``t``, the label is ``1(y <= t)``. A GP classifier with an ARD RBF
kernel and logistic link is fitted with the Laplace approximation; its
predictive probabilities on a fine threshold grid form a smooth calibrated
CDF.

The mode finding, marginal likelihood and its gradient follow the standard
stabilized formulation built on ``B = I + W^1/2 K W^1/2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from . import numerics
from .distributions import CdfGrid, PiecewiseDensity, ThresholdGrid, cdf_to_density, monotone_project
from .exceptions import EmptyInput, GridMismatch, LengthMismatch

logger = logging.getLogger(__name__)

DEFAULT_CAP = 5000
MODE_TOL = 1e-6
MODE_MAX_ITER = 100
QUADRATURE_NODES = 32
LOG_BOUNDS = {"variance": (np.log(1e-3), np.log(25.0)), "length_scale": (np.log(1e-2), np.log(1e2))}


@dataclass(frozen=True, eq=False)
class GpcTrainingSet:
    features: np.ndarray  # rows (q, t_standardized)
    labels: np.ndarray
    subsample_cap: int
    t_mean: float = 0.0
    t_scale: float = 1.0

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True, eq=False)
class LaplaceState:
    f: np.ndarray
    a: np.ndarray
    grad: np.ndarray
    W_sqrt: np.ndarray
    chol_B: np.ndarray
    log_marginal: float
    iterations: int
    converged: bool
    gradient_norm: float


@dataclass(frozen=True, eq=False)
class GpcModel:
    training: GpcTrainingSet
    variance: float
    length_scales: np.ndarray
    mode: np.ndarray
    grad_at_mode: np.ndarray
    W_sqrt: np.ndarray
    chol_B: np.ndarray
    log_marginal: float
    history: list = field(default_factory=list)

    @property
    def log_params(self):
        return np.log(np.concatenate([[self.variance], self.length_scales]))


def _standardize_t(grid: ThresholdGrid):
    t = grid.thresholds
    scale = float(t.std())
    return float(t.mean()), scale if scale > 0 else 1.0


def build_gpc_training(predicted_cdfs, targets, grid: ThresholdGrid, cap=DEFAULT_CAP, seed=0) -> GpcTrainingSet:
    """All (instance, threshold) pairs, uniformly subsampled without replacement down to ``cap``."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if isinstance(predicted_cdfs, np.ndarray):
        Q = np.atleast_2d(predicted_cdfs)
    else:
        Q = np.array([c.values for c in predicted_cdfs]).reshape(-1, grid.K)
    y = np.asarray(targets, dtype=float)
    if Q.shape[0] == 0:
        raise EmptyInput("no calibration instances")
    if Q.shape[0] != y.size:
        raise LengthMismatch(f"{Q.shape[0]} CDFs for {y.size} targets")
    if Q.shape[1] != grid.K:
        raise GridMismatch(f"expected {grid.K} CDF columns, got {Q.shape[1]}")
    t_mean, t_scale = _standardize_t(grid)
    T = np.broadcast_to(grid.thresholds, Q.shape)
    labels = (y[:, None] <= T).astype(float).ravel()
    feats = np.column_stack([Q.ravel(), ((T - t_mean) / t_scale).ravel()])
    if labels.size > cap:
        keep = np.sort(numerics.make_rng(seed).choice(labels.size, size=cap, replace=False))
        feats, labels = feats[keep], labels[keep]
    return GpcTrainingSet(feats, labels, int(cap), t_mean, t_scale)


def _sqdiffs(A, B):
    return [(A[:, d, None] - B[None, :, d]) ** 2 for d in range(A.shape[1])]


def rbf_ard(A, B, variance, length_scales):
    r2 = sum(D / ls**2 for D, ls in zip(_sqdiffs(A, B), length_scales))
    return variance * np.exp(-0.5 * r2)


def _loglik_derivs(f, labels):
    """log p(b|f), its gradient, W = -hessian diagonal and third derivative (logistic link)."""
    y = 2 * labels - 1
    pi = numerics.sigmoid(f)
    logp = numerics.log_sigmoid(y * f)
    grad = labels - pi
    W = pi * (1 - pi)
    d3 = -W * (1 - 2 * pi)
    return logp, grad, W, d3


def laplace_mode(K, labels, tol=MODE_TOL, max_iter=MODE_MAX_ITER, a0=None, strict=False) -> LaplaceState:
    """Posterior mode of the latent values under a zero-mean GP prior with covariance ``K``.

    Newton iterations in the ``a = K^-1 f`` parameterization with a halving
    line search on the log posterior. Stops once
    ``|grad log p(b|f) - K^-1 f| <= tol``.
    """
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n = labels.size
    if n == 0:
        return LaplaceState(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 0)), 0.0, 0, True, 0.0)

    def psi(a):
        f = K @ a
        logp, g, W, _ = _loglik_derivs(f, labels)
        return -0.5 * a @ f + logp.sum(), f, g, W

    a = np.zeros(n)
    val, f, g, W = psi(a)
    if a0 is not None and a0.size == n:
        cand = psi(np.asarray(a0, dtype=float))
        if cand[0] > val:
            a = np.array(a0, dtype=float)
            val, f, g, W = cand
    gnorm = float(np.linalg.norm(g - a))
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        sW = np.sqrt(W)
        L = numerics.cholesky(np.eye(n) + sW[:, None] * K * sW[None, :])
        b = W * f + g
        a_new = b - sW * numerics.cho_solve(L, sW * (K @ b))
        d = a_new - a
        step = 1.0
        for _ in range(30):
            cand = psi(a + step * d)
            if cand[0] >= val - 1e-12 * abs(val):
                break
            step *= 0.5
        a = a + step * d
        val, f, g, W = cand
        gnorm = float(np.linalg.norm(g - a))
    sW = np.sqrt(W)
    L = numerics.cholesky(np.eye(n) + sW[:, None] * K * sW[None, :])
    log_marginal = float(val - np.log(np.diag(L)).sum())
    state = LaplaceState(f, a, g, sW, L, log_marginal, it, gnorm <= tol, gnorm)
    if strict and not state.converged:
        raise numerics.MaxIterationsExceeded(f"Laplace mode not converged, |grad|={gnorm:.3e}", state)
    return state


def log_marginal_and_grad(log_params, X, labels, tol=MODE_TOL, a0=None):
    """Laplace approximate log marginal likelihood and its gradient w.r.t. log hyperparameters.

    ``log_params = (log variance, log length-scale per feature)``. The
    gradient includes the implicit dependence of the mode on the kernel.
    """
    log_params = np.asarray(log_params, dtype=float)
    v = float(np.exp(log_params[0]))
    ls = np.exp(log_params[1:])
    sq = _sqdiffs(X, X)
    K = v * np.exp(-0.5 * sum(D / l**2 for D, l in zip(sq, ls)))
    st = laplace_mode(K, labels, tol=tol, a0=a0)
    n = labels.size
    if n == 0:
        return st.log_marginal, np.zeros_like(log_params), st
    _, g, W, d3 = _loglik_derivs(st.f, labels)
    sW, L = st.W_sqrt, st.chol_B
    Binv, info = scipy.linalg.lapack.dpotri(L, lower=1)
    if info:
        raise numerics.NotPositiveDefinite("inverse of B failed")
    Binv = np.tril(Binv) + np.tril(Binv, -1).T
    R = sW[:, None] * Binv * sW[None, :]
    KR = K @ R
    # d log q / d f_hat; W depends on f through minus the third derivative
    s2 = 0.5 * (np.diag(K) - np.einsum("ij,ji->i", KR, K)) * d3
    dKs = [K] + [K * D / l**2 for D, l in zip(sq, ls)]
    grad = np.empty(len(dKs))
    for j, dK in enumerate(dKs):
        s1 = 0.5 * st.a @ dK @ st.a - 0.5 * np.sum(R * dK)
        b = dK @ g
        s3 = b - KR @ b
        grad[j] = s1 + s2 @ s3
    return st.log_marginal, grad, st


def _bounds(dim):
    return [LOG_BOUNDS["variance"]] + [LOG_BOUNDS["length_scale"]] * dim


def fit_gpc(training: GpcTrainingSet, restarts=2, tol=MODE_TOL, seed=0, init=None) -> GpcModel:
    """Select kernel hyperparameters by maximizing the Laplace marginal likelihood.

    The first run starts at variance 1 and unit length-scales (or ``init``),
    later restarts from log-uniform draws in [0.1, 10]. Gradient-based
    ascent (L-BFGS-B) in log-space; the best run is kept.
    """
    if training.n == 0:
        raise EmptyInput("GPC training set is empty")
    X, y = training.features, training.labels
    dim = X.shape[1]
    rng = numerics.make_rng(seed)
    cache = {"a": None}
    history = []

    def neg(p):
        lml, grad, st = log_marginal_and_grad(p, X, y, tol=tol, a0=cache["a"])
        cache["a"] = st.a
        history.append((p.copy(), lml))
        return -lml, -grad

    best = None
    for r in range(max(restarts, 1)):
        if r == 0:
            x0 = np.log(np.asarray(init, dtype=float)) if init is not None else np.zeros(dim + 1)
        else:
            x0 = rng.uniform(np.log(0.1), np.log(10.0), size=dim + 1)
        cache["a"] = None
        res = minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=_bounds(dim), options={"maxiter": 60})
        logger.debug("gpc restart %d: lml=%.4f params=%s", r, -res.fun, np.exp(res.x))
        if best is None or res.fun < best.fun:
            best = res
    return gpc_posterior(training, np.exp(best.x[0]), np.exp(best.x[1:]), tol=tol, history=history)


def gpc_posterior(training: GpcTrainingSet, variance, length_scales, tol=MODE_TOL, history=None) -> GpcModel:
    """Laplace posterior for fixed hyperparameters."""
    ls = np.asarray(length_scales, dtype=float)
    X, y = training.features, training.labels
    K = rbf_ard(X, X, variance, ls) if training.n else np.zeros((0, 0))
    st = laplace_mode(K, y, tol=tol)
    return GpcModel(training, float(variance), ls, st.f, st.grad, st.W_sqrt, st.chol_B, st.log_marginal, history or [])


def latent_predictive(model: GpcModel, Z, chunk=4096):
    """Latent mean and variance at feature rows ``Z`` (already standardized)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    mean = np.zeros(Z.shape[0])
    var = np.full(Z.shape[0], model.variance)
    if model.training.n == 0:
        return mean, var
    X = model.training.features
    for s in range(0, Z.shape[0], chunk):
        Ks = rbf_ard(X, Z[s : s + chunk], model.variance, model.length_scales)
        mean[s : s + chunk] = Ks.T @ model.grad_at_mode
        v = scipy.linalg.solve_triangular(model.chol_B, model.W_sqrt[:, None] * Ks, lower=True, check_finite=False)
        var[s : s + chunk] = model.variance - np.sum(v**2, axis=0)
    return mean, np.maximum(var, 0.0)


_GH = {}


def logistic_gaussian_integral(mean, var, nodes=QUADRATURE_NODES):
    """``E[sigmoid(f)]`` for ``f ~ N(mean, var)`` by Gauss-Hermite quadrature."""
    if nodes not in _GH:
        _GH[nodes] = np.polynomial.hermite.hermgauss(nodes)
    x, w = _GH[nodes]
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(2 * np.asarray(var, dtype=float))
    vals = numerics.sigmoid(mean[..., None] + sd[..., None] * x)
    return vals @ w / np.sqrt(np.pi)


def probit_approximation(mean, var):
    """``sigmoid(mean / sqrt(1 + pi var / 8))``, the classic closed-form approximation."""
    return numerics.sigmoid(np.asarray(mean) / np.sqrt(1 + np.pi * np.asarray(var) / 8))


def predict_proba(model: GpcModel, Z, link_integral="quadrature"):
    mean, var = latent_predictive(model, Z)
    if link_integral == "probit":
        return probit_approximation(mean, var)
    return logistic_gaussian_integral(mean, var)


def _features(model: GpcModel, grid: ThresholdGrid, Q):
    ts = (grid.thresholds - model.training.t_mean) / model.training.t_scale
    T = np.broadcast_to(ts, Q.shape)
    return np.column_stack([Q.ravel(), T.ravel()])


def predict_gpc_cdf_batch(model: GpcModel, grid: ThresholdGrid, Q, link_integral="quadrature"):
    """Calibrated, monotone-projected CDF values for each row of ``Q`` (base CDF on ``grid``)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != grid.K:
        raise GridMismatch(f"expected {grid.K} CDF columns, got {Q.shape[1]}")
    p = predict_proba(model, _features(model, grid, Q), link_integral).reshape(Q.shape)
    return monotone_project(p, 0.0, 1.0)


def predict_gpc_cdf(model: GpcModel, q_test: CdfGrid, link_integral="quadrature") -> CdfGrid:
    return CdfGrid(q_test.grid, predict_gpc_cdf_batch(model, q_test.grid, q_test.values[None, :], link_integral)[0])


def predict_gpc_density(model: GpcModel, q_test: CdfGrid) -> PiecewiseDensity:
    return cdf_to_density(predict_gpc_cdf(model, q_test))


def fit_gpc_calibrator(predicted_cdfs: Sequence[CdfGrid] | np.ndarray, targets, grid, cap=DEFAULT_CAP, seed=0, restarts=2):
    training = build_gpc_training(predicted_cdfs, targets, grid, cap=cap, seed=seed)
    return fit_gpc(training, restarts=restarts, seed=seed)
