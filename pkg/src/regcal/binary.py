"""Two-class calibration maps: logistic calibration and beta calibration.

Both are fitted discriminatively by maximum likelihood with Newton's method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .distributions import CDF_CLIP


@dataclass(frozen=True)
class LogisticCalibrator:
    """``c(s) = sigmoid(gamma * s + delta)`` on the raw score ``s``."""

    gamma: float
    delta: float

    def __call__(self, s):
        return apply_logistic(self, s)


@dataclass(frozen=True)
class BetaCalibrator:
    """``c(s) = sigmoid(m + a ln s - b ln(1 - s))`` with ``a, b >= 0``."""

    a: float
    b: float
    m: float

    def __call__(self, s):
        return apply_beta(self, s)


def apply_logistic(c: LogisticCalibrator, s):
    return numerics.sigmoid(c.gamma * np.asarray(s, dtype=float) + c.delta)


def _clip_scores(s):
    return np.clip(np.asarray(s, dtype=float), CDF_CLIP, 1 - CDF_CLIP)


def apply_beta(c: BetaCalibrator, s):
    s = _clip_scores(s)
    return numerics.sigmoid(c.m + c.a * np.log(s) - c.b * np.log1p(-s))


def _smoothed_rate(labels):
    return (labels.sum() + 1.0) / (labels.size + 2.0)


def _logreg(Z, labels, max_iter=100, tol=1e-10):
    """Unregularized logistic regression with intercept (last coefficient)."""
    A = np.hstack([Z, np.ones((Z.shape[0], 1))])
    n = A.shape[0]

    def objective(w):
        z = A @ w
        p = numerics.sigmoid(z)
        f = np.sum(np.logaddexp(0.0, z) - labels * z) / n
        g = A.T @ (p - labels) / n
        H = (A * (p * (1 - p))[:, None]).T @ A / n
        return f, g, H

    return numerics.newton_minimize(objective, np.zeros(A.shape[1]), tol=tol, max_iter=max_iter)


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be binary")
    return s, y


def _one_class(y):
    return y.size == 0 or y.min() == y.max()


def fit_logistic(scores, labels) -> LogisticCalibrator:
    s, y = _check_binary(scores, labels)
    if _one_class(y):
        return LogisticCalibrator(0.0, float(numerics.logit(_smoothed_rate(y))))
    if np.ptp(s) == 0:
        return LogisticCalibrator(0.0, float(numerics.logit(_smoothed_rate(y))))
    res = _logreg(s[:, None], y)
    return LogisticCalibrator(float(res.solution[0]), float(res.solution[1]))


def fit_beta(scores, labels) -> BetaCalibrator:
    """Beta calibration via logistic regression on ``[ln s, -ln(1 - s)]``.

    A negative coefficient is repaired by refitting without that feature,
    which keeps the map monotone.
    """
    s, y = _check_binary(scores, labels)
    if _one_class(y):
        return BetaCalibrator(1.0, 1.0, float(numerics.logit(_smoothed_rate(y))))
    s = _clip_scores(s)
    Z = np.column_stack([np.log(s), -np.log1p(-s)])
    active = [j for j in range(2) if np.ptp(Z[:, j]) > 0]
    while active:
        coef = _logreg(Z[:, active], y).solution
        negative = [j for j, c in zip(active, coef[:-1]) if c < 0]
        if not negative:
            ab = np.zeros(2)
            ab[active] = coef[:-1]
            return BetaCalibrator(float(ab[0]), float(ab[1]), float(coef[-1]))
        # drop the most negative coefficient and refit
        worst = min(negative, key=lambda j: coef[active.index(j)])
        active.remove(worst)
    return BetaCalibrator(0.0, 0.0, float(numerics.logit(_smoothed_rate(y))))


def fit_binary(kind: str, scores, labels):
    if kind == "logistic":
        return fit_logistic(scores, labels)
    if kind == "beta":
        return fit_beta(scores, labels)
    raise ValueError(f"unknown binary calibrator {kind!r}")
