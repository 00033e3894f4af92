"""Empirical regression calibration (e-logistic, e-beta).

The target axis is cut by K thresholds into K+1 segments, including two
unbounded tails. One binary calibrator per segment maps the base model's
probability mass on that segment to a calibrated mass; the calibrated
masses are renormalized to sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .binary import BetaCalibrator, LogisticCalibrator, apply_beta, apply_logistic, fit_binary
from .distributions import CdfGrid, PiecewiseDensity, ThresholdGrid, cdf_values_to_masses, masses_to_density
from .exceptions import GridMismatch, LengthMismatch

KINDS = {"e-logistic": "logistic", "e-beta": "beta"}


@dataclass(frozen=True, eq=False)
class EmpiricalCalibrator:
    grid: ThresholdGrid
    per_segment: tuple
    kind: str

    def __post_init__(self):
        if len(self.per_segment) != self.grid.K + 1:
            raise ValueError("need one calibrator per segment (K + 1)")
        cls = LogisticCalibrator if self.kind == "e-logistic" else BetaCalibrator
        if not all(isinstance(c, cls) for c in self.per_segment):
            raise TypeError(f"all segment calibrators must be {cls.__name__}")


def segment_index(grid: ThresholdGrid, y):
    """Segment of each target: 0 for ``y <= t_1``, i for ``t_i < y <= t_{i+1}``, K above ``t_K``."""
    return np.searchsorted(grid.thresholds, np.asarray(y, dtype=float), side="left")


def _stack(cdfs: Sequence[CdfGrid] | np.ndarray, grid: ThresholdGrid):
    if isinstance(cdfs, np.ndarray):
        Q = np.atleast_2d(cdfs)
        if Q.shape[1] != grid.K:
            raise GridMismatch(f"expected {grid.K} CDF columns, got {Q.shape[1]}")
        return Q
    for c in cdfs:
        if not c.grid.same_as(grid):
            raise GridMismatch("predicted CDFs must be on the calibrator's grid")
    return np.array([c.values for c in cdfs])


def fit_empirical(kind: str, grid: ThresholdGrid, predicted_cdfs, targets) -> EmpiricalCalibrator:
    """Fit one-vs-rest segment calibrators.

    ``predicted_cdfs`` is a sequence of :class:`CdfGrid` or an ``(N, K)`` array.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown empirical calibrator {kind!r}")
    Q = _stack(predicted_cdfs, grid)
    y = np.asarray(targets, dtype=float)
    if Q.shape[0] != y.size:
        raise LengthMismatch(f"{Q.shape[0]} CDFs for {y.size} targets")
    P = cdf_values_to_masses(Q)
    seg = segment_index(grid, y)
    per_segment = tuple(fit_binary(KINDS[kind], P[:, i], seg == i) for i in range(grid.K + 1))
    return EmpiricalCalibrator(grid, per_segment, kind)


def _apply(c, p):
    return apply_logistic(c, p) if isinstance(c, LogisticCalibrator) else apply_beta(c, p)


def calibrate_masses_batch(c: EmpiricalCalibrator, Q):
    """Renormalized calibrated masses, shape (N, K+1), for CDF rows ``Q``."""
    P = cdf_values_to_masses(np.atleast_2d(Q))
    R = np.column_stack([_apply(ci, P[:, i]) for i, ci in enumerate(c.per_segment)])
    total = R.sum(axis=1, keepdims=True)
    uniform = np.full_like(R, 1.0 / R.shape[1])
    out = np.divide(R, total, out=uniform, where=total > 0)
    return out / out.sum(axis=1, keepdims=True)


def calibrate_masses(c: EmpiricalCalibrator, q: CdfGrid):
    if not q.grid.same_as(c.grid):
        raise GridMismatch("CDF grid differs from the calibrator's grid")
    return calibrate_masses_batch(c, q.values)[0]


def empirical_density(c: EmpiricalCalibrator, q: CdfGrid) -> PiecewiseDensity:
    return masses_to_density(c.grid, calibrate_masses(c, q))


def empirical_cdf(c: EmpiricalCalibrator, q: CdfGrid) -> CdfGrid:
    m = calibrate_masses(c, q)
    return CdfGrid(c.grid, np.clip(np.cumsum(m[:-1]), 0.0, 1.0))
