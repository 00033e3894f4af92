"""Scoring of predicted densities and reliability-diagram data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import PiecewiseDensity, density_at
from .exceptions import LengthMismatch


@dataclass(frozen=True, eq=False)
class ScoreReport:
    mean_log_likelihood: float
    per_instance_log_densities: np.ndarray
    n_floored: int


@dataclass(frozen=True)
class ReliabilityBin:
    mean_predicted: float | None
    empirical_frequency: float | None
    count: int


@dataclass(frozen=True)
class ReliabilityLine:
    threshold: float
    bins: tuple[ReliabilityBin, ...]


def log_likelihood(densities: list[PiecewiseDensity], targets, log_scale: float = 0.0) -> ScoreReport:
    """Mean log density at the targets.

    ``log_scale`` is subtracted from every value; pass ``log(target_scale)``
    to report densities of standardized targets in original units.
    """
    y = np.asarray(targets, dtype=float).ravel()
    if len(densities) != y.size:
        raise LengthMismatch(f"{len(densities)} densities for {y.size} targets")
    vals = np.array([density_at(d, t) for d, t in zip(densities, y)])
    floors = np.array([d.density_floor for d in densities])
    n_floored = int(np.sum(vals <= floors * (1 + 1e-9)))
    logs = np.log(np.maximum(vals, floors)) - log_scale
    return ScoreReport(float(logs.mean()) if logs.size else float("nan"), logs, n_floored)


def bin_index(predicted, n_bins):
    """Right-closed equal-width bins on [0, 1]: bin k holds (k/n, (k+1)/n]; 0 goes to bin 0."""
    p = np.asarray(predicted, dtype=float)
    return np.clip(np.ceil(p * n_bins).astype(int) - 1, 0, n_bins - 1)


def reliability_line(predicted, outcomes, n_bins: int = 8, threshold: float = float("nan")) -> ReliabilityLine:
    p = np.asarray(predicted, dtype=float).ravel()
    o = np.asarray(outcomes, dtype=float).ravel()
    if p.size != o.size:
        raise LengthMismatch(f"{p.size} predictions for {o.size} outcomes")
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    idx = bin_index(p, n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    sum_p = np.bincount(idx, weights=p, minlength=n_bins)
    sum_o = np.bincount(idx, weights=o, minlength=n_bins)
    bins = []
    for k in range(n_bins):
        if counts[k]:
            bins.append(ReliabilityBin(sum_p[k] / counts[k], sum_o[k] / counts[k], int(counts[k])))
        else:
            bins.append(ReliabilityBin(None, None, 0))
    return ReliabilityLine(float(threshold), tuple(bins))


def calibration_deviation(lines: list[ReliabilityLine]) -> float:
    """Count-weighted mean |mean predicted - empirical frequency| over occupied bins."""
    if not lines:
        raise ValueError("need at least one reliability line")
    total = weight = 0.0
    for line in lines:
        for b in line.bins:
            if b.count:
                total += b.count * abs(b.mean_predicted - b.empirical_frequency)
                weight += b.count
    return total / weight if weight else 0.0
