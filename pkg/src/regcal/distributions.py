"""Predictive distributions on threshold grids: CDF samples and piecewise-constant densities.

A calibrated predictive distribution is carried around as CDF values
``q_1 <= ... <= q_K`` at thresholds ``t_1 < ... < t_K``. The induced density
is constant on each interior segment ``(t_i, t_{i+1}]``; the mass below
``t_1`` and above ``t_K`` is spread uniformly over a virtual tail whose width
is half the grid span.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .exceptions import DegenerateRange, GridMismatch

STDDEV_FLOOR = 1e-6
DENSITY_FLOOR = 1e-9
CDF_CLIP = 1e-12


@dataclass(frozen=True)
class GaussianPredictive:
    mean: float
    stddev: float

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError(f"stddev must be positive, got {self.stddev}")
        object.__setattr__(self, "stddev", max(float(self.stddev), STDDEV_FLOOR))
        object.__setattr__(self, "mean", float(self.mean))

    def logpdf(self, y):
        z = (np.asarray(y, dtype=float) - self.mean) / self.stddev
        return -0.5 * z**2 - np.log(self.stddev) - 0.5 * np.log(2 * np.pi)


@dataclass(frozen=True, eq=False)
class ThresholdGrid:
    thresholds: np.ndarray
    range_low: float
    range_high: float

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a threshold grid needs at least two thresholds")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if not (self.range_low <= t[0] and t[-1] <= self.range_high):
            raise ValueError("range must bracket the thresholds")
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)

    @property
    def K(self) -> int:
        return self.thresholds.size

    @property
    def span(self) -> float:
        return self.range_high - self.range_low

    @property
    def tail_width(self) -> float:
        return 0.5 * self.span

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.thresholds)

    def same_as(self, other: "ThresholdGrid") -> bool:
        return self is other or (
            self.K == other.K
            and np.allclose(self.thresholds, other.thresholds, rtol=1e-12, atol=1e-12)
            and np.isclose(self.range_low, other.range_low)
            and np.isclose(self.range_high, other.range_high)
        )


def build_threshold_grid(y_min: float, y_max: float, K: int) -> ThresholdGrid:
    """K equally spaced thresholds on ``[y_min - r/2, y_max + r/2]``, ``r = y_max - y_min``."""
    if not y_max > y_min:
        raise DegenerateRange(f"target range is empty: [{y_min}, {y_max}]")
    if K < 2:
        raise ValueError("K must be at least 2")
    r = y_max - y_min
    lo, hi = y_min - 0.5 * r, y_max + 0.5 * r
    t = np.linspace(lo, hi, K)
    t[0], t[-1] = lo, hi
    return ThresholdGrid(t, lo, hi)


def gaussian_cdf(d: GaussianPredictive, t):
    out = ndtr((np.asarray(t, dtype=float) - d.mean) / d.stddev)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True, eq=False)
class CdfGrid:
    grid: ThresholdGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.K,):
            raise GridMismatch(f"expected {self.grid.K} CDF values, got shape {v.shape}")
        if np.any(v < 0) or np.any(v > 1) or np.any(np.diff(v) < 0):
            raise ValueError("CDF values must be non-decreasing and within [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def gaussian_cdf_grid(d: GaussianPredictive, grid: ThresholdGrid) -> CdfGrid:
    return CdfGrid(grid, np.maximum.accumulate(gaussian_cdf(d, grid.thresholds)))


@dataclass(frozen=True, eq=False)
class PiecewiseDensity:
    grid: ThresholdGrid
    segment_densities: np.ndarray
    tail_mass_low: float
    tail_mass_high: float
    density_floor: float = field(default=DENSITY_FLOOR)

    @property
    def segment_masses(self) -> np.ndarray:
        return self.segment_densities * self.grid.widths

    def total_mass(self) -> float:
        return float(self.segment_masses.sum() + self.tail_mass_low + self.tail_mass_high)

    def density_at(self, y):
        return density_at(self, y)

    def cdf_at(self, t):
        """CDF of the piecewise density (linear inside the grid, uniform tails)."""
        t = np.asarray(t, dtype=float)
        th = self.grid.thresholds
        w = self.grid.tail_width
        cum = self.tail_mass_low + np.concatenate([[0.0], np.cumsum(self.segment_masses)])
        inside = np.interp(t, th, cum)
        low = self.tail_mass_low * np.clip(1 - (th[0] - t) / w, 0, 1)
        high = cum[-1] + self.tail_mass_high * np.clip((t - th[-1]) / w, 0, 1)
        out = np.where(t < th[0], low, np.where(t > th[-1], high, inside))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)


def floor_masses(masses, widths, floor=DENSITY_FLOOR):
    """Raise every mass to ``floor * width`` and take the deficit proportionally
    from the masses that sit above their floor. Rows of a 2-D array are
    handled independently; each output row sums to the input row's sum."""
    m = np.atleast_2d(np.asarray(masses, dtype=float))
    f = np.broadcast_to(floor * np.asarray(widths, dtype=float), m.shape)
    below = m < f
    if not below.any():
        return m.reshape(np.shape(masses))
    out = m.copy()
    excess = np.where(below, 0.0, m - f)
    deficit = np.where(below, f - m, 0.0).sum(axis=1, keepdims=True)
    total_excess = excess.sum(axis=1, keepdims=True)
    share = np.divide(excess, total_excess, out=np.zeros_like(excess), where=total_excess > 0)
    out = np.where(below, f, m - deficit * share)
    return out.reshape(np.shape(masses))


def cdf_values_to_masses(values):
    """CDF values (..., K) to masses (..., K+1): low tail, K-1 segments, high tail."""
    v = np.asarray(values, dtype=float)
    zero = np.zeros(v.shape[:-1] + (1,))
    return np.diff(np.concatenate([zero, v, zero + 1.0], axis=-1), axis=-1)


def masses_to_density(grid: ThresholdGrid, masses, floor=DENSITY_FLOOR) -> PiecewiseDensity:
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (grid.K + 1,):
        raise GridMismatch(f"expected {grid.K + 1} masses, got {masses.shape}")
    w = np.concatenate([[grid.tail_width], grid.widths, [grid.tail_width]])
    m = floor_masses(np.maximum(masses, 0.0), w, floor)
    m = m / m.sum()
    return PiecewiseDensity(grid, m[1:-1] / grid.widths, float(m[0]), float(m[-1]), floor)


def cdf_to_density(c: CdfGrid, floor=DENSITY_FLOOR) -> PiecewiseDensity:
    return masses_to_density(c.grid, cdf_values_to_masses(c.values), floor)


def density_at(p: PiecewiseDensity, y):
    """Density at ``y``; in the tails the mass is spread over the virtual tail width."""
    y = np.asarray(y, dtype=float)
    th = p.grid.thresholds
    idx = np.clip(np.searchsorted(th, y, side="left") - 1, 0, th.size - 2)
    inside = p.segment_densities[idx]
    w = p.grid.tail_width
    low = max(p.tail_mass_low / w, p.density_floor)
    high = max(p.tail_mass_high / w, p.density_floor)
    out = np.where(y <= th[0], low, np.where(y > th[-1], high, inside))
    return out if out.ndim else float(out)


def monotone_project(values, lo=0.0, hi=1.0):
    """Running maximum followed by clamping into ``[lo, hi]``."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    v = np.asarray(values, dtype=float)
    return np.clip(np.maximum.accumulate(v, axis=-1), lo, hi)


def average_densities(densities: list[PiecewiseDensity]) -> PiecewiseDensity:
    """Equal-weight pointwise average of densities on a shared grid, renormalized."""
    first = densities[0]
    for d in densities[1:]:
        if not d.grid.same_as(first.grid):
            raise GridMismatch("densities must share a grid to be averaged")
    seg = np.mean([d.segment_densities for d in densities], axis=0)
    lo = float(np.mean([d.tail_mass_low for d in densities]))
    hi = float(np.mean([d.tail_mass_high for d in densities]))
    total = (seg * first.grid.widths).sum() + lo + hi
    return PiecewiseDensity(first.grid, seg / total, lo / total, hi / total, first.density_floor)
