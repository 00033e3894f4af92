"""Calibration of probabilistic regression models.

Predictive distributions from a base regressor are recalibrated on a grid of
thresholds, either with one binary calibrator per threshold segment
(``e-logistic``, ``e-beta``) or with one Gaussian process classifier over
(predicted CDF, threshold) pairs (``gpc``).
"""

__version__ = "0.1.0"

from .base_models import fit_base, predict_base, predict_base_batch
from .distributions import (
    CdfGrid,
    GaussianPredictive,
    PiecewiseDensity,
    ThresholdGrid,
    build_threshold_grid,
    cdf_to_density,
    density_at,
)
from .data import Dataset, ToyParams, generate_toy, load_csv
from .empirical import EmpiricalCalibrator, empirical_cdf, empirical_density, fit_empirical
from .evaluation import calibration_deviation, log_likelihood, reliability_line
from .exceptions import RegcalError
from .gpc import fit_gpc_calibrator, predict_gpc_cdf, predict_gpc_density
from .harness import ExperimentConfig, run_experiment, run_sweep

__all__ = [
    "CdfGrid", "Dataset", "EmpiricalCalibrator", "ExperimentConfig", "GaussianPredictive", "PiecewiseDensity",
    "RegcalError", "ThresholdGrid", "build_threshold_grid", "calibration_deviation", "cdf_to_density",
    "density_at", "empirical_cdf", "empirical_density", "fit_base", "fit_empirical", "fit_gpc_calibrator",
    "generate_toy", "load_csv", "ToyParams",
    "log_likelihood", "predict_base", "predict_base_batch", "predict_gpc_cdf", "predict_gpc_density",
    "reliability_line", "run_experiment", "run_sweep",
]
