"""Cross-validation protocol for calibrated probabilistic regression.

Per outer fold: standardize on the training fold, build the threshold grid
from its target range, then three times fit the base model on two thirds of
the training fold and the calibrator on the remaining third. Test
predictions of the three calibrated models are averaged into one density.
"""

from __future__ import annotations

import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.special import ndtr

from . import base_models, empirical, gpc, numerics
from .data import Dataset, Standardizer, resolve_dataset
from .distributions import (
    DENSITY_FLOOR,
    PiecewiseDensity,
    ThresholdGrid,
    build_threshold_grid,
    cdf_values_to_masses,
    floor_masses,
)
from .evaluation import calibration_deviation, log_likelihood, reliability_line
from .exceptions import ConfigError, TooFewInstances

logger = logging.getLogger(__name__)

BASE_MODELS = ("ols", "brr", "gpr")
METHODS = ("none", "e-logistic", "e-beta", "gpc")
ENSEMBLE_MODES = ("density", "cdf")
DEFAULT_SWEEP = (8, 16, 32, 48, 64)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "toy"
    base_model: str = "ols"
    method: str = "e-beta"
    train_thresholds: int = 16
    predict_thresholds: int = 1024
    repeats: int = 10
    folds: int = 5
    seed: int = 0
    gpc_cap: int = 5000
    gpc_restarts: int = 2
    calibration_folds: int = 3
    ensemble: str = "density"
    reliability_bins: int = 8
    target: str | None = None
    delimiter: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.base_model not in BASE_MODELS:
            raise ConfigError(f"base_model must be one of {BASE_MODELS}, got {self.base_model!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.ensemble not in ENSEMBLE_MODES:
            raise ConfigError(f"ensemble must be one of {ENSEMBLE_MODES}, got {self.ensemble!r}")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.train_thresholds < 2:
            raise ConfigError("train_thresholds must be at least 2")
        if self.predict_thresholds < self.train_thresholds:
            raise ConfigError("predict_thresholds must be >= train_thresholds")
        if self.calibration_folds < 2:
            raise ConfigError("calibration_folds must be at least 2")
        if self.gpc_cap < 1:
            raise ConfigError("gpc_cap must be positive")
        if self.reliability_bins < 1:
            raise ConfigError("reliability_bins must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string or typed values, e.g. parsed ``key=value`` lines."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, val in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            if val is None or (isinstance(val, str) and not val.strip()):
                continue
            if isinstance(val, str) and "int" in str(types[key]) and "None" not in str(types[key]):
                try:
                    val = int(val)
                except ValueError:
                    raise ConfigError(f"config key {key!r} expects an integer, got {val!r}") from None
            kwargs[key] = val
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return asdict(self)


@dataclass
class FoldResult:
    repeat_index: int
    fold_index: int
    mean_log_likelihood: float
    n_test: int
    calibration_deviation: float
    wall_time_seconds: float
    n_floored: int = 0
    error: str | None = None
    details: dict | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    folds: list
    summary: dict


def split_cv(n: int, folds: int, repeats: int = 1, seed=0):
    """``(repeat, fold, train_idx, test_idx)`` for repeated shuffled k-fold CV."""
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n < folds:
        raise TooFewInstances(f"{n} instances cannot fill {folds} folds")
    out = []
    for r in range(repeats):
        perm = numerics.make_rng(seed, 1, r).permutation(n)
        parts = np.array_split(perm, folds)
        for k, test in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != k])
            out.append((r, k, np.sort(train), np.sort(test)))
    return out


def max_variance_feature(X) -> int:
    return int(np.argmax(np.var(np.asarray(X, dtype=float), axis=0)))


def _gaussian_cdf_matrix(mean, std, thresholds):
    return ndtr((thresholds[None, :] - mean[:, None]) / std[:, None])


def _tail_widths(grid: ThresholdGrid):
    return np.concatenate([[grid.tail_width], grid.widths, [grid.tail_width]])


def _floored(masses, grid):
    m = floor_masses(np.maximum(masses, 0.0), _tail_widths(grid), DENSITY_FLOOR)
    return m / m.sum(axis=1, keepdims=True)


def _densities(grid: ThresholdGrid, masses) -> list[PiecewiseDensity]:
    w = grid.widths
    return [PiecewiseDensity(grid, m[1:-1] / w, float(m[0]), float(m[-1])) for m in masses]


def _cdf_at_thresholds(masses, grid: ThresholdGrid, thresholds):
    """CDF of piecewise densities (rows of ``masses`` on ``grid``) at interior points ``thresholds``."""
    cum = np.cumsum(masses[:, :-1], axis=1)  # CDF at grid thresholds
    return np.array([np.interp(thresholds, grid.thresholds, c) for c in cum])


def ensemble_masses(mass_list, grid, mode="density"):
    """Average calibrated segment masses from several models on a shared grid."""
    if mode == "density":
        m = np.mean([_floored(ms, grid) for ms in mass_list], axis=0)
    else:
        cdf = np.mean([np.cumsum(ms[:, :-1], axis=1) for ms in mass_list], axis=0)
        m = cdf_values_to_masses(np.clip(np.maximum.accumulate(cdf, axis=1), 0, 1))
    return _floored(m, grid)


def fit_calibrator(method, grid, fine, Qcal, ycal, config: ExperimentConfig, seed):
    if method in empirical.KINDS:
        return empirical.fit_empirical(method, grid, Qcal, ycal)
    if method == "gpc":
        return gpc.fit_gpc_calibrator(Qcal, ycal, grid, cap=config.gpc_cap, seed=seed, restarts=config.gpc_restarts)
    raise ValueError(method)


def calibrated_masses(calibrator, method, grid, fine, mean, std):
    """Segment masses of calibrated test predictions on the evaluation grid."""
    if method in empirical.KINDS:
        return empirical.calibrate_masses_batch(calibrator, _gaussian_cdf_matrix(mean, std, grid.thresholds))
    Q = _gaussian_cdf_matrix(mean, std, fine.thresholds)
    return cdf_values_to_masses(gpc.predict_gpc_cdf_batch(calibrator, fine, Q))


def run_fold(config: ExperimentConfig, train_idx, test_idx, dataset: Dataset, repeat=0, fold=0, keep_details=False):
    train_idx = np.asarray(train_idx)
    test_idx = np.asarray(test_idx)
    if np.intersect1d(train_idx, test_idx).size:
        raise ValueError("train and test indices overlap")
    start = time.perf_counter()
    X, y = dataset.features, dataset.targets
    if config.base_model == "gpr" and X.shape[1] > 1:
        X = X[:, [max_variance_feature(X[train_idx])]]
    scaler = Standardizer.fit(X[train_idx], y[train_idx])
    Ztr, ttr = scaler.transform_x(X[train_idx]), scaler.transform_y(y[train_idx])
    Zte, tte = scaler.transform_x(X[test_idx]), scaler.transform_y(y[test_idx])
    log_scale = float(np.log(scaler.y_scale))
    grid = build_threshold_grid(float(ttr.min()), float(ttr.max()), config.train_thresholds)
    fine = build_threshold_grid(float(ttr.min()), float(ttr.max()), config.predict_thresholds)
    details = {"grid": grid, "scaler": scaler, "test_index": test_idx}

    if config.method == "none":
        base = base_models.fit_base(config.base_model, Ztr, ttr, seed=_seed(config, repeat, fold, 99))
        mean, std = base_models.predict_base_batch(base, Zte)
        z = (tte - mean) / std
        logs = -0.5 * z**2 - np.log(std) - 0.5 * np.log(2 * np.pi) - log_scale
        mll, n_floored = float(logs.mean()), 0
        cdf_t = _gaussian_cdf_matrix(mean, std, grid.thresholds)
        details.update(mean=mean, std=std)
    else:
        sub = np.array_split(numerics.make_rng(config.seed, 2, repeat, fold).permutation(train_idx.size), config.calibration_folds)
        eval_grid = grid if config.method in empirical.KINDS else fine
        mass_list = []
        for k, cal in enumerate(sub):
            fit_part = np.sort(np.concatenate([p for j, p in enumerate(sub) if j != k]))
            cal = np.sort(cal)
            seed = _seed(config, repeat, fold, k)
            base = base_models.fit_base(config.base_model, Ztr[fit_part], ttr[fit_part], seed=seed)
            m_cal, s_cal = base_models.predict_base_batch(base, Ztr[cal])
            Qcal = _gaussian_cdf_matrix(m_cal, s_cal, grid.thresholds)
            calibrator = fit_calibrator(config.method, grid, fine, Qcal, ttr[cal], config, seed)
            m_te, s_te = base_models.predict_base_batch(base, Zte)
            mass_list.append(calibrated_masses(calibrator, config.method, grid, fine, m_te, s_te))
            details.setdefault("splits", []).append((train_idx[fit_part], train_idx[cal]))
        masses = ensemble_masses(mass_list, eval_grid, config.ensemble)
        densities = _densities(eval_grid, masses)
        report = log_likelihood(densities, tte, log_scale)
        mll, n_floored = report.mean_log_likelihood, report.n_floored
        cdf_t = _cdf_at_thresholds(masses, eval_grid, grid.thresholds)
        details.update(densities=densities, masses=masses, eval_grid=eval_grid)

    outcomes = (tte[:, None] <= grid.thresholds[None, :]).astype(float)
    lines = [
        reliability_line(cdf_t[:, j], outcomes[:, j], config.reliability_bins, scaler.inverse_y(t))
        for j, t in enumerate(grid.thresholds)
    ]
    dev = calibration_deviation(lines)
    elapsed = time.perf_counter() - start
    details.update(cdf_at_thresholds=cdf_t, outcomes=outcomes, lines=lines)
    return FoldResult(repeat, fold, mll, int(test_idx.size), dev, elapsed, n_floored, None, details if keep_details else None)


def _seed(config, repeat, fold, k):
    return int(numerics.make_rng(config.seed, 3, repeat, fold, k).integers(2**31 - 1))


def _run_one(args):
    config, dataset, r, k, train, test, keep = args
    try:
        return run_fold(config, train, test, dataset, r, k, keep)
    except Exception as exc:  # recorded per fold; the run continues
        logger.warning("fold (%d, %d) failed: %s", r, k, exc)
        logger.debug("%s", traceback.format_exc())
        return FoldResult(r, k, float("nan"), len(test), float("nan"), 0.0, 0, f"{type(exc).__name__}: {exc}")


def summarize(results) -> dict:
    ok = [r for r in results if r.ok]
    ll = np.array([r.mean_log_likelihood for r in ok])
    dev = np.array([r.calibration_deviation for r in ok])
    return {
        "n_folds": len(results),
        "n_failed": len(results) - len(ok),
        "mean_log_likelihood": float(ll.mean()) if ok else None,
        "std_log_likelihood": float(ll.std(ddof=1)) if len(ok) > 1 else 0.0 if ok else None,
        "mean_calibration_deviation": float(dev.mean()) if ok else None,
    }


def run_experiment(config: ExperimentConfig, dataset: Dataset | None = None, jobs: int = 1, keep_details=False):
    """Run every (repeat, fold); failed folds are recorded and left out of the summary."""
    if dataset is None:
        dataset = resolve_dataset(config.dataset, config.target, config.delimiter, seed=config.seed)
    splits = split_cv(dataset.n, config.folds, config.repeats, config.seed)
    tasks = [(config, dataset, r, k, tr, te, keep_details) for r, k, tr, te in splits]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda r: (r.repeat_index, r.fold_index))
    return ExperimentResult(config, results, summarize(results))


def run_sweep(config: ExperimentConfig, sweep=DEFAULT_SWEEP, dataset: Dataset | None = None, jobs: int = 1):
    """One experiment per training-threshold count."""
    sweep = list(sweep)
    if not sweep:
        raise ConfigError("sweep list is empty")
    if dataset is None:
        dataset = resolve_dataset(config.dataset, config.target, config.delimiter, seed=config.seed)
    out = []
    for K in sweep:
        cfg = replace(config, train_thresholds=int(K), predict_thresholds=max(config.predict_thresholds, int(K)))
        out.append(run_experiment(cfg, dataset, jobs))
    return out
