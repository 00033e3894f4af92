"""Command-line interface.

Subcommands::

    regcal generate-toy   write the two-line toy dataset as CSV (header x,y)
    regcal run            cross-validated experiment -> results.csv, summary.json
    regcal sweep          one experiment per training-threshold count -> sweep.csv, sweep_summary.csv
    regcal reliability    reliability-diagram data -> reliability.csv

results.csv columns (fixed order):
    repeat, fold, method, base, K_train, mean_log_likelihood,
    calibration_deviation, wall_time, n_test, n_floored, error

Exit codes: 0 success, 1 usage/config error, 2 some folds failed, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import ToyParams, generate_toy, resolve_dataset
from .exceptions import ConfigError, DatasetError, RegcalError
from .harness import DEFAULT_SWEEP, METHODS, BASE_MODELS, ExperimentConfig, run_experiment, run_sweep

logger = logging.getLogger("regcal")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3

RESULT_COLUMNS = [
    "repeat", "fold", "method", "base", "K_train", "mean_log_likelihood",
    "calibration_deviation", "wall_time", "n_test", "n_floored", "error",
]
SUMMARY_COLUMNS = [
    "method", "base", "K_train", "n_folds", "n_failed",
    "mean_log_likelihood", "std_log_likelihood", "mean_calibration_deviation",
]
RELIABILITY_COLUMNS = ["method", "threshold_index", "threshold", "bin", "mean_predicted", "empirical_frequency", "count"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {'' if v is None else v}\n" for k, v in cfg.to_mapping().items())


CONFIG_FLAGS = {
    "dataset": str, "base": str, "method": str, "train_thresholds": int, "predict_thresholds": int,
    "repeats": int, "folds": int, "seed": int, "gpc_cap": int, "gpc_restarts": int,
    "calibration_folds": int, "ensemble": str, "bins": int, "target": str, "delimiter": str,
}
FLAG_TO_KEY = {"base": "base_model", "bins": "reliability_bins"}


def _add_experiment_flags(p):
    p.add_argument("--config", help="key=value config file; flags override its values")
    p.add_argument("--dataset", help="CSV path, registry name (diabetes, boston, airfoil, forestfire, concrete) or 'toy'")
    p.add_argument("--base", choices=BASE_MODELS)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--train-thresholds", type=int)
    p.add_argument("--predict-thresholds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gpc-cap", type=int)
    p.add_argument("--gpc-restarts", type=int)
    p.add_argument("--calibration-folds", type=int)
    p.add_argument("--ensemble", choices=("density", "cdf"))
    p.add_argument("--bins", type=int, help="reliability bins (default 8)")
    p.add_argument("--target", help="target column name or index for CSV input")
    p.add_argument("--delimiter")
    p.add_argument("--jobs", type=int, default=1, help="parallel folds (default 1)")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--print-config", action="store_true", help="echo the resolved config and continue")


def resolve_config(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for flag in CONFIG_FLAGS:
        v = getattr(args, flag, None)
        if v is not None:
            values[FLAG_TO_KEY.get(flag, flag)] = v
    return ExperimentConfig.from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regcal", description="Calibration of probabilistic regression models.",
                     epilog=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"regcal {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate-toy", help="write the toy dataset")
    d = ToyParams()
    g.add_argument("--n", type=int, default=d.n)
    g.add_argument("--slope", type=float, default=d.slope)
    g.add_argument("--flat-level", type=float, default=d.flat_level)
    g.add_argument("--noise-std", type=float, default=d.noise_std)
    g.add_argument("--mix", type=float, default=d.mix)
    g.add_argument("--x-low", type=float, default=d.feature_range[0])
    g.add_argument("--x-high", type=float, default=d.feature_range[1])
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="cross-validated experiment", epilog=__doc__,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_experiment_flags(r)

    s = sub.add_parser("sweep", help="sweep over training-threshold counts")
    _add_experiment_flags(s)
    s.add_argument("--sweep", default=",".join(map(str, DEFAULT_SWEEP)), help="comma-separated threshold counts")
    s.add_argument("--methods", help="comma-separated methods (default: the --method value)")

    rel = sub.add_parser("reliability", help="reliability-diagram data")
    _add_experiment_flags(rel)
    rel.add_argument("--methods", help="comma-separated methods (default: the --method value)")
    return parser


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if np.isnan(x) else repr(round(x, 12))
    return x


def result_rows(res):
    c = res.config
    return [
        [_fmt(v) for v in (f.repeat_index, f.fold_index, c.method, c.base_model, c.train_thresholds,
                           f.mean_log_likelihood, f.calibration_deviation, f.wall_time_seconds,
                           f.n_test, f.n_floored, f.error or "")]
        for f in res.folds
    ]


def summary_row(res):
    c, s = res.config, res.summary
    return [_fmt(v) for v in (c.method, c.base_model, c.train_thresholds, s["n_folds"], s["n_failed"],
                              s["mean_log_likelihood"], s["std_log_likelihood"], s["mean_calibration_deviation"])]


def _manifest(out: Path, configs, files, results, started):
    manifest = {
        "version": __version__,
        "started": started,
        "configs": [c.to_mapping() for c in configs],
        "outputs": [str(out / f) for f in files],
        "folds": [
            {"method": r.config.method, "K_train": r.config.train_thresholds, "repeat": f.repeat_index,
             "fold": f.fold_index, "status": "ok" if f.ok else f.error}
            for r in results for f in r.folds
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _exit_status(results):
    return EXIT_PARTIAL if any(not f.ok for r in results for f in r.folds) else EXIT_OK


def _methods(args, cfg):
    if getattr(args, "methods", None):
        ms = [m.strip() for m in args.methods.split(",") if m.strip()]
        bad = [m for m in ms if m not in METHODS]
        if bad:
            raise UsageError(f"unknown method(s): {', '.join(bad)}")
        return ms
    return [cfg.method]


def cmd_generate_toy(args):
    p = ToyParams(args.n, args.slope, args.flat_level, args.noise_std, args.mix, (args.x_low, args.x_high), args.seed)
    ds = generate_toy(p)
    out = Path(args.out)
    _write_csv(out, ["x", "y"], [[repr(float(x)), repr(float(y))] for x, y in zip(ds.features[:, 0], ds.targets)])
    sidecar = out.with_name(out.name + ".json")
    sidecar.write_text(json.dumps({"version": __version__, "params": asdict(p)}, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _prepare(args):
    cfg = resolve_config(args)
    if args.print_config:
        sys.stdout.write(format_config(cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = resolve_dataset(cfg.dataset, cfg.target, cfg.delimiter, seed=cfg.seed)
    return cfg, out, ds


def cmd_run(args):
    started = datetime.now(timezone.utc).isoformat()
    cfg, out, ds = _prepare(args)
    res = run_experiment(cfg, ds, jobs=args.jobs)
    _write_csv(out / "results.csv", RESULT_COLUMNS, result_rows(res))
    summary = {"config": cfg.to_mapping(), **res.summary}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    (out / "config.txt").write_text(format_config(cfg), encoding="utf-8")
    _manifest(out, [cfg], ["results.csv", "summary.json", "config.txt"], [res], started)
    print(f"{cfg.method}/{cfg.base_model} K={cfg.train_thresholds}: mean log-likelihood "
          f"{res.summary['mean_log_likelihood']} over {res.summary['n_folds'] - res.summary['n_failed']} folds")
    return _exit_status([res])


def parse_sweep(text) -> list[int]:
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"invalid sweep list {text!r}") from None
    if not values:
        raise ConfigError("sweep list is empty")
    return values


def cmd_sweep(args):
    started = datetime.now(timezone.utc).isoformat()
    sweep = parse_sweep(args.sweep)
    cfg, out, ds = _prepare(args)
    results = []
    for method in _methods(args, cfg):
        results.extend(run_sweep(replace(cfg, method=method), sweep, ds, jobs=args.jobs))
    _write_csv(out / "sweep.csv", RESULT_COLUMNS, [row for r in results for row in result_rows(r)])
    _write_csv(out / "sweep_summary.csv", SUMMARY_COLUMNS, [summary_row(r) for r in results])
    _manifest(out, [r.config for r in results], ["sweep.csv", "sweep_summary.csv"], results, started)
    return _exit_status(results)


def reliability_rows(res, method):
    """Pool out-of-fold predictions per threshold index and bin them."""
    from .evaluation import reliability_line

    ok = [f for f in res.folds if f.ok]
    if not ok:
        return []
    preds = np.vstack([f.details["cdf_at_thresholds"] for f in ok])
    outcomes = np.vstack([f.details["outcomes"] for f in ok])
    thresholds = np.mean([[line.threshold for line in f.details["lines"]] for f in ok], axis=0)
    rows = []
    for j, t in enumerate(thresholds):
        line = reliability_line(preds[:, j], outcomes[:, j], res.config.reliability_bins, t)
        for b, rb in enumerate(line.bins):
            rows.append([method, j, _fmt(float(t)), b, _fmt(rb.mean_predicted), _fmt(rb.empirical_frequency), rb.count])
    return rows


def cmd_reliability(args):
    started = datetime.now(timezone.utc).isoformat()
    cfg, out, ds = _prepare(args)
    rows, results = [], []
    for method in _methods(args, cfg):
        res = run_experiment(replace(cfg, method=method), ds, jobs=1, keep_details=True)
        results.append(res)
        rows.extend(reliability_rows(res, method))
    _write_csv(out / "reliability.csv", RELIABILITY_COLUMNS, rows)
    _manifest(out, [r.config for r in results], ["reliability.csv"], results, started)
    return _exit_status(results)


COMMANDS = {"generate-toy": cmd_generate_toy, "run": cmd_run, "sweep": cmd_sweep, "reliability": cmd_reliability}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"regcal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"regcal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetError) as exc:
        print(f"regcal: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RegcalError as exc:
        print(f"regcal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
