"""Datasets: the two-line toy generator, CSV ingestion, a dataset registry and standardization."""

from __future__ import annotations

import configparser
import csv
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    DatasetError,
    EmptyAfterFiltering,
    NonNumericColumn,
    TargetColumnMissing,
)

logger = logging.getLogger(__name__)

MISSING_TOKENS = {"", "?", "na", "nan", "null", "none"}
DATA_DIR_ENV = "REGCAL_DATA_DIR"


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    features: np.ndarray
    targets: np.ndarray
    provenance: dict = field(default_factory=dict)
    feature_names: tuple = ()

    @property
    def n(self) -> int:
        return self.targets.size


@dataclass(frozen=True)
class ToyParams:
    n: int = 2000
    slope: float = 2.0
    flat_level: float = 1.0
    noise_std: float = 0.2
    mix: float = 0.5
    feature_range: tuple = (0.0, 2.0)
    seed: int = 7

    def __post_init__(self):
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if not 0 < self.mix <= 1:
            raise ValueError("mix must lie in (0, 1]")
        low, high = self.feature_range
        if not low < high:
            raise ValueError("feature_range must satisfy low < high")
        if self.n < 1:
            raise ValueError("n must be positive")


def generate_toy(p: ToyParams = ToyParams()) -> Dataset:
    """Mixture of an ascending line ``slope * x`` and a flat line ``flat_level``.

    With probability ``mix`` a point belongs to the ascending line. Features
    are uniform on ``feature_range`` and both lines get Gaussian noise.
    """
    rng = np.random.default_rng(p.seed)
    x = rng.uniform(p.feature_range[0], p.feature_range[1], size=p.n)
    ascending = rng.random(p.n) < p.mix
    noise = rng.normal(0.0, p.noise_std, size=p.n)
    y = np.where(ascending, p.slope * x, p.flat_level) + noise
    prov = {"generated": asdict(p), "ascending_fraction": float(ascending.mean())}
    return Dataset("toy", x[:, None], y, prov, ("x",))


def _parse(cell):
    s = cell.strip()
    if s.lower() in MISSING_TOKENS:
        return None
    try:
        return float(s)
    except ValueError:
        return None


def _read_rows(path, delimiter):
    with open(path, newline="", encoding="utf-8") as fh:
        if delimiter in (None, "whitespace", " "):
            return [line.split() for line in fh if line.strip()]
        return [row for row in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in row)]


def load_csv(path, target_column=-1, delimiter=",", has_header=True, drop_columns=(), name=None) -> Dataset:
    """Read a numeric table; rows with a missing or unparsable cell are dropped.

    ``target_column`` is a header name or a (possibly negative) index. A
    column with no parsable value at all is reported as non-numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    rows = _read_rows(path, delimiter)
    if has_header:
        if not rows:
            raise EmptyAfterFiltering(f"{path}: no header row")
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    else:
        width = max((len(r) for r in rows), default=0)
        header = [str(i) for i in range(width)]
    ncol = len(header)

    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in header:
            raise TargetColumnMissing(f"{path}: no column named {target_column!r}")
        tcol = header.index(target_column)
    else:
        tcol = int(target_column)
        if not -ncol <= tcol < ncol:
            raise TargetColumnMissing(f"{path}: target index {tcol} out of range for {ncol} columns")
        tcol %= ncol
    dropped = set()
    for c in drop_columns:
        if isinstance(c, str) and c in header:
            dropped.add(header.index(c))
        elif str(c).lstrip("-").isdigit():
            dropped.add(int(c) % ncol)
    keep = [j for j in range(ncol) if j != tcol and j not in dropped]

    parsed = [[_parse(r[j]) if j < len(r) else None for j in range(ncol)] for r in rows]
    for j in keep + [tcol]:
        column = [p[j] for p in parsed]
        raw = [r[j].strip() for r in rows if j < len(r) and r[j].strip().lower() not in MISSING_TOKENS]
        if raw and all(v is None for v in column):
            raise NonNumericColumn(header[j])
    good = [p for p in parsed if all(p[j] is not None for j in keep + [tcol])]
    n_dropped = len(parsed) - len(good)
    if not good:
        raise EmptyAfterFiltering(f"{path}: no complete rows")
    arr = np.array([[p[j] for j in keep] + [p[tcol]] for p in good], dtype=float)
    prov = {"loaded": str(path), "rows_dropped": n_dropped, "target": header[tcol]}
    if n_dropped:
        logger.info("%s: dropped %d rows with missing values", path, n_dropped)
    return Dataset(name or path.stem, arr[:, :-1], arr[:, -1], prov, tuple(header[j] for j in keep))


@dataclass(frozen=True)
class RegistryEntry:
    filename: str
    target: str
    delimiter: str = ","
    header: bool = True
    drop: tuple = ()


# Files are not bundled; place them in $REGCAL_DATA_DIR (see README).
DEFAULT_REGISTRY = {
    "diabetes": RegistryEntry("diabetes.tab.txt", "Y", "\t"),
    "boston": RegistryEntry("housing.data", "-1", "whitespace", header=False),
    "airfoil": RegistryEntry("airfoil_self_noise.dat", "-1", "\t", header=False),
    "forestfire": RegistryEntry("forestfires.csv", "area", ",", drop=("month", "day")),
    "concrete": RegistryEntry("Concrete_Data.csv", "-1", ","),
}


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def load_registry(root: Path | None = None) -> dict[str, RegistryEntry]:
    """Built-in entries, overridden by ``registry.ini`` in the data directory if present.

    Each INI section is a dataset name with keys ``file``, ``target``,
    ``delimiter`` (``comma``, ``tab``, ``whitespace`` or a literal),
    ``header`` and ``drop`` (comma-separated columns).
    """
    root = root or data_dir()
    reg = dict(DEFAULT_REGISTRY)
    ini = root / "registry.ini"
    if ini.is_file():
        cp = configparser.ConfigParser()
        cp.read(ini, encoding="utf-8")
        named = {"comma": ",", "tab": "\t", "whitespace": "whitespace", "semicolon": ";"}
        for sec in cp.sections():
            s = cp[sec]
            delim = s.get("delimiter", "comma")
            reg[sec] = RegistryEntry(
                s["file"],
                s.get("target", "-1"),
                named.get(delim, delim),
                s.getboolean("header", True),
                tuple(c.strip() for c in s.get("drop", "").split(",") if c.strip()),
            )
    return reg


def resolve_dataset(spec: str, target=None, delimiter=None, seed=7) -> Dataset:
    """A dataset from a CSV path, a registry name, or ``toy``."""
    if spec == "toy":
        return generate_toy(ToyParams(seed=seed))
    if Path(spec).is_file():
        return load_csv(spec, target if target is not None else -1, delimiter or ",")
    reg = load_registry()
    if spec in reg:
        e = reg[spec]
        path = data_dir() / e.filename
        if not path.is_file():
            raise DatasetError(f"dataset {spec!r} expects {path}; download it manually (see README)")
        return load_csv(path, target if target is not None else e.target, delimiter or e.delimiter, e.header, e.drop, spec)
    raise DatasetError(f"unknown dataset {spec!r}: not a file, registry name or 'toy'")


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Affine scaling fitted on a training split; zero-variance columns keep scale 1."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    @classmethod
    def fit(cls, X, y) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        xs = X.std(axis=0)
        xs = np.where(xs > 0, xs, 1.0)
        ys = float(y.std())
        return cls(X.mean(axis=0), xs, float(y.mean()), ys if ys > 0 else 1.0)

    def transform_x(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_x(self, Z):
        return np.asarray(Z, dtype=float) * self.x_scale + self.x_mean

    def inverse_y(self, z):
        return np.asarray(z, dtype=float) * self.y_scale + self.y_mean

    def density_to_original(self, d):
        """Density of standardized targets expressed per original target unit."""
        return np.asarray(d, dtype=float) / self.y_scale


def standardize(train_features, train_targets) -> Standardizer:
    return Standardizer.fit(train_features, train_targets)
