import numpy as np
import pytest

from regcal import data
from regcal.exceptions import DatasetError, EmptyAfterFiltering, NonNumericColumn, TargetColumnMissing


def test_toy_degenerate_mixture():
    ds = data.generate_toy(data.ToyParams(n=500, noise_std=1e-6, mix=1.0))
    assert np.max(np.abs(ds.targets - 2.0 * ds.features[:, 0])) < 1e-4


def test_toy_defaults_and_branch_ratio():
    ds = data.generate_toy()
    assert ds.n == 2000 and ds.features.shape == (2000, 1)
    assert abs(ds.provenance["ascending_fraction"] - 0.5) <= 0.03
    x = ds.features[:, 0]
    assert x.min() >= 0 and x.max() <= 2


def test_toy_determinism():
    a, b = data.generate_toy(), data.generate_toy()
    assert np.array_equal(a.features, b.features) and np.array_equal(a.targets, b.targets)
    c = data.generate_toy(data.ToyParams(seed=8))
    assert not np.array_equal(a.targets, c.targets)


def test_toy_validation():
    with pytest.raises(ValueError):
        data.ToyParams(noise_std=0)
    with pytest.raises(ValueError):
        data.ToyParams(feature_range=(2, 1))
    with pytest.raises(ValueError):
        data.ToyParams(mix=1.5)


def _silhouette_two_means(v):
    v = np.sort(v)
    # best 1-D split into two contiguous groups
    cost = [np.var(v[:k]) * k + np.var(v[k:]) * (v.size - k) for k in range(2, v.size - 1)]
    k = int(np.argmin(cost)) + 2
    lab = np.r_[np.zeros(k), np.ones(v.size - k)]
    s = []
    for i in range(v.size):
        own = lab == lab[i]
        a = np.abs(v[own] - v[i]).sum() / max(own.sum() - 1, 1)
        b = np.abs(v[~own] - v[i]).mean()
        s.append((b - a) / max(a, b))
    return float(np.mean(s))


def test_toy_two_bands():
    ds = data.generate_toy()
    x, y = ds.features[:, 0], ds.targets
    band = (x > 1.5) & (x < 1.7)
    assert _silhouette_two_means(y[band] - 1.0) > 0.5


def test_load_csv_basic(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("x,y\n1,2\n3,4\n5,6\n")
    ds = data.load_csv(p, "y")
    assert np.array_equal(ds.features, [[1], [3], [5]])
    assert np.array_equal(ds.targets, [2, 4, 6])
    assert ds.provenance["rows_dropped"] == 0


def test_load_csv_missing_cell(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,y\n1,2,3\n4,,6\n7,8,9\n")
    ds = data.load_csv(p, "y")
    assert ds.provenance["rows_dropped"] == 1
    assert ds.n == 2


def test_load_csv_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(TargetColumnMissing):
        data.load_csv(p, "z")
    with pytest.raises(TargetColumnMissing):
        data.load_csv(p, 5)
    with pytest.raises(FileNotFoundError):
        data.load_csv(tmp_path / "nope.csv")
    q = tmp_path / "s.csv"
    q.write_text("name,y\nfoo,1\nbar,2\n")
    with pytest.raises(NonNumericColumn) as info:
        data.load_csv(q, "y")
    assert "name" in str(info.value)
    e = tmp_path / "e.csv"
    e.write_text("x,y\n1,\n,2\n")
    with pytest.raises(EmptyAfterFiltering):
        data.load_csv(e, "y")


def test_load_csv_variants(tmp_path):
    p = tmp_path / "w.data"
    p.write_text("1 2 3\n4 5 6\n\n7 8 9\n")
    ds = data.load_csv(p, -1, "whitespace", has_header=False)
    assert ds.features.shape == (3, 2) and np.array_equal(ds.targets, [3, 6, 9])
    q = tmp_path / "d.csv"
    q.write_text("m,a,y\njan,1,2\nfeb,3,4\n")
    ds = data.load_csv(q, "y", drop_columns=("m",))
    assert ds.feature_names == ("a",)


def test_registry(tmp_path, monkeypatch):
    monkeypatch.setenv(data.DATA_DIR_ENV, str(tmp_path))
    with pytest.raises(DatasetError):
        data.resolve_dataset("diabetes")
    with pytest.raises(DatasetError):
        data.resolve_dataset("no-such-thing")
    (tmp_path / "registry.ini").write_text("[mine]\nfile = m.tsv\ntarget = out\ndelimiter = tab\n")
    (tmp_path / "m.tsv").write_text("a\tout\n1\t2\n3\t4\n")
    ds = data.resolve_dataset("mine")
    assert ds.name == "mine" and np.array_equal(ds.targets, [2, 4])
    assert set(data.DEFAULT_REGISTRY) <= set(data.load_registry())
    assert data.resolve_dataset("toy").n == 2000


def test_standardizer(rng):
    X = np.column_stack([rng.normal(3, 2, 50), np.full(50, 7.0)])
    y = rng.normal(10, 4, 50)
    s = data.standardize(X, y)
    Z = s.transform_x(X)
    assert np.allclose(Z[:, 1], 0) and s.x_scale[1] == 1.0
    assert np.max(np.abs(s.inverse_x(Z) - X)) < 1e-10
    assert np.max(np.abs(s.inverse_y(s.transform_y(y)) - y)) < 1e-10
    assert s.density_to_original(0.6) == pytest.approx(0.6 / s.y_scale)
