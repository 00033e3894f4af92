import warnings

import numpy as np
import pytest

from regcal import base_models as bm
from regcal.distributions import STDDEV_FLOOR
from regcal.exceptions import DegenerateData, DimensionMismatch
from regcal.numerics import check_gradient


def test_ols_exact_line():
    x = np.linspace(-1, 1, 20)
    m = bm.fit_ols(x, 2 * x + 1)
    assert m.weights == pytest.approx([2.0], abs=1e-10)
    assert m.intercept == pytest.approx(1.0, abs=1e-10)
    assert m.residual_std == STDDEV_FLOOR


def test_ols_intercept_only(rng):
    y = 5 + rng.normal(size=400)
    y += 5 - y.mean()
    m = bm.fit_ols(np.zeros((400, 1)), y)
    assert m.intercept == pytest.approx(5.0, abs=1e-6)
    # one effective parameter; the D+1 divisor differs from n-1 by one row
    assert m.residual_std == pytest.approx(y.std(ddof=1), rel=2 / 400)


def test_ols_matches_pinv_and_orthogonal(rng):
    X = rng.normal(size=(200, 3))
    y = X @ [1.0, -2.0, 0.5] + 0.3 + rng.normal(size=200)
    m = bm.fit_ols(X, y)
    A = np.hstack([X, np.ones((200, 1))])
    beta = np.linalg.pinv(A) @ y
    assert np.allclose(m.weights, beta[:3], atol=1e-8)
    assert m.intercept == pytest.approx(beta[3], abs=1e-8)
    resid = y - X @ m.weights - m.intercept
    for col in A.T:
        assert abs(col @ resid) < 1e-6 * np.linalg.norm(col) * np.linalg.norm(y)


def test_ols_too_few_rows():
    with pytest.raises(DegenerateData):
        bm.fit_ols(np.ones((2, 1)), [1.0, 2.0])


def test_predict_linear():
    m = bm.OlsModel(np.array([2.0]), 1.0, 0.5)
    d = bm.predict_base(m, [3.0])
    assert (d.mean, d.stddev) == (7.0, 0.5)
    with pytest.raises(DimensionMismatch):
        bm.predict_base(m, [1.0, 2.0])


def test_brr_shrinks_on_noise(rng):
    X = rng.normal(size=(60, 5))
    y = rng.normal(size=60)
    assert np.linalg.norm(bm.fit_brr(X, y).weights) < np.linalg.norm(bm.fit_ols(X, y).weights)


def test_brr_noiseless_line():
    x = np.linspace(-1, 1, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        m = bm.fit_brr(x, 2 * x + 1)
    assert m.weights == pytest.approx([2.0], abs=1e-3)
    assert m.intercept == pytest.approx(1.0, abs=1e-3)


def test_brr_recovers_noise_precision(rng):
    x = rng.uniform(-2, 2, 500)
    m = bm.fit_brr(x, x + rng.normal(0, 0.1, 500))
    assert m.converged
    assert 0.5 * 100 < m.alpha < 2 * 100


def test_brr_variance_floor_and_ols_limit(rng):
    X = rng.normal(size=(100, 3))
    y = X @ [1.0, 0.0, -1.0] + rng.normal(size=100)
    m = bm.fit_brr(X, y)
    _, std = bm.predict_base_batch(m, rng.normal(size=(50, 3)) * 5)
    assert np.all(std**2 >= 1 / m.alpha * (1 - 1e-12))
    w, _, cov, _ = bm.brr_posterior(X, y, m.alpha, 1e-8)
    assert np.linalg.norm(w - bm.fit_ols(X, y).weights) < 1e-4
    assert np.allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_gpr_interpolates_with_tiny_noise():
    X = np.linspace(0, 3, 6)[:, None]
    y = np.sin(X[:, 0])
    m = bm.gpr_posterior(X, y, 1.0, 0.7, 1e-12)
    mean, _ = bm.predict_base_batch(m, X)
    assert np.max(np.abs(mean - y)) < 1e-6


def test_gpr_sin_fit(rng):
    X = np.sort(rng.uniform(0, 6, 30))[:, None]
    y = np.sin(X[:, 0]) + rng.normal(0, 0.01, 30)
    m = bm.fit_gpr(X, y, restarts=3, seed=1)
    Xt = np.linspace(0.2, 5.8, 50)[:, None]
    mean, std = bm.predict_base_batch(m, Xt)
    assert np.sqrt(np.mean((mean - np.sin(Xt[:, 0])) ** 2)) < 0.05
    assert np.all(std >= np.sqrt(m.noise_variance) - 1e-12)


def test_gpr_constant_target():
    X = np.linspace(0, 1, 20)[:, None]
    m = bm.fit_gpr(X, np.full(20, 3.0), seed=0)
    mean, _ = bm.predict_base_batch(m, np.array([[0.33], [0.9]]))
    assert np.allclose(mean, 3.0, atol=1e-3)
    assert m.kernel_variance < 1e-2


def test_gpr_gradient_matches_differences(rng):
    X = rng.uniform(-2, 2, (25, 1))
    y = np.cos(X[:, 0]) + rng.normal(0, 0.1, 25)
    for _ in range(10):
        p = rng.uniform(np.log(0.1), np.log(3.0), 3)
        disc = check_gradient(lambda q: bm.gpr_log_marginal(q, X, y, need_grad=False),
                              lambda q: bm.gpr_log_marginal(q, X, y)[1], p, step=1e-5)
        assert disc < 1e-4


def test_gpr_gradient_vanishes_at_optimum(rng):
    X = rng.uniform(-2, 2, (40, 1))
    y = np.sin(2 * X[:, 0]) + rng.normal(0, 0.2, 40)
    m = bm.fit_gpr(X, y, seed=3)
    p = np.log([m.kernel_variance, m.length_scale, m.noise_variance])
    _, g = bm.gpr_log_marginal(p, X, y - y.mean())
    assert np.linalg.norm(g) < 1e-4


def test_fit_base_dispatch(rng):
    X = rng.normal(size=(30, 2))
    y = X[:, 0] + rng.normal(size=30)
    for kind, cls in (("ols", bm.OlsModel), ("brr", bm.BrrModel), ("gpr", bm.GprModel)):
        m = bm.fit_base(kind, X, y)
        assert isinstance(m, cls)
        _, std = bm.predict_base_batch(m, X)
        assert np.all(std >= STDDEV_FLOOR)
    with pytest.raises(ValueError):
        bm.fit_base("svm", X, y)
