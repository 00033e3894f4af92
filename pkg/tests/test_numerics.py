import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regcal import numerics
from regcal.exceptions import MaxIterationsExceeded, NotPositiveDefinite


def test_cholesky_identity():
    assert np.allclose(numerics.cholesky(np.eye(3)), np.eye(3))


def test_cholesky_hand_case():
    L = numerics.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-12)


def test_cholesky_singular_with_jitter():
    m = np.ones((2, 2))
    L = numerics.cholesky(m, jitter=1e-6)
    assert np.allclose(L @ L.T, m + 1e-6 * np.eye(2), atol=1e-12)


def test_cholesky_escalates_then_fails():
    # singular: rescued by escalation
    L = numerics.cholesky(np.ones((3, 3)))
    assert np.all(np.isfinite(L))
    with pytest.raises(NotPositiveDefinite):
        numerics.cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_cholesky_round_trip_random(rng):
    for dim in (1, 2, 5, 17, 64):
        A = rng.normal(size=(dim, dim))
        M = A @ A.T + 1e-3 * np.eye(dim)
        jit = float(rng.choice([0.0, 1e-8]))
        L = numerics.cholesky(M, jitter=jit)
        err = np.linalg.norm(L @ L.T - (M + jit * np.eye(dim))) / np.linalg.norm(M)
        assert err < 1e-8
        assert np.allclose(L, np.tril(L))


def test_newton_quadratic_one_step():
    res = numerics.newton_minimize(lambda w: ((w[0] - 3) ** 2, np.array([2 * (w[0] - 3)]), np.array([[2.0]])), [0.0])
    assert res.converged
    assert res.iterations == 1
    assert res.solution[0] == pytest.approx(3.0)


def test_newton_quartic():
    def f(w):
        x = w[0]
        return x**4 - x**2, np.array([4 * x**3 - 2 * x]), np.array([[12 * x**2 - 2]])

    res = numerics.newton_minimize(f, [2.0], tol=1e-10)
    assert res.converged
    assert res.solution[0] == pytest.approx(1 / np.sqrt(2), abs=1e-8)


def _logistic_nll(X, y):
    def f(w):
        z = X @ w
        val = float(np.sum(np.logaddexp(0, z) - y * z))
        p = numerics.sigmoid(z)
        return val, X.T @ (p - y), (X * (p * (1 - p))[:, None]).T @ X

    return f


def test_newton_separable_not_converged():
    X = np.array([[1.0, -2.0], [1.0, -1.0], [1.0, 1.0], [1.0, 2.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    res = numerics.newton_minimize(_logistic_nll(X, y), [0.0, 0.0], tol=1e-14, max_iter=15)
    assert not res.converged
    assert res.iterations == 15
    with pytest.raises(MaxIterationsExceeded) as info:
        numerics.newton_minimize(_logistic_nll(X, y), [0.0, 0.0], tol=1e-14, max_iter=15, strict=True)
    assert info.value.best.iterations == 15


def test_newton_objective_non_increasing(rng):
    X = np.column_stack([np.ones(200), rng.normal(size=(200, 2))])
    y = (rng.random(200) < numerics.sigmoid(X @ [0.3, 1.0, -2.0])).astype(float)
    f = _logistic_nll(X, y)
    # replaying with growing iteration budgets exposes every accepted iterate
    path = [numerics.newton_minimize(f, np.zeros(3), max_iter=k).objective for k in range(0, 12)]
    assert all(b <= a for a, b in zip(path, path[1:]))
    res = numerics.newton_minimize(f, np.zeros(3))
    assert res.converged and res.gradient_norm <= 1e-8


def test_sigmoid_logit():
    assert numerics.sigmoid(0.0) == 0.5
    assert numerics.logit(0.5) == 0.0
    assert numerics.sigmoid(-40.0) > 0
    assert np.isfinite(numerics.log_sigmoid(-700.0))
    assert numerics.log_sigmoid(-40.0) == pytest.approx(-40.0, rel=1e-12)
    with pytest.raises(ValueError):
        numerics.logit(1.0)
    with pytest.raises(ValueError):
        numerics.logit(0.0)


@given(st.floats(min_value=-700, max_value=700))
def test_sigmoid_symmetry(x):
    assert numerics.sigmoid(x) + numerics.sigmoid(-x) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_logit_inverse(p):
    assert numerics.sigmoid(numerics.logit(p)) == pytest.approx(p, abs=1e-12)


def test_sigmoid_monotone():
    x = np.linspace(-50, 50, 10001)
    assert np.all(np.diff(numerics.sigmoid(x)) >= 0)


def test_check_gradient_cases(rng):
    assert numerics.check_gradient(lambda w: float(w[0] ** 2), lambda w: 2 * w, [2.0]) < 1e-6
    assert numerics.check_gradient(lambda w: 3.0, lambda w: np.zeros_like(w), [1.0, -2.0]) == 0.0
    X = np.column_stack([np.ones(50), rng.normal(size=50)])
    y = (rng.random(50) < 0.5).astype(float)
    f = _logistic_nll(X, y)
    assert numerics.check_gradient(lambda w: f(w)[0], lambda w: f(w)[1], rng.normal(size=2)) < 1e-4
    with pytest.raises(ValueError):
        numerics.check_gradient(lambda w: 0.0, lambda w: w, [1.0], step=0)


@settings(max_examples=20)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=0, max_value=100))
def test_rng_determinism(seed, stream):
    a = numerics.make_rng(seed, stream).random(5)
    b = numerics.make_rng(seed, stream).random(5)
    assert np.array_equal(a, b)
    assert np.array_equal(numerics.make_rng(seed).random(3), numerics.make_rng(seed).random(3))
