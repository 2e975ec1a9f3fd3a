import numpy as np
import pytest

from cbrbench.data import GeneratorConfig, generate_synthetic
from cbrbench.dataset import Dataset
from cbrbench.svr import (SvrParams, default_gamma, dual_objective, fit_svr,
                          kkt_max_violation, rbf_kernel, _solve_smo)


def random_problem(rng):
    n = int(rng.integers(5, 101))
    X = rng.normal(size=(n, int(rng.integers(1, 6))))
    w = rng.normal(size=X.shape[1])
    y = X @ w + 0.3 * rng.normal(size=n)
    C = float(rng.choice([0.5, 10.0, 100.0, 1000.0]))
    eps = float(rng.choice([0.05, 0.1, 0.5]))
    gamma = float(rng.choice([0.05, 0.2, 1.0]))
    return X, y, C, eps, gamma


def test_kkt_audit_random_problems():
    rng = np.random.default_rng(0)
    for _ in range(40):
        X, y, C, eps, gamma = random_problem(rng)
        K = rbf_kernel(X, X, gamma)
        n = len(y)
        beta, b, converged, _ = _solve_smo(K, y, C, eps, 1e-3, 10 * n * n)
        assert converged
        assert kkt_max_violation(K, y, beta, b, C, eps) <= 1e-3
        assert np.all(np.abs(beta) <= C + 1e-12)
        assert abs(beta.sum()) <= 1e-6


def test_dual_objective_improves_on_zero():
    rng = np.random.default_rng(1)
    for _ in range(10):
        X, y, C, eps, gamma = random_problem(rng)
        K = rbf_kernel(X, X, gamma)
        beta, b, _, _ = _solve_smo(K, y, C, eps, 1e-3, 10 * len(y) ** 2)
        # minimization form: the zero vector scores 0, the solution must not
        # be worse
        assert dual_objective(K, y, beta, eps) <= 1e-12


def test_rbf_kernel_basic_properties():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(12, 4))
    K = rbf_kernel(A, A, 0.3)
    assert np.allclose(np.diag(K), 1.0)
    assert np.allclose(K, K.T)
    assert K.min() > 0 and K.max() <= 1.0 + 1e-12


def test_default_gamma_rule():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 7))
    assert default_gamma(X) == pytest.approx(1.0 / (7 * X.var()))
    assert default_gamma(np.zeros((5, 7))) == pytest.approx(1.0 / 7)


def _soil(n=60, seed=9):
    return generate_synthetic(GeneratorConfig(n, seed=seed))


def test_single_training_point_within_tube():
    ds = _soil(12)
    one = Dataset(ds.X[:1], ds.y[:1], validate=False)
    m = fit_svr(one, SvrParams(c=10.0, epsilon=0.5))
    pred = m.predict(one.X)[0]
    assert ds.y[0] - 0.5 <= pred <= ds.y[0] + 0.5


def test_constant_target_beta_zero():
    ds = _soil(20)
    const = Dataset(ds.X, np.full(ds.n, 9.0), validate=False)
    m = fit_svr(const, SvrParams(c=100.0, epsilon=0.1))
    assert m.beta.size == 0  # all beta = 0, so no support vectors stored
    assert np.allclose(m.predict(ds.X), 9.0)


def test_fitted_model_feasibility_and_kkt():
    ds = _soil(80, seed=4)
    for c, eps in ((100.0, 0.1), (1000.0, 0.5)):
        m = fit_svr(ds, SvrParams(c=c, epsilon=eps))
        assert m.converged
        assert np.all(np.abs(m.beta) <= c + 1e-12)
        assert abs(m.beta.sum()) <= 1e-6


def test_predictions_beat_mean_on_soil():
    ds = _soil(120, seed=5)
    m = fit_svr(ds, SvrParams(c=1000.0, epsilon=0.5))
    resid = ds.y - m.predict(ds.X)
    assert np.mean(resid ** 2) < 0.5 * np.var(ds.y)


def test_param_validation():
    with pytest.raises(ValueError):
        SvrParams(c=0.0)
    with pytest.raises(ValueError):
        SvrParams(epsilon=-0.1)
    with pytest.raises(ValueError):
        SvrParams(kernel="linear")
    with pytest.raises(ValueError):
        SvrParams(tol=0.0)


def test_determinism():
    ds = _soil(50, seed=6)
    a = fit_svr(ds, SvrParams(c=10.0, epsilon=0.2))
    b = fit_svr(ds, SvrParams(c=10.0, epsilon=0.2))
    assert np.array_equal(a.predict(ds.X), b.predict(ds.X))
