import numpy as np
import pytest

from cbrbench.metrics import DegenerateTargetError, Metrics, evaluate, mae, r2_score, rmse


def oracle_r2(y, yhat):
    # direct textbook formula, written independently of the package code
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return 1.0 - ss_res / ss_tot


def oracle_mae(y, yhat):
    return float(np.mean(np.abs(np.asarray(y, float) - np.asarray(yhat, float))))


def oracle_rmse(y, yhat):
    d = np.asarray(y, float) - np.asarray(yhat, float)
    return float(np.sqrt(np.mean(d * d)))


def test_perfect_prediction():
    assert r2_score([1, 2, 3], [1, 2, 3]) == 1.0
    assert mae([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0


def test_mean_predictor_r2_zero():
    assert r2_score([1, 2, 3], [2, 2, 2]) == 0.0


def test_zero_variance_target_errors():
    with pytest.raises(DegenerateTargetError):
        r2_score([0, 0, 0, 0], [1, 2, 3, 4])
    with pytest.raises(DegenerateTargetError):
        evaluate([5.0, 5.0], [1.0, 2.0])


def test_length_mismatch_and_empty():
    with pytest.raises(ValueError):
        mae([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        rmse([], [])


def test_against_oracle_1000_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 50))
        y = rng.normal(scale=10, size=n)
        while np.ptp(y) == 0:
            y = rng.normal(scale=10, size=n)
        yhat = y + rng.normal(scale=rng.uniform(0.01, 5), size=n)
        assert abs(r2_score(y, yhat) - oracle_r2(y, yhat)) < 1e-9
        assert abs(mae(y, yhat) - oracle_mae(y, yhat)) < 1e-9
        assert abs(rmse(y, yhat) - oracle_rmse(y, yhat)) < 1e-9
        assert rmse(y, yhat) >= mae(y, yhat) - 1e-12


def test_permutation_invariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        y = rng.normal(size=n)
        yhat = rng.normal(size=n)
        p = rng.permutation(n)
        assert abs(r2_score(y, yhat) - r2_score(y[p], yhat[p])) < 1e-12
        assert abs(mae(y, yhat) - mae(y[p], yhat[p])) < 1e-12
        assert abs(rmse(y, yhat) - rmse(y[p], yhat[p])) < 1e-12


def test_r2_may_be_negative():
    assert r2_score([1.0, 2.0, 3.0], [10.0, -10.0, 10.0]) < 0


def test_evaluate_bundles_all_three():
    y = np.array([1.0, 4.0, 6.0])
    yhat = np.array([2.0, 4.0, 5.0])
    m = evaluate(y, yhat)
    assert isinstance(m, Metrics)
    assert m.r2 == pytest.approx(oracle_r2(y, yhat), abs=1e-12)
    assert m.mae == pytest.approx(2.0 / 3.0)
    assert m.rmse == pytest.approx(np.sqrt(2.0 / 3.0))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        mae([1.0, np.nan], [1.0, 2.0])
    with pytest.raises(ValueError):
        r2_score([1.0, 2.0], [np.inf, 2.0])
