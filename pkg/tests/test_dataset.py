import numpy as np
import pytest

from cbrbench.dataset import (COMPOSITION_TOL, FEATURE_NAMES, Dataset,
                              SampleValidationError, SoilSample, check_sample)

GOOD = dict(g=15.0, s=30.0, fc=55.0, ll=38.0, pi=18.0, mdd=17.1, omc=16.6)


def test_good_sample_no_violations():
    assert check_sample(**GOOD) == []
    assert check_sample(**GOOD, cbr=12.0) == []


def test_soil_sample_roundtrip():
    s = SoilSample(**GOOD, cbr=9.5)
    assert s.features() == (15.0, 30.0, 55.0, 38.0, 18.0, 17.1, 16.6)
    assert s.cbr == 9.5


def test_negative_values_rejected():
    bad = dict(GOOD)
    bad["g"] = -0.1
    assert check_sample(**bad)
    with pytest.raises(SampleValidationError):
        SoilSample(**bad)


def test_mdd_must_be_positive():
    bad = dict(GOOD)
    bad["mdd"] = 0.0
    assert any("MDD" in v for v in check_sample(**bad))


def test_composition_tolerance():
    near = dict(GOOD)
    near["fc"] = 55.0 + COMPOSITION_TOL - 0.01  # sum 101.49, inside tol
    assert check_sample(**near) == []
    far = dict(GOOD)
    far["fc"] = 55.0 + COMPOSITION_TOL + 0.6
    assert any("100" in v for v in check_sample(**far))


def test_pi_cannot_exceed_ll():
    bad = dict(GOOD)
    bad["pi"] = bad["ll"] + 1.0
    assert any("pi" in v.lower() for v in check_sample(**bad))


def test_non_finite_rejected():
    bad = dict(GOOD)
    bad["ll"] = float("nan")
    assert check_sample(**bad)


def test_dataset_immutable_and_sized():
    X = np.array([[15, 30, 55, 38, 18, 17.1, 16.6]], dtype=float)
    ds = Dataset(X, np.array([9.5]))
    assert len(ds) == 1 and ds.n == 1
    assert ds.has_target
    with pytest.raises(ValueError):
        ds.X[0, 0] = 99.0
    with pytest.raises(ValueError):
        ds.y[0] = 1.0


def test_dataset_validates_rows():
    X = np.array([[15, 30, 70, 38, 18, 17.1, 16.6]], dtype=float)  # sums 115
    with pytest.raises(SampleValidationError):
        Dataset(X, np.array([5.0]))
    Dataset(X, np.array([5.0]), validate=False)  # escape hatch for internals


def test_dataset_subset_keeps_rows():
    rng = np.random.default_rng(1)
    comp = np.array([15.0, 30.0, 55.0])
    X = np.tile(np.array([*comp, 38, 18, 17.1, 16.6]), (6, 1))
    X[:, 3] += rng.uniform(0, 5, 6)
    ds = Dataset(X, np.arange(6, dtype=float))
    sub = ds.subset(np.array([4, 1]))
    assert sub.n == 2
    assert np.array_equal(sub.y, np.array([4.0, 1.0]))
    assert np.array_equal(sub.X[0], ds.X[4])


def test_from_samples_uniform_target_presence():
    a = SoilSample(**GOOD, cbr=5.0)
    b = SoilSample(**GOOD)
    with pytest.raises(ValueError):
        Dataset.from_samples([a, b])
    ds = Dataset.from_samples([a, a])
    assert ds.has_target and ds.n == 2


def test_feature_names_fixed_order():
    assert FEATURE_NAMES == ("G", "S", "FC", "LL", "PI", "MDD", "OMC")
