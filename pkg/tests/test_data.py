import numpy as np
import pytest

from cbrbench.data import (CSV_HEADER_FULL, CsvFormatError, GeneratorConfig,
                           SplitSpec, Standardizer, dataset_to_csv,
                           fit_standardizer, generate_synthetic, load_csv,
                           save_csv, split)
from cbrbench.dataset import FEATURE_NAMES, Dataset

TRAIN_MEANS = {"G": 15.03, "S": 30.74, "FC": 54.23, "LL": 38.02, "PI": 18.54,
               "MDD": 17.12, "OMC": 16.61}
TRAIN_BOUNDS = {"G": (0, 82), "S": (1, 79.3), "FC": (3, 99), "LL": (0, 94),
                "PI": (0, 58), "MDD": (10, 22.52), "OMC": (1.7, 37)}


# ---- standardizer

def test_standardizer_population_sd():
    s = Standardizer.fit(np.array([0.0, 2.0]))
    out = s.transform(np.array([0.0, 2.0]))
    assert np.allclose(out, [-1.0, 1.0])  # population sd, not sample sd


def test_standardizer_roundtrip_2d():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.normal(scale=rng.uniform(0.1, 50), size=(int(rng.integers(2, 40)), 5))
        s = Standardizer.fit(X)
        Z = s.transform(X)
        assert np.allclose(Z.mean(axis=0), 0, atol=1e-10)
        assert np.allclose(Z.std(axis=0), 1, atol=1e-10)
        assert np.allclose(s.inverse_transform(Z), X, atol=1e-9)


def test_standardizer_constant_column():
    X = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
    s = Standardizer.fit(X)
    Z = s.transform(X)
    assert np.allclose(Z[:, 0], 0.0)  # scale 1 guard, no division blowup
    assert np.allclose(s.inverse_transform(Z), X)


def test_standardizer_rejects_empty():
    with pytest.raises(ValueError):
        Standardizer.fit(np.empty((0, 3)))


# ---- split

def _synth(n, seed=0):
    return generate_synthetic(GeneratorConfig(n_samples=n, seed=seed))


def test_split_sizes_382():
    tr, te = split(_synth(382), SplitSpec())
    assert (tr.n, te.n) == (305, 77)


def test_split_sizes_10():
    tr, te = split(_synth(10), SplitSpec())
    assert (tr.n, te.n) == (8, 2)


def test_split_partition_property():
    rng = np.random.default_rng(11)
    ds = _synth(40, seed=2)
    for _ in range(200):
        frac = float(rng.uniform(0.05, 0.95))
        seed = int(rng.integers(0, 10000))
        tr, te = split(ds, SplitSpec(train_fraction=frac, seed=seed))
        assert tr.n == int(np.floor(40 * frac))
        assert tr.n + te.n == 40
        joined = np.sort(np.concatenate([tr.y, te.y]))
        assert np.array_equal(joined, np.sort(ds.y))


def test_split_deterministic_and_order_preserving():
    base = _synth(30, seed=5)
    ds = Dataset(base.X, np.arange(30, dtype=float), validate=False)  # unique y
    a = split(ds, SplitSpec(seed=9))
    b = split(ds, SplitSpec(seed=9))
    assert np.array_equal(a[0].X, b[0].X) and np.array_equal(a[1].y, b[1].y)
    # rows keep the original dataset ordering inside each part
    assert list(a[0].y) == sorted(a[0].y)
    assert list(a[1].y) == sorted(a[1].y)


def test_split_needs_both_parts():
    ds = _synth(10)
    with pytest.raises(ValueError):
        split(ds, SplitSpec(train_fraction=0.05))  # train would be empty


# ---- CSV round trip

def test_csv_roundtrip_bit_exact(tmp_path):
    ds = _synth(50, seed=3)
    p = tmp_path / "d.csv"
    save_csv(ds, p)
    again = load_csv(p)
    assert np.array_equal(again.X, ds.X)
    assert np.array_equal(again.y, ds.y)
    save_csv(again, tmp_path / "d2.csv")
    assert (tmp_path / "d.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()


def test_csv_without_target(tmp_path):
    ds = _synth(12, seed=1)
    bare = Dataset(ds.X, validate=False)
    p = tmp_path / "features.csv"
    save_csv(bare, p)
    text = p.read_text()
    assert text.splitlines()[0] == ",".join(FEATURE_NAMES)
    back = load_csv(p)
    assert not back.has_target and back.n == 12


def test_csv_header_only_is_empty_dataset(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text(",".join(CSV_HEADER_FULL) + "\n")
    ds = load_csv(p)
    assert ds.n == 0 and ds.has_target


def test_csv_missing_column_named(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("G,S,FC,LL,PI,MDD\n")
    with pytest.raises(CsvFormatError, match="OMC"):
        load_csv(p)


def test_csv_bad_cell_named(tmp_path):
    p = tmp_path / "b.csv"
    row = "15.0,30.0,55.0,38.0,abc,17.1,16.6,9.0"
    p.write_text(",".join(CSV_HEADER_FULL) + "\n" + row + "\n")
    with pytest.raises(CsvFormatError, match="PI"):
        load_csv(p)


def test_csv_row_width_checked(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text(",".join(CSV_HEADER_FULL) + "\n1,2,3\n")
    with pytest.raises(CsvFormatError):
        load_csv(p)


def test_csv_invalid_sample_reported_with_row(tmp_path):
    p = tmp_path / "v.csv"
    row = "15.0,30.0,80.0,38.0,18.0,17.1,16.6,9.0"  # composition sums 125
    p.write_text(",".join(CSV_HEADER_FULL) + "\n" + row + "\n")
    with pytest.raises(CsvFormatError, match="row 1"):
        load_csv(p)


# ---- generator calibration

def test_generator_minimum_n():
    with pytest.raises(ValueError):
        GeneratorConfig(n_samples=5)


def test_generator_determinism():
    a = generate_synthetic(GeneratorConfig(120, seed=17))
    b = generate_synthetic(GeneratorConfig(120, seed=17))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c = generate_synthetic(GeneratorConfig(120, seed=18))
    assert not np.array_equal(a.X, c.X)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4, 41, 97])
def test_generator_calibration_n305(seed):
    ds = generate_synthetic(GeneratorConfig(305, seed=seed))
    for j, name in enumerate(FEATURE_NAMES):
        col = ds.X[:, j]
        target = TRAIN_MEANS[name]
        tol = max(0.15 * target, 2.0)
        assert abs(col.mean() - target) <= tol, (name, col.mean())
        lo, hi = TRAIN_BOUNDS[name]
        assert col.min() >= lo - 1e-9 and col.max() <= hi + 1e-9, name
    assert ds.y.min() > 0  # CBR strictly positive


def test_generator_composition_exact_sum():
    ds = generate_synthetic(GeneratorConfig(305, seed=8))
    sums = ds.X[:, 0] + ds.X[:, 1] + ds.X[:, 2]
    assert np.all(sums == 100.0)  # exact by construction, not just within tol


def test_generator_pi_le_ll():
    ds = generate_synthetic(GeneratorConfig(305, seed=23))
    assert np.all(ds.X[:, 4] <= ds.X[:, 3] + 1e-9)


def test_generated_passes_save_load_validation(tmp_path):
    ds = generate_synthetic(GeneratorConfig(64, seed=6))
    p = tmp_path / "g.csv"
    save_csv(ds, p)
    load_csv(p)  # would raise if any invariant failed validation


def test_dataset_to_csv_ends_with_newline():
    ds = _synth(10)
    assert dataset_to_csv(ds).endswith("\n")
