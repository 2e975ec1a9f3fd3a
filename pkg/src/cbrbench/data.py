"""CSV ingestion, train/test splitting, standardization, synthetic soil data.

The generator produces a surrogate dataset whose per-feature statistics are
moment-matched to the descriptive statistics the package documents in
README.md, with physically coherent dependencies (grain fractions summing to
100, PI tied below LL, the usual negative MDD-OMC compaction trend).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaincinv, ndtr, ndtri

from .dataset import (
    FEATURE_NAMES,
    N_FEATURES,
    TARGET_NAME,
    Dataset,
    SampleValidationError,
    check_sample,
)

CSV_HEADER_FULL = FEATURE_NAMES + (TARGET_NAME,)


class CsvFormatError(ValueError):
    """A CSV file does not conform to the soil-sample schema."""


# ---------------------------------------------------------------------------
# standardization


class Standardizer:
    """Column-wise z-score scaler using the population standard deviation.

    Constant columns get scale 1 so they transform to exactly 0 and
    invert back to their mean.
    """

    def __init__(self, mean: np.ndarray, scale: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        cols = X.reshape(X.shape[0], -1)
        if cols.shape[0] == 0:
            raise ValueError("cannot fit a standardizer on zero rows")
        mean = cols.mean(axis=0)
        scale = cols.std(axis=0)
        scale[scale == 0.0] = 1.0
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        flat = X.ndim == 1
        cols = X.reshape(X.shape[0], -1)
        out = (cols - self.mean) / self.scale
        return out.reshape(-1) if flat else out

    def inverse_transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        flat = X.ndim == 1
        cols = X.reshape(X.shape[0], -1)
        out = cols * self.scale + self.mean
        return out.reshape(-1) if flat else out

    def to_state(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_state(cls, state: dict) -> "Standardizer":
        return cls(np.array(state["mean"], dtype=np.float64),
                   np.array(state["scale"], dtype=np.float64))


def fit_standardizer(train: Dataset) -> Standardizer:
    return Standardizer.fit(train.X)


# ---------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split policy: fraction, shuffle seed, and redraw behavior.

    ``fixed_split`` is consumed by the benchmark harness: when set, every
    evaluation seed reuses the split drawn from ``seed`` instead of
    redrawing per evaluation seed.
    """

    train_fraction: float = 0.8
    seed: int = 0
    fixed_split: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Shuffle rows by spec.seed and cut train = floor(n * train_fraction).

    The floor-on-train rule sends the remainder to the test side, so 382
    rows at 0.8 give (305, 77) and 10 rows give (8, 2). Both parts keep
    the original row order.
    """
    if not ds.has_target:
        raise ValueError("split requires a dataset with CBR targets")
    n = ds.n
    n_train = int(np.floor(n * spec.train_fraction))
    n_test = n - n_train
    if n_train < 1 or n_test < 1:
        raise ValueError(f"n={n} at fraction {spec.train_fraction} cannot give both parts >= 1 row")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


# ---------------------------------------------------------------------------
# CSV I/O


def _format_value(v: float) -> str:
    # repr round-trips float64 exactly, so invariants survive save/load
    return repr(float(v))


def save_csv(ds: Dataset, path) -> None:
    text = dataset_to_csv(ds)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def dataset_to_csv(ds: Dataset) -> str:
    header = CSV_HEADER_FULL if ds.has_target else FEATURE_NAMES
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(ds.n):
        cells = [_format_value(v) for v in ds.X[i]]
        if ds.has_target:
            cells.append(_format_value(ds.y[i]))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def load_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv(fh)


def _parse_csv(fh: Iterable[str]) -> Dataset:
    reader = csv.reader(fh)
    try:
        raw_header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file: missing header") from None
    header = [c.strip().lstrip("﻿") for c in raw_header]
    if tuple(header) == CSV_HEADER_FULL:
        has_target = True
    elif tuple(header) == FEATURE_NAMES:
        has_target = False
    else:
        expect = set(CSV_HEADER_FULL)
        got = set(header)
        missing = [c for c in CSV_HEADER_FULL if c not in got and c != TARGET_NAME]
        extra = [c for c in header if c not in expect]
        parts = []
        if missing:
            parts.append("missing column(s): " + ", ".join(missing))
        if extra:
            parts.append("unexpected column(s): " + ", ".join(extra))
        if not parts:
            parts.append(f"columns out of order: got {','.join(header)}")
        raise CsvFormatError("bad header: " + "; ".join(parts))

    width = len(CSV_HEADER_FULL) if has_target else N_FEATURES
    rows: list[list[float]] = []
    for rownum, cells in enumerate(reader, start=1):
        if not cells:
            continue
        if len(cells) != width:
            raise CsvFormatError(f"row {rownum}: expected {width} values, got {len(cells)}")
        values = []
        for name, cell in zip(CSV_HEADER_FULL, cells):
            try:
                values.append(float(cell.strip()))
            except ValueError:
                raise CsvFormatError(f"row {rownum}: unparsable {name} value {cell.strip()!r}") from None
        problems = check_sample(*values[:N_FEATURES], cbr=values[N_FEATURES] if has_target else None)
        if problems:
            raise CsvFormatError(f"row {rownum}: " + "; ".join(problems))
        rows.append(values)

    X = np.array([r[:N_FEATURES] for r in rows], dtype=np.float64).reshape(len(rows), N_FEATURES)
    y = np.array([r[N_FEATURES] for r in rows], dtype=np.float64) if has_target else None
    return Dataset(X, y, validate=False)


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int
    seed: int = 0
    noise_sd: float = 4.0

    def __post_init__(self) -> None:
        if self.n_samples < 10:
            raise ValueError(f"n_samples must be >= 10, got {self.n_samples}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


# Calibration targets (means in percent; MDD in kN/m^3).
_COMP_MEANS = np.array([15.03, 30.74, 54.23])
_COMP_CONCENTRATION = 2.5
_COMP_BOUNDS = ((0.0, 82.0), (1.0, 79.3), (3.0, 99.0))
_LL_MEAN, _LL_SD, _LL_LO, _LL_HI = 38.02, 18.27, 0.0, 94.0
_PI_RATIO_LO, _PI_RATIO_HI, _PI_MAX = 0.30, 0.65, 58.0
_MDD_MEAN, _MDD_SD, _MDD_LO, _MDD_HI = 17.12, 2.69, 10.0, 22.52
_OMC_LO, _OMC_HI, _OMC_NOISE_SD = 1.7, 37.0, 3.0


def _stratified_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    """One uniform per length-1/n stratum, shuffled: pins the sample mean."""
    u = (rng.permutation(n) + rng.uniform(0.0, 1.0, n)) / n
    return np.clip(u, 1e-12, 1.0 - 1e-12)


def _truncnorm_ppf(u: np.ndarray, mean: float, sd: float, lo: float, hi: float) -> np.ndarray:
    pa = ndtr((lo - mean) / sd)
    pb = ndtr((hi - mean) / sd)
    x = mean + sd * ndtri(pa + u * (pb - pa))
    return np.clip(x, lo, hi)


def _composition(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, 3) rows of (G, S, FC) in percent, each row summing to exactly 100."""
    shapes = _COMP_CONCENTRATION * _COMP_MEANS / 100.0
    parts = np.empty((n, 3))
    for k in range(3):
        parts[:, k] = gammaincinv(shapes[k], _stratified_uniforms(rng, n))
    totals = parts.sum(axis=1)
    totals[totals < 1e-12] = 1e-12
    comp = 100.0 * parts / totals[:, None]

    lo = np.array([b[0] for b in _COMP_BOUNDS])
    hi = np.array([b[1] for b in _COMP_BOUNDS])
    bad = np.where(((comp < lo) | (comp > hi)).any(axis=1))[0]
    for i in bad:
        for _ in range(1000):
            draw = gammaincinv(shapes, rng.uniform(1e-12, 1.0 - 1e-12, 3))
            total = draw.sum()
            if total < 1e-12:
                continue
            row = 100.0 * draw / total
            if np.all(row >= lo) and np.all(row <= hi):
                comp[i] = row
                break
        else:
            raise RuntimeError("composition repair failed to converge")

    # Force g + s + fc == 100.0 in float arithmetic, not just approximately.
    comp[:, 2] = 100.0 - comp[:, 0] - comp[:, 1]
    for _ in range(16):
        residual = 100.0 - (comp[:, 0] + comp[:, 1] + comp[:, 2])
        if not residual.any():
            break
        comp[:, 2] += residual
    return comp


def generate_synthetic(cfg: GeneratorConfig) -> Dataset:
    """Draw a synthetic soil dataset; deterministic in cfg.

    Recipe: Dirichlet-style grain composition normalized to 100; truncated
    normal LL; PI as a uniform fraction of LL; truncated normal MDD; OMC
    linearly tied to MDD with truncated noise; CBR from a monotone surrogate
    (coarser, denser, drier, less plastic soils score higher) plus noise.
    """
    n = cfg.n_samples
    rng = np.random.default_rng(cfg.seed)

    comp = _composition(rng, n)
    g, s, fc = comp[:, 0], comp[:, 1], comp[:, 2]

    ll = _truncnorm_ppf(_stratified_uniforms(rng, n), _LL_MEAN, _LL_SD, _LL_LO, _LL_HI)
    ratio = _PI_RATIO_LO + (_PI_RATIO_HI - _PI_RATIO_LO) * _stratified_uniforms(rng, n)
    pi = np.minimum(ll * ratio, _PI_MAX)

    mdd = _truncnorm_ppf(_stratified_uniforms(rng, n), _MDD_MEAN, _MDD_SD, _MDD_LO, _MDD_HI)

    omc_base = 46.0 - 1.75 * mdd
    omc = omc_base + rng.normal(0.0, _OMC_NOISE_SD, n)
    for _ in range(100):
        bad = (omc < _OMC_LO) | (omc > _OMC_HI)
        if not bad.any():
            break
        omc[bad] = omc_base[bad] + rng.normal(0.0, _OMC_NOISE_SD, int(bad.sum()))
    omc = np.clip(omc, _OMC_LO, _OMC_HI)

    clean = (2.0 + 0.55 * g + 0.18 * s + 3.0 * np.maximum(mdd - 15.0, 0.0)
             - 0.45 * omc - 0.12 * pi)
    clean = np.clip(clean, 1.0, 100.0)
    cbr = np.clip(clean + rng.normal(0.0, cfg.noise_sd, n), 0.5, 100.0)

    X = np.column_stack([g, s, fc, ll, pi, mdd, omc])
    try:
        return Dataset(X, cbr, validate=True)
    except SampleValidationError as exc:
        raise RuntimeError(f"generator produced an invalid sample: {exc}") from exc
