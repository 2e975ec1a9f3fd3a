"""Soil sample records and the column-schema'd dataset container."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

FEATURE_NAMES: tuple[str, ...] = ("G", "S", "FC", "LL", "PI", "MDD", "OMC")
TARGET_NAME = "CBR"
N_FEATURES = len(FEATURE_NAMES)

# G + S + FC is a grain-size mass decomposition and must total 100 percent.
COMPOSITION_TOL = 1.5
# Slack for float dust in the PI <= LL comparison only.
_PI_LL_EPS = 1e-9


class SampleValidationError(ValueError):
    """A soil record violates one of the physical invariants."""


def check_sample(g, s, fc, ll, pi, mdd, omc, cbr=None) -> list[str]:
    """Return the list of invariant violations for one record (empty if valid)."""
    problems: list[str] = []
    named = [("G", g), ("S", s), ("FC", fc), ("LL", ll), ("PI", pi), ("MDD", mdd), ("OMC", omc)]
    if cbr is not None:
        named.append(("CBR", cbr))
    for name, v in named:
        if not math.isfinite(v):
            problems.append(f"{name} is not finite")
    if problems:
        return problems
    for name, v in named:
        if name == "MDD":
            if v <= 0:
                problems.append(f"MDD must be > 0 (got {v})")
        elif v < 0:
            problems.append(f"{name} must be >= 0 (got {v})")
    total = g + s + fc
    if abs(total - 100.0) > COMPOSITION_TOL:
        problems.append(f"G+S+FC must equal 100 within {COMPOSITION_TOL} (got {total})")
    if pi > ll + _PI_LL_EPS:
        problems.append(f"PI <= LL violated (PI={pi}, LL={ll})")
    return problems


@dataclass(frozen=True)
class SoilSample:
    """One soil record: seven index/compaction properties plus optional CBR target.

    Units: G/S/FC/LL/PI/OMC/CBR in percent, MDD in kN/m^3.
    """

    g: float
    s: float
    fc: float
    ll: float
    pi: float
    mdd: float
    omc: float
    cbr: Optional[float] = None

    def __post_init__(self) -> None:
        problems = check_sample(self.g, self.s, self.fc, self.ll, self.pi,
                                self.mdd, self.omc, self.cbr)
        if problems:
            raise SampleValidationError("; ".join(problems))

    def features(self) -> tuple[float, ...]:
        return (self.g, self.s, self.fc, self.ll, self.pi, self.mdd, self.omc)


class Dataset:
    """Ordered collection of soil records with matrix/vector views.

    Row order is stable; the feature matrix column order is FEATURE_NAMES.
    Instances are immutable after construction (the arrays are marked
    read-only), so sharing across threads is safe.
    """

    def __init__(self, X, y=None, validate: bool = True):
        X = np.array(X, dtype=np.float64, copy=True, ndmin=2)
        if X.ndim != 2 or X.shape[1] != N_FEATURES:
            raise ValueError(f"feature matrix must have {N_FEATURES} columns, got shape {X.shape}")
        if y is not None:
            y = np.array(y, dtype=np.float64, copy=True)
            if y.ndim != 1 or y.shape[0] != X.shape[0]:
                raise ValueError("target vector length must match the number of rows")
        if validate:
            for i in range(X.shape[0]):
                problems = check_sample(*X[i], cbr=None if y is None else y[i])
                if problems:
                    raise SampleValidationError(f"row {i}: " + "; ".join(problems))
        X.flags.writeable = False
        if y is not None:
            y.flags.writeable = False
        self._X = X
        self._y = y

    @classmethod
    def from_samples(cls, samples: Sequence[SoilSample]) -> "Dataset":
        if not samples:
            return cls(np.empty((0, N_FEATURES)), None, validate=False)
        targets = [s.cbr for s in samples]
        have = [t is not None for t in targets]
        if any(have) and not all(have):
            raise SampleValidationError("CBR must be present for all rows or none")
        X = np.array([s.features() for s in samples], dtype=np.float64)
        y = np.array(targets, dtype=np.float64) if all(have) else None
        return cls(X, y, validate=False)

    @property
    def X(self) -> np.ndarray:
        return self._X

    @property
    def y(self) -> np.ndarray:
        if self._y is None:
            raise ValueError("dataset has no CBR targets")
        return self._y

    @property
    def has_target(self) -> bool:
        return self._y is not None

    @property
    def n(self) -> int:
        return self._X.shape[0]

    def __len__(self) -> int:
        return self.n

    def samples(self) -> list[SoilSample]:
        out = []
        for i in range(self.n):
            cbr = None if self._y is None else float(self._y[i])
            out.append(SoilSample(*(float(v) for v in self._X[i]), cbr=cbr))
        return out

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        y = None if self._y is None else self._y[indices]
        return Dataset(self._X[indices], y, validate=False)

    def require_fit_ready(self) -> None:
        """Models call this before fitting: non-empty and targets present."""
        if self.n == 0:
            raise ValueError("cannot fit on an empty dataset")
        if self._y is None:
            raise ValueError("cannot fit on a dataset without CBR targets")
