"""Regression evaluation metrics: R^2, MAE, RMSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateTargetError(ValueError):
    """The metric is undefined for the given target vector."""


@dataclass(frozen=True)
class Metrics:
    """One (R^2, MAE, RMSE) triple for a single evaluation phase.

    MAE and RMSE are in raw CBR percent units; R^2 is dimensionless and
    may be negative for models worse than the mean predictor.
    """

    r2: float
    mae: float
    rmse: float


def _checked(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or yhat.ndim != 1:
        raise ValueError("metric inputs must be 1-d vectors")
    if y.size != yhat.size:
        raise ValueError(f"length mismatch: y has {y.size} entries, yhat has {yhat.size}")
    if y.size == 0:
        raise ValueError("metric inputs must be non-empty")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise ValueError("metric inputs must be finite")
    return y, yhat


def r2_score(y, yhat) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot.

    Raises DegenerateTargetError when y has zero variance (SS_tot = 0),
    instead of dividing by zero.
    """
    y, yhat = _checked(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 0.0:
        raise DegenerateTargetError("target vector has zero variance, R^2 undefined")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def mae(y, yhat) -> float:
    """Mean absolute error."""
    y, yhat = _checked(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    """Root mean square error."""
    y, yhat = _checked(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def evaluate(y, yhat) -> Metrics:
    """All three metrics for one (actual, predicted) pair of vectors."""
    return Metrics(r2=r2_score(y, yhat), mae=mae(y, yhat), rmse=rmse(y, yhat))
