"""Fitted-model base class, the family registries, and model file I/O.

Every regressor in this package is produced by a fit function
(``fit_fn(train, params, rng) -> FittedModel``) and is itself immutable:
hyperparameters in, predictions out, no retained training-time RNG state.
Families register themselves via the two decorators below so the selection
and CLI layers can dispatch by name without importing concrete modules.
"""

from __future__ import annotations

import json
import os
from abc import ABC, abstractmethod
from typing import Any, Callable, ClassVar

import numpy as np

from .dataset import FEATURE_NAMES, N_FEATURES

MODEL_FORMAT = "cbrbench-model"
MODEL_FORMAT_VERSION = 1

# family tag -> model class (for deserialization)
MODEL_REGISTRY: dict[str, type["FittedModel"]] = {}
# family tag -> fit function (for training dispatch)
FIT_REGISTRY: dict[str, Callable[..., "FittedModel"]] = {}


class ModelFormatError(ValueError):
    """A model file is malformed or from an unknown family/version."""


def register_model(cls: type["FittedModel"]) -> type["FittedModel"]:
    tag = cls.family
    if not tag:
        raise ValueError(f"{cls.__name__} has no family tag")
    if tag in MODEL_REGISTRY:
        raise ValueError(f"duplicate model family {tag!r}")
    MODEL_REGISTRY[tag] = cls
    return cls


def register_fit(tag: str):
    def deco(fn):
        if tag in FIT_REGISTRY:
            raise ValueError(f"duplicate fit function for family {tag!r}")
        FIT_REGISTRY[tag] = fn
        return fn
    return deco


def check_feature_matrix(X) -> np.ndarray:
    """Validate and convert a prediction input to a float64 (n, 7) matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == N_FEATURES:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ValueError(f"expected an (n, {N_FEATURES}) feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = int(np.argwhere(~np.isfinite(X).all(axis=1))[0, 0])
        raise ValueError(f"non-finite feature value in row {bad}")
    return X


class FittedModel(ABC):
    """A trained regressor: predicts CBR from the seven-column feature matrix."""

    family: ClassVar[str] = ""

    def predict(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        yhat = self._predict(X)
        return np.asarray(yhat, dtype=np.float64)

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        """Predict on an already-validated float64 (n, 7) matrix."""

    @abstractmethod
    def to_state(self) -> dict[str, Any]:
        """JSON-serializable parameter dict (plain lists/floats/ints/strs)."""

    @classmethod
    @abstractmethod
    def from_state(cls, state: dict[str, Any]) -> "FittedModel":
        """Rebuild a model from :meth:`to_state` output."""


def fit(family: str, train, params: dict[str, Any], seed: int = 0) -> FittedModel:
    """Train one model by family tag with deterministic integer seeding."""
    try:
        fit_fn = FIT_REGISTRY[family]
    except KeyError:
        known = ", ".join(sorted(FIT_REGISTRY))
        raise KeyError(f"unknown model family {family!r}; known: {known}") from None
    return fit_fn(train, params, seed)


def predict(model: FittedModel, X) -> np.ndarray:
    return model.predict(X)


def save_model(model: FittedModel, path: str | os.PathLike) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "family": model.family,
        "schema": list(FEATURE_NAMES),
        "params": model.to_state(),
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> FittedModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"not a JSON model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("missing or wrong format marker")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    if doc.get("schema") != list(FEATURE_NAMES):
        raise ModelFormatError(f"feature schema mismatch: {doc.get('schema')!r}")
    tag = doc.get("family")
    cls = MODEL_REGISTRY.get(tag)
    if cls is None:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ModelFormatError(f"unknown model family {tag!r}; known: {known}")
    params = doc.get("params")
    if not isinstance(params, dict):
        raise ModelFormatError("params block missing")
    return cls.from_state(params)
