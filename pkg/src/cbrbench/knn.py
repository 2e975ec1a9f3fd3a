"""k-nearest-neighbors regression on standardized features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import Standardizer
from .dataset import Dataset
from .model import FittedModel, register_fit, register_model


@dataclass(frozen=True)
class KnnParams:
    n_neighbors: int = 5
    metric: str = "euclidean"
    weights: str = "uniform"

    def __post_init__(self) -> None:
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.metric not in ("manhattan", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.weights not in ("uniform", "distance"):
            raise ValueError(f"unknown weights {self.weights!r}")


@register_model
class KnnModel(FittedModel):
    family = "knn"

    def __init__(self, X_std: np.ndarray, y: np.ndarray, params: KnnParams,
                 x_std: Standardizer):
        self.X_std = np.asarray(X_std, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.params = params
        self.x_std = x_std

    def _distances(self, Q: np.ndarray) -> np.ndarray:
        diff = Q[:, None, :] - self.X_std[None, :, :]
        if self.params.metric == "manhattan":
            return np.abs(diff).sum(axis=2)
        return np.sqrt((diff * diff).sum(axis=2))

    def _predict(self, X: np.ndarray) -> np.ndarray:
        Q = self.x_std.transform(X)
        k = self.params.n_neighbors
        out = np.empty(Q.shape[0], dtype=np.float64)
        dists = self._distances(Q)
        for q in range(Q.shape[0]):
            d = dists[q]
            # stable sort: ties at the k-th distance go to lower row index
            sel = np.argsort(d, kind="mergesort")[:k]
            dk = d[sel]
            yk = self.y[sel]
            if self.params.weights == "uniform":
                out[q] = yk.mean()
            else:
                zero = dk == 0.0
                if zero.any():
                    out[q] = yk[zero].mean()
                else:
                    w = 1.0 / dk
                    out[q] = float(w @ yk / w.sum())
        return out

    def to_state(self) -> dict[str, Any]:
        return {"X_std": self.X_std.tolist(), "y": self.y.tolist(),
                "n_neighbors": self.params.n_neighbors,
                "metric": self.params.metric, "weights": self.params.weights,
                "x_std": self.x_std.to_state()}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "KnnModel":
        p = KnnParams(n_neighbors=state["n_neighbors"], metric=state["metric"],
                      weights=state["weights"])
        return cls(np.array(state["X_std"], dtype=np.float64),
                   np.array(state["y"], dtype=np.float64), p,
                   Standardizer.from_state(state["x_std"]))


def fit_knn(train: Dataset, p: KnnParams) -> KnnModel:
    train.require_fit_ready()
    if p.n_neighbors > train.n:
        raise ValueError(f"n_neighbors={p.n_neighbors} exceeds training size {train.n}")
    x_std = Standardizer.fit(train.X)
    return KnnModel(x_std.transform(train.X), train.y, p, x_std)


@register_fit("knn")
def _fit_knn(train: Dataset, params: dict, seed: int) -> KnnModel:
    del seed  # memorization only, nothing random
    return fit_knn(train, KnnParams(**params))
