"""Multilayer perceptron regressor trained with mini-batch Adam.

The network itself (MlpNet) is dimension-agnostic so its gradients can be
checked on tiny configurations; the fitted-model wrapper binds it to the
seven-feature schema and standardizes features and target internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .data import Standardizer
from .dataset import Dataset
from .model import FittedModel, register_fit, register_model
from .seeding import rng_from

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class MlpNet:
    """Fully connected net, hidden activations relu/tanh, linear output unit."""

    def __init__(self, layer_sizes: Sequence[int], activation: str,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.activation = activation
        self.weights = weights
        self.biases = biases

    @classmethod
    def init_glorot(cls, layer_sizes: Sequence[int], activation: str,
                    rng: np.random.Generator) -> "MlpNet":
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, activation, weights, biases)

    def _act(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def forward(self, X: np.ndarray) -> np.ndarray:
        a = np.asarray(X, dtype=np.float64)
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if l == last else self._act(z)
        return a[:, 0]

    def loss(self, X, y, alpha: float) -> float:
        err = self.forward(X) - np.asarray(y, dtype=np.float64)
        reg = 0.5 * alpha * sum(float(np.sum(W * W)) for W in self.weights)
        return float(err @ err) / (2.0 * X.shape[0]) + reg

    def loss_and_grad(self, X, y, alpha: float):
        """Batch objective (1/2m) sum (yhat-y)^2 + (alpha/2)||W||^2 and its gradients."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        m = X.shape[0]
        last = len(self.weights) - 1

        acts = [X]
        zs = []
        a = X
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            zs.append(z)
            a = z if l == last else self._act(z)
            acts.append(a)

        err = acts[-1][:, 0] - y
        loss = float(err @ err) / (2.0 * m)
        loss += 0.5 * alpha * sum(float(np.sum(W * W)) for W in self.weights)

        grads_W = [np.empty(0)] * len(self.weights)
        grads_b = [np.empty(0)] * len(self.weights)
        delta = (err / m)[:, None]
        for l in range(last, -1, -1):
            grads_W[l] = acts[l].T @ delta + alpha * self.weights[l]
            grads_b[l] = delta.sum(axis=0)
            if l > 0:
                delta = delta @ self.weights[l].T
                if self.activation == "relu":
                    delta = delta * (zs[l - 1] > 0.0)
                else:
                    delta = delta * (1.0 - np.tanh(zs[l - 1]) ** 2)
        return loss, grads_W, grads_b

    def params_flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights]
                              + [b.ravel() for b in self.biases])


class AdamState:
    """First/second moment accumulators for one list of parameter arrays."""

    def __init__(self, params: Sequence[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState, lr: float = 0.001) -> None:
    """One in-place Adam update with the standard bias corrections."""
    state.t += 1
    c1 = 1.0 - ADAM_BETA1**state.t
    c2 = 1.0 - ADAM_BETA2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


@dataclass(frozen=True)
class MlpParams:
    hidden_layer_sizes: tuple = (100,)
    activation: str = "relu"
    alpha: float = 0.001
    learning_rate: str = "constant"
    learning_rate_init: float = 0.001
    solver: str = "adam"
    max_epochs: int = 1000
    tol: float = 1e-4
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.hidden_layer_sizes) == 0 or any(s < 1 for s in self.hidden_layer_sizes):
            raise ValueError("hidden layer sizes must all be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.learning_rate != "constant":
            raise ValueError("only the 'constant' learning rate schedule is supported")
        if self.solver != "adam":
            raise ValueError("only the 'adam' solver is supported")


@register_model
class MlpModel(FittedModel):
    family = "mlp"

    def __init__(self, net: MlpNet, x_std: Standardizer, y_std: Standardizer):
        self.net = net
        self.x_std = x_std
        self.y_std = y_std

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return self.y_std.inverse_transform(self.net.forward(self.x_std.transform(X)))

    def to_state(self) -> dict[str, Any]:
        return {"layer_sizes": list(self.net.layer_sizes),
                "activation": self.net.activation,
                "weights": [w.tolist() for w in self.net.weights],
                "biases": [b.tolist() for b in self.net.biases],
                "x_std": self.x_std.to_state(), "y_std": self.y_std.to_state()}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "MlpModel":
        net = MlpNet(state["layer_sizes"], state["activation"],
                     [np.array(w, dtype=np.float64) for w in state["weights"]],
                     [np.array(b, dtype=np.float64) for b in state["biases"]])
        return cls(net, Standardizer.from_state(state["x_std"]),
                   Standardizer.from_state(state["y_std"]))


def fit_mlp(train: Dataset, p: MlpParams) -> MlpModel:
    train.require_fit_ready()
    x_std = Standardizer.fit(train.X)
    y_std = Standardizer.fit(train.y)
    X = x_std.transform(train.X)
    y = y_std.transform(train.y)
    n = train.n

    rng = rng_from(p.seed)
    sizes = (X.shape[1],) + tuple(p.hidden_layer_sizes) + (1,)
    net = MlpNet.init_glorot(sizes, p.activation, rng)
    params = net.weights + net.biases
    state = AdamState(params)
    batch = min(200, n)

    best = np.inf
    stall = 0
    for epoch in range(p.max_epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, batch):
            rows = perm[lo:lo + batch]
            _, gW, gb = net.loss_and_grad(X[rows], y[rows], p.alpha)
            adam_step(params, gW + gb, state, p.learning_rate_init)
        epoch_loss = net.loss(X, y, p.alpha)
        if not np.isfinite(epoch_loss):
            raise ArithmeticError(f"training diverged: non-finite loss at epoch {epoch}")
        if epoch_loss < best - p.tol:
            best = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= p.patience:
                break
    return MlpModel(net, x_std, y_std)


@register_fit("mlp")
def _fit_mlp(train: Dataset, params: dict, seed: int) -> MlpModel:
    named = dict(params)
    if "hidden_layer_sizes" in named:
        named["hidden_layer_sizes"] = tuple(named["hidden_layer_sizes"])
    return fit_mlp(train, MlpParams(**named, seed=seed))
