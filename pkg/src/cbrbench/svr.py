"""Epsilon-tube support vector regression with an RBF kernel.

The dual is solved in beta space (beta_i = alpha_i - alpha_i*), where the
problem is min 0.5 b'Kb - y'b + eps*sum|b| subject to sum(b) = 0 and
b in [-C, C]. A maximal-violating-pair loop with an exact piecewise-quadratic
line search handles the |b| kinks. Features and target are standardized
internally; predictions are mapped back to CBR units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numba as nb
import numpy as np

from .data import Standardizer
from .dataset import Dataset
from .model import FittedModel, register_fit, register_model


@nb.njit(cache=True)
def _solve_smo(K, y, C, eps, tol, max_updates):
    n = y.shape[0]
    beta = np.zeros(n)
    F = -y.copy()  # F_i = (K beta)_i - y_i
    updates = 0
    while updates < max_updates:
        m_val = np.inf
        M_val = -np.inf
        mi = -1
        for t in range(n):
            bt = beta[t]
            Ft = F[t]
            if bt < C:
                dp = Ft + eps if bt >= 0.0 else Ft - eps
                if dp < m_val:
                    m_val = dp
                    mi = t
            if bt > -C:
                dm = Ft + eps if bt > 0.0 else Ft - eps
                if dm > M_val:
                    M_val = dm
        if mi < 0 or m_val >= M_val - tol:
            break

        # second-order partner: among ascent-capable t with Dm_t > Dp_i, take
        # the largest decrease estimate (Dm_t - Dp_i)^2 / (2 eta)
        i = mi
        mj = -1
        best_gain = 0.0
        Kii = K[i, i]
        for t in range(n):
            bt = beta[t]
            if bt <= -C:
                continue
            dm = F[t] + eps if bt > 0.0 else F[t] - eps
            diff = dm - m_val
            if diff <= 0.0:
                continue
            eta_t = Kii + K[t, t] - 2.0 * K[i, t]
            if eta_t < 1e-12:
                eta_t = 1e-12
            gain = diff * diff / eta_t
            if gain > best_gain:
                best_gain = gain
                mj = t
        if mj < 0:
            break

        j = mj
        bi = beta[i]
        bj = beta[j]
        t_box = C - bi
        if bj + C < t_box:
            t_box = bj + C
        eta = Kii + K[j, j] - 2.0 * K[i, j]

        # |beta| kinks along beta_i + t and beta_j - t, ascending
        p1 = -bi if bi < 0.0 else np.inf
        p2 = bj if bj > 0.0 else np.inf
        if p2 < p1:
            p1, p2 = p2, p1

        dm_j = F[j] + eps if bj > 0.0 else F[j] - eps
        s = m_val - dm_j  # directional derivative at t = 0, negative here
        t_cur = 0.0
        step = -1.0
        for b_idx in range(2):
            bp = p1 if b_idx == 0 else p2
            if bp >= t_box:
                break
            seg_len = bp - t_cur
            if seg_len > 0.0:
                if eta > 0.0 and -s / eta <= seg_len:
                    step = t_cur - s / eta
                    break
                s += eta * seg_len
                t_cur = bp
            s += 2.0 * eps
            if s >= 0.0:
                step = t_cur
                break
        if step < 0.0:
            seg_len = t_box - t_cur
            if eta > 0.0 and -s / eta < seg_len:
                step = t_cur - s / eta
            else:
                step = t_box

        if step <= 0.0:
            break
        beta[i] = bi + step
        beta[j] = bj - step
        for t in range(n):
            F[t] += step * (K[i, t] - K[j, t])
        updates += 1

    # final derivative bounds give the bias
    m_val = np.inf
    M_val = -np.inf
    for t in range(n):
        bt = beta[t]
        Ft = F[t]
        if bt < C:
            dp = Ft + eps if bt >= 0.0 else Ft - eps
            if dp < m_val:
                m_val = dp
        if bt > -C:
            dm = Ft + eps if bt > 0.0 else Ft - eps
            if dm > M_val:
                M_val = dm
    b = -0.5 * (m_val + M_val)
    converged = m_val >= M_val - tol
    return beta, b, converged, updates


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * (A @ B.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def default_gamma(X_std: np.ndarray) -> float:
    """Variance-scaled RBF bandwidth: 1 / (d * Var of the standardized matrix)."""
    v = float(X_std.var())
    d = X_std.shape[1]
    return 1.0 / (d * v) if v > 0 else 1.0 / d


def dual_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray, eps: float) -> float:
    return float(0.5 * beta @ K @ beta - y @ beta + eps * np.sum(np.abs(beta)))


def kkt_max_violation(K, y, beta, b, C, eps, bound_tol_frac=1e-8) -> float:
    """Largest epsilon-KKT violation over all training samples."""
    E = K @ beta - y + b
    atol = bound_tol_frac * C
    worst = 0.0
    for i in range(len(beta)):
        bi = beta[i]
        if bi >= C - atol:
            v = max(0.0, E[i] + eps)
        elif bi <= -C + atol:
            v = max(0.0, eps - E[i])
        elif abs(bi) <= atol:
            v = max(0.0, abs(E[i]) - eps)
        elif bi > 0:
            v = abs(E[i] + eps)
        else:
            v = abs(E[i] - eps)
        worst = max(worst, v)
    return worst


@dataclass(frozen=True)
class SvrParams:
    c: float = 1.0
    epsilon: float = 0.1
    kernel: str = "rbf"
    tol: float = 1e-3
    max_passes: Optional[int] = None  # default 10n; one pass = n pair updates

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("C must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kernel != "rbf":
            raise ValueError(f"unsupported kernel {self.kernel!r}")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


@register_model
class SvrModel(FittedModel):
    family = "svr"

    def __init__(self, support: np.ndarray, beta: np.ndarray, b: float, gamma: float,
                 x_std: Standardizer, y_std: Standardizer, converged: bool = True):
        self.support = np.asarray(support, dtype=np.float64)
        self.beta = np.asarray(beta, dtype=np.float64)
        self.b = float(b)
        self.gamma = float(gamma)
        self.x_std = x_std
        self.y_std = y_std
        self.converged = bool(converged)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        Xs = self.x_std.transform(X)
        if self.support.shape[0] == 0:
            f = np.full(X.shape[0], self.b)
        else:
            f = rbf_kernel(Xs, self.support, self.gamma) @ self.beta + self.b
        return self.y_std.inverse_transform(f)

    def to_state(self) -> dict[str, Any]:
        return {"support": self.support.tolist(), "beta": self.beta.tolist(),
                "b": self.b, "gamma": self.gamma,
                "x_std": self.x_std.to_state(), "y_std": self.y_std.to_state(),
                "converged": self.converged}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "SvrModel":
        return cls(np.array(state["support"], dtype=np.float64).reshape(-1, len(state["x_std"]["mean"])),
                   np.array(state["beta"], dtype=np.float64), state["b"], state["gamma"],
                   Standardizer.from_state(state["x_std"]),
                   Standardizer.from_state(state["y_std"]), state["converged"])


def fit_svr(train: Dataset, p: SvrParams) -> SvrModel:
    train.require_fit_ready()
    x_std = Standardizer.fit(train.X)
    y_std = Standardizer.fit(train.y)
    Xs = x_std.transform(train.X)
    ys = y_std.transform(train.y)
    gamma = default_gamma(Xs)
    K = rbf_kernel(Xs, Xs, gamma)
    n = train.n
    passes = 10 * n if p.max_passes is None else p.max_passes
    beta, b, converged, _ = _solve_smo(
        np.ascontiguousarray(K), np.ascontiguousarray(ys),
        float(p.c), float(p.epsilon), float(p.tol), np.int64(passes) * n)
    sv = beta != 0.0
    return SvrModel(Xs[sv], beta[sv], b, gamma, x_std, y_std, converged)


@register_fit("svr")
def _fit_svr(train: Dataset, params: dict, seed: int) -> SvrModel:
    del seed  # deterministic solver, no randomness to seed
    named = dict(params)
    if "C" in named:
        named["c"] = named.pop("C")
    return fit_svr(train, SvrParams(**named))
