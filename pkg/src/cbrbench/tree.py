"""CART regression trees: the standalone model and every ensemble's base learner.

The builder is one compiled kernel covering both split styles ('best'
exhaustive midpoints, 'random-threshold' for extra-trees) and both scoring
rules (SSE reduction for CART, second-order gain with L2/min-gain
regularization for regularized boosting). Trees are flat parallel arrays,
cheap to serialize and to evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Optional, Union

import numba as nb
import numpy as np

from .dataset import Dataset, N_FEATURES
from .model import FittedModel, register_fit, register_model

STYLE_BEST = 0
STYLE_RANDOM_THRESHOLD = 1
CRIT_SSE = 0
CRIT_GAIN2 = 1

_U64 = np.uint64


@nb.njit(cache=True)
def _next_u64(state):
    # splitmix64: state is a length-1 uint64 array
    state[0] = state[0] + _U64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@nb.njit(cache=True)
def _next_unit(state):
    # float64 in [0, 1)
    return (_next_u64(state) >> _U64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _draw_features(state, feats, d, mf):
    """Fill feats[:mf] with distinct feature indices in ascending order."""
    for i in range(d):
        feats[i] = i
    if mf >= d:
        return d
    for i in range(mf):
        j = i + int(_next_unit(state) * (d - i))
        if j > d - 1:
            j = d - 1
        tmp = feats[i]
        feats[i] = feats[j]
        feats[j] = tmp
    # ascending order so the lowest-feature-index tie rule applies
    for i in range(1, mf):
        key = feats[i]
        j = i - 1
        while j >= 0 and feats[j] > key:
            feats[j + 1] = feats[j]
            j -= 1
        feats[j + 1] = key
    return mf


@nb.njit(cache=True)
def _build(X, val, max_depth, min_split, min_leaf, max_features, style,
           crit, lam, gamma, seed):
    n, d = X.shape
    cap = 2 * n + 2
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.float64)
    count = np.zeros(cap, np.int64)

    idx = np.arange(n)
    tmp = np.empty(n, np.int64)
    xs = np.empty(n, np.float64)
    vs = np.empty(n, np.float64)
    feats = np.empty(d, np.int64)
    state = np.empty(1, np.uint64)
    state[0] = seed

    # stack rows: node, start, end, depth
    stack = np.empty((cap, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        tot = 0.0
        for t in range(start, end):
            tot += val[idx[t]]
        count[node] = m
        if crit == CRIT_GAIN2:
            value[node] = -tot / (m + lam)
        else:
            value[node] = tot / m

        if m < min_split or m < 2 * min_leaf or depth >= max_depth:
            continue
        if crit == CRIT_SSE:
            vmin = val[idx[start]]
            vmax = vmin
            for t in range(start + 1, end):
                v = val[idx[t]]
                if v < vmin:
                    vmin = v
                elif v > vmax:
                    vmax = v
            if vmin == vmax:
                continue

        # acceptance bar: strictly beating it means positive SSE reduction
        # (lam = gamma = 0) or positive regularized gain
        bar = tot * tot / (m + lam) + 2.0 * gamma
        best_score = bar
        best_f = -1
        best_thr = 0.0

        nf = _draw_features(state, feats, d, max_features)
        for fi in range(nf):
            f = feats[fi]
            if style == STYLE_BEST:
                for t in range(m):
                    row = idx[start + t]
                    xs[t] = X[row, f]
                    vs[t] = val[row]
                order = np.argsort(xs[:m], kind="mergesort")
                sl = 0.0
                nl = 0
                for o in range(m - 1):
                    sl += vs[order[o]]
                    nl += 1
                    xa = xs[order[o]]
                    xb = xs[order[o + 1]]
                    if xa == xb:
                        continue
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    sr = tot - sl
                    score = sl * sl / (nl + lam) + sr * sr / (m - nl + lam)
                    if score > best_score:
                        cand = 0.5 * (xa + xb)
                        if cand >= xb:
                            cand = xa
                        best_score = score
                        best_f = f
                        best_thr = cand
            else:
                lo = X[idx[start], f]
                hi = lo
                for t in range(start + 1, end):
                    x = X[idx[t], f]
                    if x < lo:
                        lo = x
                    elif x > hi:
                        hi = x
                if lo == hi:
                    continue
                cand = lo + _next_unit(state) * (hi - lo)
                if cand >= hi:
                    cand = lo
                sl = 0.0
                nl = 0
                for t in range(start, end):
                    row = idx[t]
                    if X[row, f] <= cand:
                        sl += val[row]
                        nl += 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                sr = tot - sl
                score = sl * sl / (nl + lam) + sr * sr / (m - nl + lam)
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = cand

        if best_f < 0:
            continue

        # stable partition on x <= thr keeps row order deterministic
        k = 0
        for t in range(start, end):
            if X[idx[t], best_f] <= best_thr:
                tmp[k] = idx[t]
                k += 1
        nl = k
        for t in range(start, end):
            if not X[idx[t], best_f] <= best_thr:
                tmp[k] = idx[t]
                k += 1
        for t in range(m):
            idx[start + t] = tmp[t]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_thr
        left[node] = lid
        right[node] = rid
        # push right first so the left child is processed next (preorder)
        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@nb.njit(cache=True)
def _apply(feat, thr, left, right, value, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


class Tree:
    """Flat-array binary regression tree. feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "count")

    def __init__(self, feature, threshold, left, right, value, count):
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.count = np.ascontiguousarray(count, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty(X.shape[0], dtype=np.float64)
        _apply(self.feature, self.threshold, self.left, self.right, self.value, X, out)
        return out

    def to_state(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "Tree":
        return cls(state["feature"], state["threshold"], state["left"],
                   state["right"], state["value"], state["count"])


def resolve_max_features(max_features: Union[int, str, None], d: int) -> int:
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return int(math.ceil(math.sqrt(d)))
    mf = int(max_features)
    if not (1 <= mf <= d):
        raise ValueError(f"max_features must be in [1, {d}], got {max_features!r}")
    return mf


def build_tree(X, val, *, max_depth=None, min_samples_split=2, min_samples_leaf=1,
               max_features=None, split_style="best", crit=CRIT_SSE,
               lam=0.0, gamma=0.0, seed=0) -> Tree:
    """Grow one tree on raw arrays. val is the target (CART) or gradient (gain mode)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    val = np.ascontiguousarray(val, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on zero rows")
    if min_samples_split < 2:
        raise ValueError("min_samples_split must be >= 2")
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    if lam < 0 or gamma < 0:
        raise ValueError("lambda and gamma must be >= 0")
    depth_cap = np.int64(2**62) if max_depth is None else np.int64(max_depth)
    if depth_cap < 0:
        raise ValueError("max_depth must be >= 0")
    style = {"best": STYLE_BEST, "random-threshold": STYLE_RANDOM_THRESHOLD}[split_style]
    mf = resolve_max_features(max_features, d)
    arrays = _build(X, val, depth_cap, np.int64(min_samples_split),
                    np.int64(min_samples_leaf), np.int64(mf), np.int64(style),
                    np.int64(crit), float(lam), float(gamma),
                    np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    return Tree(*arrays)


@dataclass(frozen=True)
class TreeParams:
    """Growth limits and split policy for one CART tree."""

    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: Union[int, str, None] = None
    split_style: str = "best"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.split_style not in ("best", "random-threshold"):
            raise ValueError(f"unknown split_style {self.split_style!r}")
        if isinstance(self.max_features, str):
            if self.max_features not in ("sqrt", "all"):
                raise ValueError(f"unknown max_features {self.max_features!r}")
        elif self.max_features is not None and not (1 <= int(self.max_features) <= N_FEATURES):
            raise ValueError(f"max_features must be in [1, {N_FEATURES}]")


def grow_cart(X, y, p: TreeParams) -> Tree:
    return build_tree(X, y, max_depth=p.max_depth,
                      min_samples_split=p.min_samples_split,
                      min_samples_leaf=p.min_samples_leaf,
                      max_features=p.max_features, split_style=p.split_style,
                      crit=CRIT_SSE, seed=p.seed)


@register_model
class RegressionTree(FittedModel):
    """A single CART fit to CBR targets."""

    family = "decision_tree"

    def __init__(self, tree: Tree):
        self.tree = tree

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)

    def to_state(self) -> dict[str, Any]:
        return {"tree": self.tree.to_state()}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "RegressionTree":
        return cls(Tree.from_state(state["tree"]))


def fit_tree(train: Dataset, p: TreeParams) -> RegressionTree:
    train.require_fit_ready()
    return RegressionTree(grow_cart(train.X, train.y, p))


@register_fit("decision_tree")
def _fit_decision_tree(train: Dataset, params: dict, seed: int) -> RegressionTree:
    return fit_tree(train, TreeParams(**params, seed=seed))
