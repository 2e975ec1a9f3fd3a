"""Tree ensembles and model composition: forests, boosting, voting, stacking.

Every family derives per-estimator seeds from the fit seed by estimator
index, so serial and parallel executions consume identical streams and
refits are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .dataset import Dataset, N_FEATURES
from .model import MODEL_REGISTRY, FittedModel, fit as fit_family
from .model import register_fit, register_model
from .seeding import child_seed, rng_from, stable_seed
from .tree import CRIT_GAIN2, CRIT_SSE, Tree, build_tree

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def _trees_state(trees: Sequence[Tree]) -> list[dict]:
    return [t.to_state() for t in trees]


def _trees_from_state(states: Sequence[dict]) -> list[Tree]:
    return [Tree.from_state(s) for s in states]


def _mean_tree_predict(trees: Sequence[Tree], X: np.ndarray) -> np.ndarray:
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for t in trees:
        acc += t.predict(X)
    return acc / len(trees)


def _estimator_rng(seed: int, index: int) -> np.random.Generator:
    return rng_from(child_seed(seed, index))


def _kernel_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))


# ---------------------------------------------------------------------------
# random forest


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: Union[int, str, None] = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


@register_model
class RandomForestModel(FittedModel):
    family = "random_forest"

    def __init__(self, trees: list[Tree]):
        self.trees = trees

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return _mean_tree_predict(self.trees, X)

    def to_state(self) -> dict[str, Any]:
        return {"trees": _trees_state(self.trees)}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "RandomForestModel":
        return cls(_trees_from_state(state["trees"]))


def fit_random_forest(train: Dataset, p: ForestParams) -> RandomForestModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    n = train.n
    trees = []
    for i in range(p.n_estimators):
        rng = _estimator_rng(p.seed, i)
        rows = rng.integers(0, n, n) if p.bootstrap else np.arange(n)
        kseed = _kernel_seed(rng)
        trees.append(build_tree(
            X[rows], y[rows], max_depth=p.max_depth,
            min_samples_split=p.min_samples_split,
            min_samples_leaf=p.min_samples_leaf,
            max_features=p.max_features, split_style="best",
            crit=CRIT_SSE, seed=kseed))
    return RandomForestModel(trees)


@register_fit("random_forest")
def _fit_rf(train: Dataset, params: dict, seed: int) -> RandomForestModel:
    return fit_random_forest(train, ForestParams(**params, seed=seed))


# ---------------------------------------------------------------------------
# extra trees


@register_model
class ExtraTreesModel(RandomForestModel):
    family = "extra_trees"


def fit_extra_trees(train: Dataset, p: ForestParams) -> ExtraTreesModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    trees = []
    for i in range(p.n_estimators):
        rng = _estimator_rng(p.seed, i)
        kseed = _kernel_seed(rng)
        trees.append(build_tree(
            X, y, max_depth=p.max_depth,
            min_samples_split=p.min_samples_split,
            min_samples_leaf=p.min_samples_leaf,
            max_features=p.max_features, split_style="random-threshold",
            crit=CRIT_SSE, seed=kseed))
    return ExtraTreesModel(trees)


@register_fit("extra_trees")
def _fit_et(train: Dataset, params: dict, seed: int) -> ExtraTreesModel:
    p = ForestParams(bootstrap=False, max_features=None, seed=seed, **params)
    return fit_extra_trees(train, p)


# ---------------------------------------------------------------------------
# bagging


@dataclass(frozen=True)
class BaggingParams:
    n_estimators: int = 10
    max_samples: float = 1.0
    max_features: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        for name in ("max_samples", "max_features"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {v}")


@register_model
class BaggingModel(FittedModel):
    family = "bagging"

    def __init__(self, trees: list[Tree], feature_subsets: list[np.ndarray]):
        self.trees = trees
        self.feature_subsets = [np.asarray(s, dtype=np.int64) for s in feature_subsets]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for t, cols in zip(self.trees, self.feature_subsets):
            acc += t.predict(X[:, cols])
        return acc / len(self.trees)

    def to_state(self) -> dict[str, Any]:
        return {"trees": _trees_state(self.trees),
                "feature_subsets": [s.tolist() for s in self.feature_subsets]}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "BaggingModel":
        return cls(_trees_from_state(state["trees"]),
                   [np.array(s, dtype=np.int64) for s in state["feature_subsets"]])


def fit_bagging(train: Dataset, p: BaggingParams) -> BaggingModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    n, d = X.shape
    n_draw = max(1, int(math.floor(p.max_samples * n)))
    n_cols = max(1, int(math.floor(p.max_features * d)))
    trees, subsets = [], []
    for i in range(p.n_estimators):
        rng = _estimator_rng(p.seed, i)
        rows = rng.integers(0, n, n_draw)
        cols = np.sort(rng.choice(d, size=n_cols, replace=False))
        kseed = _kernel_seed(rng)
        trees.append(build_tree(X[rows][:, cols], y[rows], crit=CRIT_SSE, seed=kseed))
        subsets.append(cols)
    return BaggingModel(trees, subsets)


@register_fit("bagging")
def _fit_bagging(train: Dataset, params: dict, seed: int) -> BaggingModel:
    return fit_bagging(train, BaggingParams(**params, seed=seed))


# ---------------------------------------------------------------------------
# gradient boosting


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 < self.subsample <= 1.0):
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")


def _subsample_rows(rng: np.random.Generator, n: int, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n)
    k = max(1, int(math.floor(fraction * n)))
    return np.sort(rng.permutation(n)[:k])


@register_model
class GradientBoostingModel(FittedModel):
    family = "gradient_boosting"

    def __init__(self, base_score: float, learning_rate: float, trees: list[Tree]):
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.trees = trees

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def to_state(self) -> dict[str, Any]:
        return {"base_score": self.base_score, "learning_rate": self.learning_rate,
                "trees": _trees_state(self.trees)}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "GradientBoostingModel":
        return cls(state["base_score"], state["learning_rate"],
                   _trees_from_state(state["trees"]))

    def staged_train_mse(self, X, y) -> list[float]:
        """Training MSE after each stage, base score included as stage 0."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        mses = [float(np.mean((y - out) ** 2))]
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
            mses.append(float(np.mean((y - out) ** 2)))
        return mses


def fit_gradient_boosting(train: Dataset, p: BoostParams) -> GradientBoostingModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    n = train.n
    base = float(np.mean(y))
    current = np.full(n, base, dtype=np.float64)
    trees = []
    for m in range(p.n_estimators):
        rng = _estimator_rng(p.seed, m)
        rows = _subsample_rows(rng, n, p.subsample)
        kseed = _kernel_seed(rng)
        residual = y - current
        t = build_tree(X[rows], residual[rows], max_depth=p.max_depth,
                       crit=CRIT_SSE, seed=kseed)
        current += p.learning_rate * t.predict(X)
        trees.append(t)
    return GradientBoostingModel(base, p.learning_rate, trees)


@register_fit("gradient_boosting")
def _fit_gb(train: Dataset, params: dict, seed: int) -> GradientBoostingModel:
    return fit_gradient_boosting(train, BoostParams(**params, seed=seed))


# ---------------------------------------------------------------------------
# regularized second-order boosting


@dataclass(frozen=True)
class RegBoostParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    subsample: float = 1.0
    gamma: float = 0.0
    colsample_bytree: float = 1.0
    lam: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 < self.subsample <= 1.0):
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        if not (0.0 < self.colsample_bytree <= 1.0):
            raise ValueError(f"colsample_bytree must be in (0, 1], got {self.colsample_bytree}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


@register_model
class RegBoostingModel(FittedModel):
    family = "reg_boosting"

    def __init__(self, base_score: float, learning_rate: float,
                 trees: list[Tree], feature_subsets: list[np.ndarray]):
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.trees = trees
        self.feature_subsets = [np.asarray(s, dtype=np.int64) for s in feature_subsets]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for t, cols in zip(self.trees, self.feature_subsets):
            out += self.learning_rate * t.predict(X[:, cols])
        return out

    def to_state(self) -> dict[str, Any]:
        return {"base_score": self.base_score, "learning_rate": self.learning_rate,
                "trees": _trees_state(self.trees),
                "feature_subsets": [s.tolist() for s in self.feature_subsets]}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "RegBoostingModel":
        return cls(state["base_score"], state["learning_rate"],
                   _trees_from_state(state["trees"]),
                   [np.array(s, dtype=np.int64) for s in state["feature_subsets"]])


def fit_regularized_boosting(train: Dataset, p: RegBoostParams) -> RegBoostingModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    n, d = X.shape
    base = float(np.mean(y))
    current = np.full(n, base, dtype=np.float64)
    n_cols = max(1, int(math.floor(p.colsample_bytree * d)))
    trees, subsets = [], []
    for m in range(p.n_estimators):
        rng = _estimator_rng(p.seed, m)
        rows = _subsample_rows(rng, n, p.subsample)
        cols = np.sort(rng.choice(d, size=n_cols, replace=False))
        kseed = _kernel_seed(rng)
        grad = current - y
        t = build_tree(X[rows][:, cols], grad[rows], max_depth=p.max_depth,
                       crit=CRIT_GAIN2, lam=p.lam, gamma=p.gamma, seed=kseed)
        current += p.learning_rate * t.predict(X[:, cols])
        trees.append(t)
        subsets.append(cols)
    return RegBoostingModel(base, p.learning_rate, trees, subsets)


@register_fit("reg_boosting")
def _fit_regboost(train: Dataset, params: dict, seed: int) -> RegBoostingModel:
    return fit_regularized_boosting(train, RegBoostParams(**params, seed=seed))


# ---------------------------------------------------------------------------
# AdaBoost.R2


@dataclass(frozen=True)
class AdaParams:
    n_estimators: int = 50
    learning_rate: float = 1.0
    loss: str = "linear"
    max_depth: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.loss not in ("linear", "square", "exponential"):
            raise ValueError(f"unknown loss {self.loss!r}")


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    order = np.argsort(values, kind="mergesort")
    cum = np.cumsum(weights[order])
    half = 0.5 * cum[-1]
    return float(values[order][np.searchsorted(cum, half)])


@register_model
class AdaBoostModel(FittedModel):
    family = "adaboost"

    def __init__(self, trees: list[Tree], betas: list[float], learning_rate: float):
        self.trees = trees
        self.betas = [float(b) for b in betas]
        self.learning_rate = float(learning_rate)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        preds = np.stack([t.predict(X) for t in self.trees], axis=1)
        w = self.learning_rate * np.log(1.0 / np.array(self.betas))
        return np.array([weighted_median(preds[i], w) for i in range(X.shape[0])])

    def to_state(self) -> dict[str, Any]:
        return {"trees": _trees_state(self.trees), "betas": self.betas,
                "learning_rate": self.learning_rate}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "AdaBoostModel":
        return cls(_trees_from_state(state["trees"]), state["betas"],
                   state["learning_rate"])


def fit_adaboost_r2(train: Dataset, p: AdaParams) -> AdaBoostModel:
    train.require_fit_ready()
    X, y = train.X, train.y
    n = train.n
    w = np.full(n, 1.0 / n)
    trees: list[Tree] = []
    betas: list[float] = []
    for r in range(p.n_estimators):
        rng = _estimator_rng(p.seed, r)
        rows = rng.choice(n, size=n, replace=True, p=w)
        kseed = _kernel_seed(rng)
        t = build_tree(X[rows], y[rows], max_depth=p.max_depth, crit=CRIT_SSE, seed=kseed)
        err = np.abs(t.predict(X) - y)
        emax = float(err.max())
        if emax == 0.0:
            # perfect round: keep it with near-certain confidence and stop
            trees.append(t)
            betas.append(1e-300)
            break
        rel = err / emax
        if p.loss == "linear":
            losses = rel
        elif p.loss == "square":
            losses = rel**2
        else:
            losses = 1.0 - np.exp(-rel)
        lbar = float(np.sum(w * losses))
        if lbar >= 0.5:
            if not trees:
                trees.append(t)
                betas.append(lbar / (1.0 - lbar) if lbar < 1.0 else 1.0 - 1e-12)
            break
        beta = lbar / (1.0 - lbar)
        trees.append(t)
        betas.append(beta)
        w = w * beta ** ((1.0 - losses) * p.learning_rate)
        total = w.sum()
        if total <= 0.0 or not np.isfinite(total):
            raise ArithmeticError("sample weights degenerated to zero")
        w = w / total
    return AdaBoostModel(trees, betas, p.learning_rate)


@register_fit("adaboost")
def _fit_ada(train: Dataset, params: dict, seed: int) -> AdaBoostModel:
    return fit_adaboost_r2(train, AdaParams(**params, seed=seed))


# ---------------------------------------------------------------------------
# voting and stacking


# Member parameter sets anchored to the tuned single-model defaults.
RF_MEMBER = ("random_forest", {"n_estimators": 100, "max_depth": 10,
                               "max_features": "sqrt", "min_samples_leaf": 1,
                               "min_samples_split": 5})
ET_MEMBER = ("extra_trees", {"n_estimators": 300, "max_depth": 10,
                             "min_samples_split": 2})
GB_MEMBER = ("gradient_boosting", {"n_estimators": 300, "learning_rate": 0.2,
                                   "max_depth": 5, "subsample": 0.7})
KNN_MEMBER = ("knn", {"n_neighbors": 3, "metric": "manhattan", "weights": "distance"})

VOTING_DEFAULT_MEMBERS = (RF_MEMBER, ET_MEMBER, GB_MEMBER)
STACKING_DEFAULT_MEMBERS = (RF_MEMBER, ET_MEMBER, GB_MEMBER, KNN_MEMBER)


@dataclass(frozen=True)
class CompositeSpec:
    """Members for voting/stacking: (family, params) pairs plus composition knobs."""

    members: tuple = VOTING_DEFAULT_MEMBERS
    weights: Optional[tuple] = None
    n_folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.members) == 0:
            raise ValueError("at least one member model is required")
        if self.weights is not None and len(self.weights) != len(self.members):
            raise ValueError("weights length must match members")
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")


def _member_state(member: FittedModel) -> dict[str, Any]:
    return {"family": member.family, "params": member.to_state()}


def _member_from_state(state: dict[str, Any]) -> FittedModel:
    return MODEL_REGISTRY[state["family"]].from_state(state["params"])


@register_model
class VotingModel(FittedModel):
    family = "voting"

    def __init__(self, members: list[FittedModel], weights: np.ndarray):
        self.members = members
        self.weights = np.asarray(weights, dtype=np.float64)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for m, w in zip(self.members, self.weights):
            acc += w * m.predict(X)
        return acc / self.weights.sum()

    def to_state(self) -> dict[str, Any]:
        return {"members": [_member_state(m) for m in self.members],
                "weights": self.weights.tolist()}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "VotingModel":
        return cls([_member_from_state(s) for s in state["members"]],
                   np.array(state["weights"], dtype=np.float64))


def fit_voting(train: Dataset, spec: CompositeSpec) -> VotingModel:
    train.require_fit_ready()
    weights = np.ones(len(spec.members)) if spec.weights is None else np.asarray(spec.weights, float)
    if weights.sum() <= 0:
        raise ValueError("voting weights must have positive sum")
    members = [fit_family(fam, train, params, stable_seed((spec.seed, j)))
               for j, (fam, params) in enumerate(spec.members)]
    return VotingModel(members, weights)


@register_fit("voting")
def _fit_voting(train: Dataset, params: dict, seed: int) -> VotingModel:
    return fit_voting(train, CompositeSpec(members=VOTING_DEFAULT_MEMBERS, seed=seed, **params))


@register_model
class StackingModel(FittedModel):
    family = "stacking"

    def __init__(self, members: list[FittedModel], coef: np.ndarray):
        self.members = members
        # coef[0] is the intercept, coef[1:] the member weights
        self.coef = np.asarray(coef, dtype=np.float64)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.coef[0], dtype=np.float64)
        for j, m in enumerate(self.members):
            out += self.coef[1 + j] * m.predict(X)
        return out

    def to_state(self) -> dict[str, Any]:
        return {"members": [_member_state(m) for m in self.members],
                "coef": self.coef.tolist()}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "StackingModel":
        return cls([_member_from_state(s) for s in state["members"]],
                   np.array(state["coef"], dtype=np.float64))


def fit_stacking(train: Dataset, spec: CompositeSpec) -> StackingModel:
    from .selection import make_folds

    train.require_fit_ready()
    n = train.n
    k = min(spec.n_folds, n)
    if k < 2:
        raise ValueError("stacking needs at least 2 rows")
    plan = make_folds(n, k, stable_seed((spec.seed, 0xF01D)))
    meta = np.zeros((n, len(spec.members)), dtype=np.float64)
    for f, (tr_idx, val_idx) in enumerate(plan.folds):
        fold_train = train.subset(tr_idx)
        fold_val_X = train.X[val_idx]
        for j, (fam, params) in enumerate(spec.members):
            member = fit_family(fam, fold_train, params, stable_seed((spec.seed, f, j)))
            meta[val_idx, j] = member.predict(fold_val_X)
    A = np.column_stack([np.ones(n), meta])
    coef, *_ = np.linalg.lstsq(A, train.y, rcond=None)
    members = [fit_family(fam, train, params, stable_seed((spec.seed, k, j)))
               for j, (fam, params) in enumerate(spec.members)]
    return StackingModel(members, coef)


@register_fit("stacking")
def _fit_stacking(train: Dataset, params: dict, seed: int) -> StackingModel:
    return fit_stacking(train, CompositeSpec(members=STACKING_DEFAULT_MEMBERS, seed=seed, **params))
