"""Cross-validation, grid search, and the repeated-seed benchmark harness."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .data import SplitSpec, split
from .dataset import Dataset
from .metrics import Metrics, evaluate
from .model import FIT_REGISTRY, fit as fit_family
from .seeding import name_seed, stable_seed

N_FOLDS_DEFAULT = 5
_FOLD_TAG = 0xCF
_REFIT_TAG = 1 << 20

# report row order before sorting; also the CLI's family universe
FAMILY_ORDER = (
    "decision_tree", "random_forest", "extra_trees", "bagging", "adaboost",
    "gradient_boosting", "reg_boosting", "svr", "knn", "mlp", "voting", "stacking",
)

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "decision_tree": {"max_depth": [5, 10], "min_samples_leaf": [2],
                      "min_samples_split": [2, 10]},
    "random_forest": {"max_depth": [10, None], "max_features": ["sqrt"],
                      "min_samples_leaf": [1], "min_samples_split": [2, 5],
                      "n_estimators": [100]},
    "extra_trees": {"max_depth": [10, None], "min_samples_split": [2, 5],
                    "n_estimators": [300]},
    "bagging": {"max_features": [0.7, 1.0], "max_samples": [0.9],
                "n_estimators": [200]},
    "adaboost": {"learning_rate": [0.01], "loss": ["exponential", "linear"],
                 "n_estimators": [200]},
    "gradient_boosting": {"learning_rate": [0.2], "max_depth": [5],
                          "n_estimators": [300], "subsample": [0.7, 1.0]},
    "reg_boosting": {"colsample_bytree": [0.7], "gamma": [0.1],
                     "learning_rate": [0.01, 0.1], "max_depth": [3],
                     "n_estimators": [300], "subsample": [0.7]},
    "svr": {"C": [100, 1000], "epsilon": [0.1, 0.5], "kernel": ["rbf"]},
    "knn": {"metric": ["manhattan", "euclidean"], "n_neighbors": [3, 5],
            "weights": ["distance", "uniform"]},
    "mlp": {"activation": ["relu"], "alpha": [0.001, 0.0001],
            "hidden_layer_sizes": [[100]], "learning_rate": ["constant"],
            "solver": ["adam"]},
    "voting": {},
    "stacking": {},
}


@dataclass(frozen=True)
class FoldPlan:
    """k disjoint validation blocks covering 0..n-1, sizes differing by <= 1."""

    n: int
    k: int
    seed: int
    folds: tuple  # of (train_idx, val_idx) int64 array pairs


def make_folds(n: int, k: int, seed: int) -> FoldPlan:
    if not (2 <= k <= n):
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    blocks = np.array_split(perm, k)
    folds = []
    for b in blocks:
        val = np.sort(b)
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        folds.append((np.flatnonzero(mask).astype(np.int64), val.astype(np.int64)))
    return FoldPlan(n=n, k=k, seed=seed, folds=tuple(folds))


def _mean_metrics(ms: Sequence[Metrics]) -> Metrics:
    return Metrics(r2=float(np.mean([m.r2 for m in ms])),
                   mae=float(np.mean([m.mae for m in ms])),
                   rmse=float(np.mean([m.rmse for m in ms])))


def cross_validate(family: str, params: dict, train: Dataset, plan: FoldPlan,
                   base_seed: int = 0) -> tuple[Metrics, Metrics]:
    """Fold-train and fold-validation metric means for one candidate."""
    if plan.n != train.n:
        raise ValueError(f"fold plan built for n={plan.n}, dataset has n={train.n}")
    tr_metrics, va_metrics = [], []
    for f, (tr_idx, va_idx) in enumerate(plan.folds):
        fold_train = train.subset(tr_idx)
        fold_val = train.subset(va_idx)
        try:
            model = fit_family(family, fold_train, params, stable_seed((base_seed, f)))
        except Exception as exc:
            raise RuntimeError(f"{family} failed on fold {f}: {exc}") from exc
        tr_metrics.append(evaluate(fold_train.y, model.predict(fold_train.X)))
        va_metrics.append(evaluate(fold_val.y, model.predict(fold_val.X)))
    return _mean_metrics(tr_metrics), _mean_metrics(va_metrics)


@dataclass(frozen=True)
class CandidateResult:
    params: dict
    train_metrics: Metrics
    val_metrics: Metrics


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Cartesian candidates in key-insertion/value-list order."""
    for name, values in grid.items():
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            raise ValueError(f"grid entry {name!r} must be a non-empty list")
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*grid.values())]


def grid_search(family: str, grid: dict[str, list], train: Dataset, plan: FoldPlan,
                base_seed: int = 0) -> tuple[dict, list[CandidateResult]]:
    """Best candidate by mean validation R^2; ties by val RMSE, then order."""
    candidates = expand_grid(grid)
    results: list[CandidateResult] = []
    best_idx = -1
    for ci, cand in enumerate(candidates):
        tr_m, va_m = cross_validate(family, cand, train, plan, stable_seed((base_seed, ci)))
        results.append(CandidateResult(cand, tr_m, va_m))
        if best_idx < 0:
            best_idx = ci
            continue
        cur = results[best_idx].val_metrics
        if va_m.r2 > cur.r2 or (va_m.r2 == cur.r2 and va_m.rmse < cur.rmse):
            best_idx = ci
    return dict(results[best_idx].params), results


@dataclass(frozen=True)
class ReportRow:
    family: str
    best_params: dict
    train: Metrics
    val: Metrics
    test: Metrics


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    best_params: dict
    train: Metrics
    val: Metrics
    test: Metrics


REPORT_COLUMNS = ("family", "best_params", "train_r2", "train_mae", "train_rmse",
                  "val_r2", "val_mae", "val_rmse", "test_r2", "test_mae", "test_rmse")


def render_params(params: dict) -> str:
    if not params:
        return "N/A (no tuning parameters)"
    return json.dumps(params, sort_keys=True)


@dataclass(frozen=True)
class EvalReport:
    rows: tuple  # of ReportRow, sorted by test R^2 descending
    n_seeds: int

    def to_csv(self) -> str:
        import csv as _csv
        import io
        buf = io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.family, render_params(r.best_params),
                        repr(r.train.r2), repr(r.train.mae), repr(r.train.rmse),
                        repr(r.val.r2), repr(r.val.mae), repr(r.val.rmse),
                        repr(r.test.r2), repr(r.test.mae), repr(r.test.rmse)])
        return buf.getvalue()

    def to_text(self) -> str:
        cells = [list(REPORT_COLUMNS)]
        for r in self.rows:
            cells.append([r.family, render_params(r.best_params)]
                         + [f"{v:.3f}" for v in
                            (r.train.r2, r.train.mae, r.train.rmse,
                             r.val.r2, r.val.mae, r.val.rmse,
                             r.test.r2, r.test.mae, r.test.rmse)])
        widths = [max(len(row[c]) for row in cells) for c in range(len(REPORT_COLUMNS))]
        lines = []
        for i, row in enumerate(cells):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


@dataclass
class BenchmarkResult:
    report: EvalReport
    best_models: dict  # family -> FittedModel (refit with the modal parameters)
    per_seed: dict  # family -> list[SeedOutcome]
    failures: dict  # family -> reason string


def _ensure_families_registered() -> None:
    from . import ensembles, knn, mlp, svr, tree  # noqa: F401


def _family_seed_task(args):
    """One (family, evaluation-seed) unit: split, grid-search, refit, test-eval.

    Returns (family, s, SeedOutcome) on success and (family, s, reason) on
    failure. Top-level so a process pool can pickle it; everything it touches
    is a pure function of the argument tuple, so parallel and serial schedules
    produce identical results.
    """
    (family, s, grid, X, y, train_fraction, split_seed, n_folds) = args
    _ensure_families_registered()
    try:
        ds = Dataset(X, y, validate=False)
        train, test = split(ds, SplitSpec(train_fraction=train_fraction,
                                          seed=split_seed))
        plan = make_folds(train.n, n_folds, stable_seed((s, _FOLD_TAG)))
        fam_tag = name_seed(family)
        best, results = grid_search(family, grid, train, plan, stable_seed((s, fam_tag)))
        winner = next(r for r in results if r.params == best)
        refit = fit_family(family, train, best, stable_seed((s, fam_tag, _REFIT_TAG)))
        test_m = evaluate(test.y, refit.predict(test.X))
    except Exception as exc:
        return (family, s, f"seed {s}: {type(exc).__name__}: {exc}")
    return (family, s, SeedOutcome(seed=s, best_params=best,
                                   train=winner.train_metrics,
                                   val=winner.val_metrics, test=test_m))


def run_benchmark(dataset: Dataset, families: Optional[Sequence[str]] = None,
                  grids: Optional[dict] = None, n_seeds: int = 5,
                  split_spec: SplitSpec = SplitSpec(), n_folds: int = N_FOLDS_DEFAULT,
                  threads: int = 1) -> BenchmarkResult:
    """Grid-search every family over n_seeds repetitions and average the metrics.

    Each evaluation seed redraws the train/test split (unless
    split_spec.fixed_split pins it) and reseeds all model randomness. Rows of
    the report are averages across seeds, sorted by test R^2 descending. A
    family that fails on any seed is dropped from the report and recorded in
    failures under the first failing seed. threads > 1 fans the
    (family, seed) units out to worker processes; results are reduced in a
    fixed order so output is identical to a serial run.
    """
    _ensure_families_registered()
    if not dataset.has_target:
        raise ValueError("benchmark requires CBR targets")
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    families = list(FAMILY_ORDER) if families is None else list(families)
    for fam in families:
        if fam not in FIT_REGISTRY:
            known = ", ".join(sorted(FIT_REGISTRY))
            raise ValueError(f"unknown model family {fam!r}; valid families: {known}")
    merged_grids = {fam: dict(DEFAULT_GRIDS.get(fam, {})) for fam in families}
    if grids:
        for fam, g in grids.items():
            if fam in merged_grids:
                merged_grids[fam] = dict(g)

    tasks = []
    for fam in families:
        for s in range(n_seeds):
            split_seed = split_spec.seed if split_spec.fixed_split else s
            tasks.append((fam, s, merged_grids[fam], dataset.X, dataset.y,
                          split_spec.train_fraction, split_seed, n_folds))

    outcomes: dict[tuple, object] = {}
    if threads == 1:
        for t in tasks:
            fam, s, out = _family_seed_task(t)
            outcomes[(fam, s)] = out
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for fam, s, out in pool.map(_family_seed_task, tasks):
                outcomes[(fam, s)] = out

    per_seed: dict[str, list[SeedOutcome]] = {fam: [] for fam in families}
    failures: dict[str, str] = {}
    for fam in families:
        for s in range(n_seeds):
            out = outcomes[(fam, s)]
            if isinstance(out, str):
                failures[fam] = out
                break
            per_seed[fam].append(out)

    rows = []
    best_models = {}
    for fam in families:
        if fam in failures:
            continue
        outs = per_seed[fam]
        modal_params, modal_seed = _modal_params(outs)
        rows.append(ReportRow(
            family=fam, best_params=modal_params,
            train=_mean_metrics([o.train for o in outs]),
            val=_mean_metrics([o.val for o in outs]),
            test=_mean_metrics([o.test for o in outs])))
        best_models[fam] = _refit_for_seed(dataset, fam, modal_seed, modal_params,
                                           split_spec)
    rows.sort(key=lambda r: -r.test.r2)
    report = EvalReport(rows=tuple(rows), n_seeds=n_seeds)
    return BenchmarkResult(report=report, best_models=best_models,
                           per_seed=per_seed, failures=failures)


def _modal_params(outs: Sequence[SeedOutcome]) -> tuple[dict, int]:
    """Most frequent best-params across seeds; ties go to the earliest seed."""
    counts: dict[str, int] = {}
    first_seed: dict[str, int] = {}
    for o in outs:
        key = json.dumps(o.best_params, sort_keys=True)
        counts[key] = counts.get(key, 0) + 1
        first_seed.setdefault(key, o.seed)
    best_key = max(counts, key=lambda k: (counts[k], -first_seed[k]))
    return json.loads(best_key), first_seed[best_key]


def _refit_for_seed(dataset, family, s, params, split_spec):
    split_seed = split_spec.seed if split_spec.fixed_split else s
    train, _ = split(dataset, SplitSpec(train_fraction=split_spec.train_fraction,
                                        seed=split_seed))
    return fit_family(family, train, params,
                      stable_seed((s, name_seed(family), _REFIT_TAG)))
