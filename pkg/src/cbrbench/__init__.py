"""Tabular regression toolkit and benchmark harness for soil CBR prediction.

Twelve model families implemented on numpy, a calibrated synthetic data
generator, grid search over 5-fold cross-validation, and a repeated-seed
benchmark with CSV/text reporting. Importing the package registers every
family, so fit()/load_model() can resolve any tag.
"""

from . import ensembles, knn, mlp, svr, tree  # noqa: F401  (registry side effects)
from .data import (CSV_HEADER_FULL, CsvFormatError, GeneratorConfig, SplitSpec,
                   Standardizer, dataset_to_csv, fit_standardizer,
                   generate_synthetic, load_csv, save_csv, split)
from .dataset import (FEATURE_NAMES, N_FEATURES, TARGET_NAME, Dataset,
                      SampleValidationError, SoilSample, check_sample)
from .metrics import DegenerateTargetError, Metrics, evaluate, mae, r2_score, rmse
from .model import (FIT_REGISTRY, MODEL_REGISTRY, FittedModel, ModelFormatError,
                    fit, load_model, predict, save_model)
from .selection import (DEFAULT_GRIDS, FAMILY_ORDER, BenchmarkResult, EvalReport,
                        FoldPlan, cross_validate, expand_grid, grid_search,
                        make_folds, run_benchmark)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER_FULL", "CsvFormatError", "GeneratorConfig", "SplitSpec",
    "Standardizer", "dataset_to_csv", "fit_standardizer", "generate_synthetic",
    "load_csv", "save_csv", "split",
    "FEATURE_NAMES", "N_FEATURES", "TARGET_NAME", "Dataset",
    "SampleValidationError", "SoilSample", "check_sample",
    "DegenerateTargetError", "Metrics", "evaluate", "mae", "r2_score", "rmse",
    "FIT_REGISTRY", "MODEL_REGISTRY", "FittedModel", "ModelFormatError",
    "fit", "load_model", "predict", "save_model",
    "DEFAULT_GRIDS", "FAMILY_ORDER", "BenchmarkResult", "EvalReport",
    "FoldPlan", "cross_validate", "expand_grid", "grid_search", "make_folds",
    "run_benchmark",
    "__version__",
]
