"""Command-line interface: generate, benchmark, predict, plotdata.

Every command is deterministic given its flags (no timestamps in any output),
so reruns are byte-identical. Flags override values from an optional JSON
config file, which in turn override built-in defaults. Exit status is 1 when
an error was reported on stderr, 0 otherwise.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .data import (GeneratorConfig, SplitSpec, dataset_to_csv, generate_synthetic,
                   load_csv, save_csv)
from .dataset import FEATURE_NAMES, TARGET_NAME
from .model import load_model, save_model
from .selection import FAMILY_ORDER, run_benchmark

HIST_BIN_WIDTH = 5.0
PRED_COLUMN = "CBR_pred"

_CONFIG_KEYS = frozenset({
    "seed", "out", "force", "fixed_split", "threads", "config",
    "n", "noise_sd", "data", "families", "n_seeds", "train_fraction",
    "grids", "model",
})

_DEFAULTS = {
    "seed": 0, "force": False, "fixed_split": False, "threads": 1,
    "n": 382, "noise_sd": 4.0, "n_seeds": 5, "train_fraction": 0.8,
}


class CliError(Exception):
    """User-facing failure; message goes to stderr and exit status is 1."""


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must hold a JSON object")
    unknown = sorted(set(cfg) - _CONFIG_KEYS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _resolve(args: argparse.Namespace, keys) -> dict:
    """Merge precedence: CLI flag > config file > default."""
    file_cfg = _load_config(args.config) if args.config else {}
    out = {}
    for key in keys:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in file_cfg:
            out[key] = file_cfg[key]
        else:
            out[key] = _DEFAULTS.get(key)
    return out


def _require(cfg: dict, key: str) -> object:
    if cfg.get(key) is None:
        raise CliError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _parse_families(value):
    if value is None:
        return None
    if isinstance(value, str):
        value = [f.strip() for f in value.split(",") if f.strip()]
    if not isinstance(value, list) or not all(isinstance(f, str) for f in value):
        raise CliError("families must be a comma-separated list of family names")
    return value if value else None


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ("seed", "out", "force", "n", "noise_sd"))
    out = Path(_require(cfg, "out"))
    if out.exists() and not cfg["force"]:
        raise CliError(f"output file {out} exists; pass --force to overwrite")
    ds = generate_synthetic(GeneratorConfig(n_samples=int(cfg["n"]),
                                            seed=int(cfg["seed"]),
                                            noise_sd=float(cfg["noise_sd"])))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out)
    print(f"wrote {ds.n} samples to {out}")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ("seed", "out", "force", "fixed_split", "threads", "data",
                          "families", "n_seeds", "train_fraction", "grids"))
    data_path = _require(cfg, "data")
    out = Path(_require(cfg, "out"))
    families = _parse_families(cfg["families"])
    ds = load_csv(data_path)
    if not ds.has_target:
        raise CliError(f"{data_path} has no {TARGET_NAME} column; benchmark needs targets")
    spec = SplitSpec(train_fraction=float(cfg["train_fraction"]),
                     seed=int(cfg["seed"]), fixed_split=bool(cfg["fixed_split"]))
    result = run_benchmark(ds, families=families, grids=cfg["grids"],
                           n_seeds=int(cfg["n_seeds"]), split_spec=spec,
                           threads=int(cfg["threads"]))

    for fam, reason in result.failures.items():
        print(f"warning: family {fam} dropped: {reason}", file=sys.stderr)
    if not result.report.rows:
        raise CliError("all families failed; no report to write")

    _write_text(out / "report.csv", result.report.to_csv())
    _write_text(out / "report.txt", result.report.to_text())
    for fam, model in result.best_models.items():
        (out / "models").mkdir(parents=True, exist_ok=True)
        save_model(model, out / "models" / f"{fam}.model")
    resolved = {
        "command": "benchmark", "data": str(data_path),
        "families": list(FAMILY_ORDER) if families is None else families,
        "fixed_split": bool(cfg["fixed_split"]), "grids": cfg["grids"] or {},
        "n_seeds": int(cfg["n_seeds"]), "out": str(out), "seed": int(cfg["seed"]),
        "threads": int(cfg["threads"]), "train_fraction": float(cfg["train_fraction"]),
    }
    _write_text(out / "run_config.json",
                json.dumps(resolved, sort_keys=True, indent=2) + "\n")
    if result.failures:
        _write_text(out / "failures.json",
                    json.dumps(result.failures, sort_keys=True, indent=2) + "\n")
    print(f"wrote report for {len(result.report.rows)} families to {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ("out", "force", "model", "data"))
    model_path = _require(cfg, "model")
    data_path = _require(cfg, "data")
    out = Path(_require(cfg, "out"))
    model = load_model(model_path)
    ds = load_csv(data_path)
    preds = model.predict(ds.X) if ds.n else np.empty(0)
    lines = dataset_to_csv(ds).split("\n")
    lines[0] = lines[0] + "," + PRED_COLUMN
    for i in range(ds.n):
        lines[1 + i] = lines[1 + i] + "," + repr(float(preds[i]))
    _write_text(out, "\n".join(lines))
    print(f"wrote {ds.n} predictions to {out}")
    return 0


def _histogram(residuals: np.ndarray) -> list[tuple[int, int, int]]:
    """Half-open width-5 bins anchored at 0, contiguous across the data range."""
    if residuals.size == 0:
        return []
    lo = math.floor(residuals.min() / HIST_BIN_WIDTH)
    hi = math.floor(residuals.max() / HIST_BIN_WIDTH)
    idx = np.floor(residuals / HIST_BIN_WIDTH).astype(np.int64)
    rows = []
    for b in range(lo, hi + 1):
        rows.append((int(b * HIST_BIN_WIDTH), int((b + 1) * HIST_BIN_WIDTH),
                     int(np.count_nonzero(idx == b))))
    return rows


def cmd_plotdata(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ("out", "force", "model", "data"))
    model_path = _require(cfg, "model")
    data_path = _require(cfg, "data")
    out = Path(_require(cfg, "out"))
    model = load_model(model_path)
    ds = load_csv(data_path)
    if not ds.has_target:
        raise CliError(f"{data_path} has no {TARGET_NAME} column; plot data "
                       "needs actual values")
    preds = model.predict(ds.X) if ds.n else np.empty(0)
    actual = ds.y

    scatter = ["actual,predicted"]
    series = ["sample_index,actual,predicted"]
    for i in range(ds.n):
        a, p = repr(float(actual[i])), repr(float(preds[i]))
        scatter.append(f"{a},{p}")
        series.append(f"{i},{a},{p}")
    hist = ["bin_left,bin_right,count"]
    for left, right, count in _histogram(actual - preds):
        hist.append(f"{left},{right},{count}")

    plots = out / "plots"
    _write_text(plots / "scatter.csv", "\n".join(scatter) + "\n")
    _write_text(plots / "errors_hist.csv", "\n".join(hist) + "\n")
    _write_text(plots / "series.csv", "\n".join(series) + "\n")
    print(f"wrote plot data for {ds.n} rows to {plots}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None,
                        help="base random seed (default 0)")
    shared.add_argument("--out", default=None, help="output file or directory")
    shared.add_argument("--force", action="store_true", default=None,
                        help="overwrite existing outputs")
    shared.add_argument("--config", default=None,
                        help="JSON config file; flags given here override it")
    shared.add_argument("--fixed-split", dest="fixed_split", action="store_true",
                        default=None,
                        help="pin the train/test split; seeds vary models only")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker processes for the benchmark (default 1)")

    parser = argparse.ArgumentParser(
        prog="cbrbench",
        description="Soil CBR regression benchmark: synthetic data, twelve "
                    "model families, grid search, repeated-seed evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[shared],
                       help="write a synthetic soil dataset as CSV")
    p.add_argument("--n", type=int, default=None, help="sample count (default 382)")
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=None,
                   help="target noise standard deviation (default 4.0)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", parents=[shared],
                       help="grid-search and evaluate model families on a CSV")
    p.add_argument("--data", default=None, help="input dataset CSV")
    p.add_argument("--families", default=None,
                   help="comma-separated family subset (default: all twelve)")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=None,
                   help="number of evaluation seeds (default 5)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float,
                   default=None, help="train split fraction (default 0.8)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("predict", parents=[shared],
                       help="append CBR_pred to a feature CSV using a saved model")
    p.add_argument("--model", default=None, help="saved .model file")
    p.add_argument("--data", default=None, help="input CSV (CBR column optional)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plotdata", parents=[shared],
                       help="emit scatter, error-histogram, and series CSVs")
    p.add_argument("--model", default=None, help="saved .model file")
    p.add_argument("--data", default=None, help="labeled CSV to evaluate")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # library-level failures become CLI errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
