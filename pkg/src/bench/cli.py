# src/bench/cli.py
"""
Command-line entry point.

  python -m src.bench.cli bench      --config config/bench.yaml
  python -m src.bench.cli curves     --config config/bench.yaml --seeds 0,1,2,3,4
  python -m src.bench.cli train      --config config/bench.yaml --model runs/iris.rfmlp
  python -m src.bench.cli predict    --model runs/iris.rfmlp --input data/iris.csv --label-column species
  python -m src.bench.cli complexity --n-features 4 --classes 3

Exit status: 0 on success, otherwise the error category code
(see src/engine/errors.py).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..utils.load_env import load_env

# .env must be loaded before settings is imported
load_env()

from . import settings  # noqa: E402
from ..engine.decision import StrategyKind, parse_strategies  # noqa: E402
from ..engine.errors import EXIT_CODES, ErrorCategory, RfmlpError  # noqa: E402
from ..engine.mlp import DEFAULT_HIDDEN  # noqa: E402
from .config import load_run_config  # noqa: E402
from .runner import cmd_bench, cmd_complexity, cmd_curves, cmd_predict, cmd_train  # noqa: E402

logger = logging.getLogger("rfmlp")

STRATEGY_NAMES = [k.value for k in StrategyKind]


# -------------------------
# Overrides
# -------------------------
def _csv_ints(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_names(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _drop_none(d: Dict[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for k, v in d.items():
        if isinstance(v, dict):
            v = _drop_none(v)
            if not v:
                continue
        if v is not None:
            out[k] = v
    return out


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return _drop_none(
        {
            "dataset": {
                "path": args.dataset,
                "label_column": args.label_column,
                "delimiter": args.delimiter,
            },
            "k_folds": args.k_folds,
            "split_mode": args.split_mode,
            "per_class": args.per_class,
            "seeds": args.seeds,
            "strategies": args.strategies,
            "vote_threshold": args.vote_threshold,
            "include_baseline_mlp": args.baseline,
            "whiten": args.whiten,
            "curve_fold": args.curve_fold,
            "output_dir": args.output_dir,
            "n_jobs": args.n_jobs,
            "train": {
                "epochs": args.epochs,
                "batches_per_epoch": args.batches_per_epoch,
                "batch_size": args.batch_size,
                "hidden_size": args.hidden_size,
                "early_stop_patience": args.patience,
                "holdout_fraction": args.holdout_fraction,
            },
        }
    )


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config (keys in docs/CONFIG.md)")
    p.add_argument("--dataset", help="delimited data file")
    p.add_argument("--label-column")
    p.add_argument("--delimiter")
    p.add_argument("--k-folds", type=int)
    p.add_argument("--split-mode", choices=["kfold", "per_class"])
    p.add_argument("--per-class", type=int)
    p.add_argument("--seeds", type=_csv_ints, help="e.g. 0,1,2,3,4")
    p.add_argument("--strategies", type=_csv_names, help=",".join(STRATEGY_NAMES))
    p.add_argument("--vote-threshold", type=float)
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--whiten", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--curve-fold", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batches-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--holdout-fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfmlp", description="RandomForestMLP benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_options(sub.add_parser("bench", help="inverted k-fold benchmark over seeds"))
    _add_run_options(sub.add_parser("curves", help="per-epoch train/validation accuracy"))

    p_train = sub.add_parser("train", help="train one forest on a whole file")
    _add_run_options(p_train)
    p_train.add_argument("--model", required=True, help="model file to write")

    p_pred = sub.add_parser("predict", help="label the rows of a feature file")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--output", default=None, help="default: <input stem>.predictions.csv")
    p_pred.add_argument("--strategy", choices=STRATEGY_NAMES, default=StrategyKind.EQUIPROBABLE.value)
    p_pred.add_argument("--vote-threshold", type=float, default=0.5)
    p_pred.add_argument("--delimiter", default=",")
    p_pred.add_argument("--label-column", default=None, help="dropped from the input if present")

    p_cx = sub.add_parser("complexity", help="parameter count per subspace dimensionality")
    p_cx.add_argument("--n-features", type=int, required=True)
    p_cx.add_argument("--classes", type=int, required=True)
    p_cx.add_argument("--hidden", type=int, default=DEFAULT_HIDDEN)
    p_cx.add_argument("--output", default=None, help="complexity.csv path")
    return parser


# -------------------------
# Commands
# -------------------------
def _run(args: argparse.Namespace) -> None:
    if args.command == "complexity":
        table = cmd_complexity(
            args.n_features, args.hidden, args.classes, Path(args.output) if args.output else None
        )
        print(table)
        return

    if args.command == "predict":
        strategy = parse_strategies([args.strategy], args.vote_threshold)[0]
        output = args.output or str(Path(args.input).with_suffix(".predictions.csv"))
        path = cmd_predict(args.model, args.input, strategy, output, args.delimiter, args.label_column)
        logger.info("predictions written to %s", path)
        return

    cfg = load_run_config(args.config, overrides_from_args(args))
    if args.command == "bench":
        result = cmd_bench(cfg)
        logger.info("bench done: %s", ", ".join(str(p) for p in result.files.values()))
    elif args.command == "curves":
        result = cmd_curves(cfg)
        logger.info("curves done: %d files", len(result.files))
    elif args.command == "train":
        path = cmd_train(cfg, args.model)
        logger.info("model written to %s", path)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except RfmlpError as e:
        logger.error("[%s] %s", e.category.value, e)
        return e.exit_code
    except OSError as e:
        logger.error("[%s] %s", ErrorCategory.IO.value, e)
        return EXIT_CODES[ErrorCategory.IO]
    return 0


if __name__ == "__main__":
    sys.exit(main())
