# src/bench/runner.py
"""
Benchmark commands: bench, train, predict, curves, complexity.

Fold x seed cells are independent. They run through joblib and are
gathered back in (seed, fold) order, so outputs never depend on n_jobs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..engine.data import (
    CurseCheck,
    Dataset,
    FoldSplit,
    apply_standardizer,
    curse_condition,
    fit_standardizer,
    inverted_stratified_kfold,
    load_csv,
    load_features,
    per_class_splits,
)
from ..engine.decision import BatchDecision, DecisionStrategy, StrategyKind, decide_batch, predict_batch
from ..engine.errors import ConfigError, DimensionError, RfmlpError
from ..engine.forest import (
    ForestModel,
    complexity_table,
    derive_seed,
    member_probabilities_batch,
    train_forest,
)
from ..engine.metrics import EvalReport, MethodSummary, aggregate, evaluate
from ..engine.mlp import MlpModel, TrainHistory, predict_labels, train_mlp
from ..engine.model_io import load_forest, save_forest
from . import reports
from .config import RAW_FOREST, WHITENED_FOREST, RunConfig

logger = logging.getLogger("rfmlp")

BASELINE = "mlp_baseline"
# seed roles inside one (seed, fold) cell
_ROLE_BASELINE = 0
_ROLE_FOREST = {RAW_FOREST: 1, WHITENED_FOREST: 2}


def method_name(s: DecisionStrategy) -> str:
    return f"rfmlp_{s.kind.value}"


# -------------------------
# Results
# -------------------------
@dataclass(frozen=True)
class CellResult:
    seed: int
    fold_id: int
    reports: Tuple[EvalReport, ...]
    # BASELINE or a forest variant name -> per-model training histories
    histories: Dict[str, Tuple[TrainHistory, ...]] = field(default_factory=dict)


@dataclass
class BenchmarkResult:
    reports: List[EvalReport]
    summaries: List[MethodSummary]
    curse: CurseCheck
    curse_text: str
    # (seed, fold, BASELINE or forest variant) -> learning curves of every trained MLP
    histories: Dict[Tuple[int, int, str], Tuple[TrainHistory, ...]] = field(default_factory=dict)
    files: Dict[str, Path] = field(default_factory=dict)

    def median_f1(self, method: str) -> float:
        for s in self.summaries:
            if s.method == method:
                return s.f1_median
        raise KeyError(method)


@dataclass
class CurvesResult:
    rows: Dict[int, List[Tuple[int, str, str, float]]]          # seed -> curve rows
    gaps: List[Tuple[int, str, float, float, float]]             # seed, method, train, val, gap
    files: Dict[str, Path] = field(default_factory=dict)

    def gap(self, seed: int, method: str) -> float:
        for s, m, _, _, g in self.gaps:
            if s == seed and m == method:
                return g
        raise KeyError((seed, method))


# -------------------------
# Helpers
# -------------------------
def load_dataset(cfg: RunConfig) -> Dataset:
    return load_csv(cfg.dataset_path, cfg.label_column, cfg.delimiter)


def make_splits(ds: Dataset, cfg: RunConfig, seed: int) -> List[FoldSplit]:
    if cfg.split_mode == "per_class":
        return per_class_splits(ds, cfg.per_class, cfg.k_folds, seed)
    if cfg.split_mode == "kfold":
        return inverted_stratified_kfold(ds, cfg.k_folds, seed)
    raise ConfigError(f"unknown split_mode {cfg.split_mode!r}")


def check_curse(ds: Dataset, cfg: RunConfig) -> Tuple[CurseCheck, str]:
    curse = curse_condition(ds.class_count, ds.n_features, ds.n_samples, cfg.k_folds)
    text = reports.curse_line(curse, ds.class_count, ds.n_features, ds.n_samples, cfg.k_folds)
    if curse.satisfied:
        logger.info("%s", text)
    else:
        logger.warning("%s (advisory only)", text)
    return curse, text


def _train_forests(
    ds: Dataset,
    split: FoldSplit,
    seed: int,
    cfg: RunConfig,
    keep_snapshots: bool = False,
    early_stop: bool = True,
) -> Dict[str, ForestModel]:
    x_tr, y_tr = ds.subset(split.train_indices)
    std = fit_standardizer(ds, split.train_indices)
    return {
        name: train_forest(
            x_tr,
            y_tr,
            ds.class_count,
            cfg.train,
            whitened,
            derive_seed(seed, split.fold_id, _ROLE_FOREST[name]),
            standardizer=std,
            keep_snapshots=keep_snapshots,
            early_stop=early_stop,
            feature_names=ds.feature_names,
            label_names=ds.label_names,
        )
        for name, whitened in cfg.forest_variants().items()
    }


def _train_baseline(
    ds: Dataset,
    split: FoldSplit,
    seed: int,
    cfg: RunConfig,
    keep_snapshots: bool = False,
    early_stop: bool = True,
) -> Tuple[MlpModel, TrainHistory]:
    x_tr, y_tr = ds.subset(split.train_indices)
    std = fit_standardizer(ds, split.train_indices)
    return train_mlp(
        apply_standardizer(std, x_tr),
        y_tr,
        cfg.train,
        derive_seed(seed, split.fold_id, _ROLE_BASELINE),
        class_count=ds.class_count,
        keep_snapshots=keep_snapshots,
        early_stop=early_stop,
    )


# -------------------------
# bench
# -------------------------
def run_cell(ds: Dataset, split: FoldSplit, seed: int, cfg: RunConfig) -> CellResult:
    """Standardize on the train fold, train baseline + forests, score the K-1 validation folds."""
    try:
        x_va, y_va = ds.subset(split.validation_indices)
        n_train = int(split.train_indices.size)
        out: List[EvalReport] = []
        histories: Dict[str, Tuple[TrainHistory, ...]] = {}

        if cfg.include_baseline_mlp:
            model, hist = _train_baseline(ds, split, seed, cfg)
            histories[BASELINE] = (hist,)
            std = fit_standardizer(ds, split.train_indices)
            pred = predict_labels(model, apply_standardizer(std, x_va))
            out.append(evaluate(y_va, pred, ds.class_count, BASELINE, split.fold_id, seed, n_train=n_train))

        forests = _train_forests(ds, split, seed, cfg)
        histories.update({name: f.histories for name, f in forests.items()})
        probs = {name: member_probabilities_batch(f, x_va) for name, f in forests.items()}
        for s in cfg.decision_strategies():
            name = cfg.forest_for(s)
            bd = decide_batch(forests[name], probs[name], s)
            out.append(
                evaluate(
                    y_va, bd.labels, ds.class_count, method_name(s), split.fold_id, seed,
                    strategy=s.kind.value, n_train=n_train, fallback_used=bd.fallback_used,
                )
            )
    except RfmlpError as e:
        raise e.with_context(seed=seed, fold=split.fold_id) from e

    logger.info(
        "cell seed=%d fold=%d: %s",
        seed, split.fold_id, " ".join(f"{r.method}={r.weighted_f1:.3f}" for r in out),
    )
    return CellResult(seed=seed, fold_id=split.fold_id, reports=tuple(out), histories=histories)


def cmd_bench(cfg: RunConfig) -> BenchmarkResult:
    ds = load_dataset(cfg)
    curse, curse_text = check_curse(ds, cfg)

    jobs = []
    for seed in cfg.seeds:
        try:
            splits = make_splits(ds, cfg, seed)
        except RfmlpError as e:
            raise e.with_context(seed=seed) from e
        jobs += [(seed, split) for split in splits]
    logger.info("bench: %d cells (%d seeds), n_jobs=%d", len(jobs), len(cfg.seeds), cfg.n_jobs)

    cells = Parallel(n_jobs=cfg.n_jobs)(
        delayed(run_cell)(ds, split, seed, cfg) for seed, split in jobs
    )
    order = {seed: i for i, seed in enumerate(cfg.seeds)}
    cells = sorted(cells, key=lambda c: (order[c.seed], c.fold_id))
    all_reports = [r for c in cells for r in c.reports]
    summaries = aggregate(all_reports)

    out_dir = Path(cfg.output_dir)
    result = BenchmarkResult(all_reports, summaries, curse, curse_text)
    for c in cells:
        result.histories.update({(c.seed, c.fold_id, name): h for name, h in c.histories.items()})
    result.files["cells"] = reports.write_cells(all_reports, out_dir / "cells.csv")
    result.files["summary"] = reports.write_summary_csv(summaries, out_dir / "summary.csv")
    result.files["summary_text"] = reports.write_summary_text(
        summaries, Path(cfg.dataset_path).name, curse_text, out_dir / "summary.txt"
    )
    logger.info("\n%s", reports.render_table(summaries, Path(cfg.dataset_path).name))
    return result


# -------------------------
# train / predict
# -------------------------
def cmd_train(cfg: RunConfig, model_path: str | Path) -> Path:
    """
    Trains one forest on the whole file. The forest is whitened when
    `whiten` is set or weighted_probability is among the strategies, so the
    saved model can serve every requested strategy.
    """
    ds = load_dataset(cfg)
    whiten = cfg.whiten or StrategyKind.WEIGHTED_PROBABILITY.value in cfg.strategies
    forest = train_forest(
        ds.features,
        ds.labels,
        ds.class_count,
        cfg.train,
        whiten,
        derive_seed(cfg.seeds[0], 0),
        n_jobs=cfg.n_jobs,
        feature_names=ds.feature_names,
        label_names=ds.label_names,
    )
    return save_forest(forest, model_path)


def cmd_predict(
    model_path: str | Path,
    input_path: str | Path,
    strategy: DecisionStrategy,
    output_path: str | Path,
    delimiter: str = ",",
    label_column: Optional[str] = None,
) -> Path:
    """Labels every row of a feature file. A header-only input gives a header-only output."""
    forest = load_forest(model_path)
    if strategy.needs_whitening and not forest.whitened:
        raise ConfigError(f"{model_path}: weighted_probability needs a model trained with whitening")
    x, names = load_features(input_path, delimiter, drop_column=label_column)
    if x.shape[1] != forest.n_features:
        raise DimensionError(
            f"model expects {forest.n_features} feature columns {list(forest.feature_names)}, "
            f"input has {x.shape[1]} {list(names)}"
        )
    if x.shape[0] == 0:
        logger.info("predict: %s has no rows", input_path)
        decisions = BatchDecision(
            labels=np.zeros(0, dtype=np.int64),
            posteriors=np.zeros((0, forest.class_count)),
            fallback_used=np.zeros(0, dtype=bool),
        )
    else:
        decisions = predict_batch(forest, x, strategy)
    frame = reports.predictions_frame(decisions, forest.label_names, forest.class_count)
    return reports.write_predictions(frame, Path(output_path))


# -------------------------
# curves
# -------------------------
def _forest_at_epoch(forest: ForestModel, epoch: int) -> ForestModel:
    return forest.with_members(tuple(h.snapshots[epoch - 1] for h in forest.histories))


def run_curve_cell(
    ds: Dataset,
    split: FoldSplit,
    seed: int,
    cfg: RunConfig,
) -> Tuple[List[Tuple[int, str, str, float]], List[Tuple[int, str, float, float, float]]]:
    try:
        x_tr, y_tr = ds.subset(split.train_indices)
        x_va, y_va = ds.subset(split.validation_indices)
        rows: List[Tuple[int, str, str, float]] = []
        finals: Dict[str, Tuple[float, float]] = {}

        if cfg.include_baseline_mlp:
            std = fit_standardizer(ds, split.train_indices)
            z_va = apply_standardizer(std, x_va)
            _, hist = _train_baseline(ds, split, seed, cfg, keep_snapshots=True, early_stop=False)
            # train accuracy on the rows the optimizer saw; the holdout has its own split
            z_fit = apply_standardizer(std, x_tr[hist.fit_indices])
            y_fit = y_tr[hist.fit_indices]
            for e, snap in enumerate(hist.snapshots, start=1):
                tr = float(np.mean(predict_labels(snap, z_fit) == y_fit))
                va = float(np.mean(predict_labels(snap, z_va) == y_va))
                rows += [(e, "train", BASELINE, tr), (e, "validation", BASELINE, va)]
                if not math.isnan(hist.holdout_accuracy[e - 1]):
                    rows.append((e, "holdout", BASELINE, hist.holdout_accuracy[e - 1]))
                finals[BASELINE] = (tr, va)

        forests = _train_forests(ds, split, seed, cfg, keep_snapshots=True, early_stop=False)
        for s in cfg.decision_strategies():
            forest = forests[cfg.forest_for(s)]
            method = method_name(s)
            for e in range(1, cfg.train.epochs + 1):
                snap = _forest_at_epoch(forest, e)
                tr = float(np.mean(decide_batch(snap, member_probabilities_batch(snap, x_tr), s).labels == y_tr))
                va = float(np.mean(decide_batch(snap, member_probabilities_batch(snap, x_va), s).labels == y_va))
                rows += [(e, "train", method, tr), (e, "validation", method, va)]
                finals[method] = (tr, va)
    except RfmlpError as e:
        raise e.with_context(seed=seed, fold=split.fold_id) from e

    gaps = [(seed, m, tr, va, tr - va) for m, (tr, va) in finals.items()]
    return rows, gaps


def cmd_curves(cfg: RunConfig) -> CurvesResult:
    """
    Per-epoch train/validation accuracy on fold `curve_fold` of every seed.
    Every model runs the full epoch schedule so the curves show what early
    stopping would cut off; the baseline's holdout is still tracked.
    """
    ds = load_dataset(cfg)
    check_curse(ds, cfg)
    jobs = []
    for seed in cfg.seeds:
        splits = make_splits(ds, cfg, seed)
        if not 0 <= cfg.curve_fold < len(splits):
            raise ConfigError(f"curve_fold {cfg.curve_fold} outside [0, {len(splits)})")
        jobs.append((seed, splits[cfg.curve_fold]))

    outputs = Parallel(n_jobs=cfg.n_jobs)(
        delayed(run_curve_cell)(ds, split, seed, cfg) for seed, split in jobs
    )
    out_dir = Path(cfg.output_dir)
    result = CurvesResult(rows={}, gaps=[])
    for (seed, _), (rows, gaps) in zip(jobs, outputs):
        result.rows[seed] = rows
        result.gaps += gaps
        result.files[f"curves_seed_{seed}"] = reports.write_curves(rows, out_dir / f"seed_{seed}" / "curves.csv")
    result.files["curve_gaps"] = reports.write_gaps(result.gaps, out_dir / "curve_gaps.csv")
    return result


# -------------------------
# complexity
# -------------------------
def cmd_complexity(n_features: int, hidden: int, classes: int, output_path: Optional[Path] = None) -> str:
    return reports.write_complexity(complexity_table(n_features, hidden, classes), output_path)
