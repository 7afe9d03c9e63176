# src/bench/reports.py
"""
Delimited-text outputs. Everything goes through pandas with a fixed
float format and "\\n" line endings so reruns are byte-identical.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..engine.data import CurseCheck
from ..engine.decision import BatchDecision
from ..engine.forest import ComplexityRow
from ..engine.metrics import EvalReport, MethodSummary
from . import settings

logger = logging.getLogger("rfmlp")

CELL_COLUMNS = [
    "method", "strategy", "seed", "fold", "n_train", "n_validation",
    "weighted_f1", "accuracy", "fallback_rate",
]
SUMMARY_COLUMNS = [
    "method", "cells",
    "f1_mean", "f1_median", "f1_std",
    "accuracy_mean", "accuracy_median", "accuracy_std",
]
CURVE_COLUMNS = ["epoch", "split", "method", "accuracy"]
GAP_COLUMNS = ["seed", "method", "train_accuracy", "validation_accuracy", "gap"]


def _write(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path,
        index=False,
        float_format=settings.FLOAT_FORMAT,
        lineterminator="\n",
        na_rep="",
    )
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def cells_frame(reports: Iterable[EvalReport]) -> pd.DataFrame:
    rows = [
        {
            "method": r.method,
            "strategy": r.strategy or "",
            "seed": r.seed,
            "fold": r.fold_id,
            "n_train": r.n_train,
            "n_validation": r.confusion.total,
            "weighted_f1": r.weighted_f1,
            "accuracy": r.accuracy,
            "fallback_rate": r.fallback_rate,
        }
        for r in reports
    ]
    return pd.DataFrame(rows, columns=CELL_COLUMNS)


def summary_frame(summaries: Sequence[MethodSummary]) -> pd.DataFrame:
    return pd.DataFrame([s._asdict() for s in summaries], columns=SUMMARY_COLUMNS)


def write_cells(reports: Iterable[EvalReport], path: Path) -> Path:
    return _write(cells_frame(reports), path)


def write_summary_csv(summaries: Sequence[MethodSummary], path: Path) -> Path:
    return _write(summary_frame(summaries), path)


def curse_line(curse: CurseCheck, c: int, n: int, m: int, k: int) -> str:
    verdict = "satisfied" if curse.satisfied else "NOT satisfied"
    return f"curse condition C^N < M/K: C={c} N={n} M={m} K={k} lhs={curse.lhs:g} rhs={curse.rhs:g} -> {verdict}"


def render_table(summaries: Sequence[MethodSummary], dataset_name: str) -> str:
    """
    Plain-text table, one row per method: weighted F1 in percent
    (mean / median / std over fold x seed cells).
    """
    frame = pd.DataFrame(
        {
            "method": [s.method for s in summaries],
            "cells": [s.cells for s in summaries],
            "F1 mean": [f"{100 * s.f1_mean:.1f}" for s in summaries],
            "F1 median": [f"{100 * s.f1_median:.1f}" for s in summaries],
            "F1 std": [f"{100 * s.f1_std:.1f}" for s in summaries],
            "acc median": [f"{100 * s.accuracy_median:.1f}" for s in summaries],
        }
    )
    title = f"weighted F1 (%) on {dataset_name}"
    return title + "\n" + frame.to_string(index=False) + "\n"


def write_summary_text(
    summaries: Sequence[MethodSummary],
    dataset_name: str,
    curse_text: str,
    path: Path,
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(curse_text + "\n\n" + render_table(summaries, dataset_name), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_curves(rows: List[Tuple[int, str, str, float]], path: Path) -> Path:
    return _write(pd.DataFrame(rows, columns=CURVE_COLUMNS), path)


def write_gaps(rows: List[Tuple[int, str, float, float, float]], path: Path) -> Path:
    return _write(pd.DataFrame(rows, columns=GAP_COLUMNS), path)


def write_complexity(rows: Sequence[ComplexityRow], path: Optional[Path]) -> str:
    frame = pd.DataFrame([r._asdict() for r in rows], columns=list(ComplexityRow._fields))
    if path is not None:
        _write(frame, path)
    return frame.to_string(index=False)


def predictions_frame(
    decisions: BatchDecision,
    label_names: Sequence[str],
    class_count: int,
) -> pd.DataFrame:
    names = list(label_names) or [str(i) for i in range(class_count)]
    prob_cols = [f"p_{n}" for n in names]
    columns = ["row", "label", "label_name", "fallback_used"] + prob_cols
    n = len(decisions.labels)
    if n == 0:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(
        {
            "row": np.arange(n),
            "label": decisions.labels,
            "label_name": [names[i] for i in decisions.labels],
            "fallback_used": decisions.fallback_used.astype(int),
        }
    )
    post = decisions.posteriors if decisions.posteriors is not None else np.full((n, class_count), np.nan)
    for j, col in enumerate(prob_cols):
        frame[col] = post[:, j]
    return frame[columns]


def write_predictions(frame: pd.DataFrame, path: Path) -> Path:
    return _write(frame, path)
