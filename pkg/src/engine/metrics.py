# src/engine/metrics.py
"""
Confusion matrix, support-weighted F1 and per-run evaluation reports.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional

import numpy as np
from sklearn.metrics import confusion_matrix

from .errors import ArgumentError, DimensionError
from .types import Labels, Vector


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray   # rows = true class, cols = predicted

    @property
    def class_count(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0 where the denominator is 0
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def confusion(y_true: Labels, y_pred: Labels, c: int) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise DimensionError(f"label vectors differ in shape: {t.shape} vs {p.shape}")
    if c < 1:
        raise ArgumentError(f"class count must be >= 1, got {c}")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= c):
        raise ArgumentError(f"labels must lie in [0, {c})")
    if t.size == 0:
        return ConfusionMatrix(np.zeros((c, c), dtype=np.int64))
    return ConfusionMatrix(confusion_matrix(t, p, labels=list(range(c))).astype(np.int64))


def precision_recall_f1(cm: ConfusionMatrix):
    tp = np.diag(cm.counts).astype(np.float64)
    precision = _safe_ratio(tp, cm.counts.sum(axis=0).astype(np.float64))
    recall = _safe_ratio(tp, cm.support.astype(np.float64))
    f1 = _safe_ratio(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def weighted_f1(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ArgumentError("weighted_f1 needs at least one evaluated sample")
    _, _, f1 = precision_recall_f1(cm)
    weights = cm.support / cm.total
    return float(np.sum(weights * f1))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ArgumentError("accuracy needs at least one evaluated sample")
    return float(np.trace(cm.counts) / cm.total)


# -------------------------
# Reports
# -------------------------
@dataclass(frozen=True, eq=False)
class EvalReport:
    method: str
    fold_id: int
    seed: int
    weighted_f1: float
    accuracy: float
    precision: Vector
    recall: Vector
    f1: Vector
    confusion: ConfusionMatrix
    strategy: Optional[str] = None
    n_train: int = 0
    fallback_rate: float = 0.0


def evaluate(
    y_true: Labels,
    y_pred: Labels,
    c: int,
    method: str,
    fold_id: int,
    seed: int,
    strategy: Optional[str] = None,
    n_train: int = 0,
    fallback_used: Optional[np.ndarray] = None,
) -> EvalReport:
    cm = confusion(y_true, y_pred, c)
    precision, recall, f1 = precision_recall_f1(cm)
    return EvalReport(
        method=method,
        fold_id=fold_id,
        seed=seed,
        weighted_f1=weighted_f1(cm),
        accuracy=accuracy(cm),
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=cm,
        strategy=strategy,
        n_train=n_train,
        fallback_rate=float(np.mean(fallback_used)) if fallback_used is not None and len(fallback_used) else 0.0,
    )


class MethodSummary(NamedTuple):
    method: str
    cells: int
    f1_mean: float
    f1_median: float
    f1_std: float
    accuracy_mean: float
    accuracy_median: float
    accuracy_std: float


def _describe(values: np.ndarray):
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), float(np.median(values)), std


def aggregate(reports: Iterable[EvalReport]) -> List[MethodSummary]:
    """Per-method mean/median/sample-std, methods in first-seen order."""
    grouped: Dict[str, List[EvalReport]] = {}
    for r in reports:
        grouped.setdefault(r.method, []).append(r)

    out: List[MethodSummary] = []
    for method, rs in grouped.items():
        f1 = _describe(np.array([r.weighted_f1 for r in rs]))
        acc = _describe(np.array([r.accuracy for r in rs]))
        out.append(MethodSummary(method, len(rs), *f1, *acc))
    return out
