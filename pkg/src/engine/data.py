# src/engine/data.py
"""
Dataset ingestion, train-fold standardization and the inverted stratified
K-fold protocol (train on one fold, validate on the other K-1).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ArgumentError, DataError, DimensionError, StratificationError
from .types import Indices, Labels, Matrix, Vector

logger = logging.getLogger("rfmlp")

STD_FLOOR = 1e-8


# -------------------------
# Data model
# -------------------------
@dataclass(frozen=True, eq=False)
class Dataset:
    features: Matrix
    labels: Labels
    class_count: int
    feature_names: Tuple[str, ...]
    label_names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        x = self.features
        if x.ndim != 2:
            raise DimensionError(f"features must be 2-d, got ndim={x.ndim}")
        if self.labels.shape != (x.shape[0],):
            raise DimensionError(
                f"labels length {self.labels.shape} does not match {x.shape[0]} rows"
            )
        if len(self.feature_names) != x.shape[1]:
            raise DimensionError(
                f"{len(self.feature_names)} feature names for {x.shape[1]} columns"
            )
        if not np.all(np.isfinite(x)):
            raise DataError("features contain NaN or Inf")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataError(f"labels must lie in [0, {self.class_count})")
        missing = set(range(self.class_count)) - set(np.unique(self.labels).tolist())
        if missing:
            raise DataError(f"classes without samples: {sorted(missing)}")

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Sequence[int]) -> Tuple[Matrix, Labels]:
        idx = np.asarray(indices, dtype=np.int64)
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True, eq=False)
class FoldSplit:
    train_indices: Indices
    validation_indices: Indices
    fold_id: int
    k: int


@dataclass(frozen=True, eq=False)
class Standardizer:
    means: Vector
    stddevs: Vector

    @property
    def n_features(self) -> int:
        return int(self.means.shape[0])


class CurseCheck(NamedTuple):
    satisfied: bool
    lhs: float
    rhs: float


# -------------------------
# CSV ingestion
# -------------------------
def _read_table(path: Path, delimiter: str) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(f"Missing {path}")
    try:
        return pd.read_csv(
            path,
            sep=delimiter,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: {e}") from e


def _parse_numeric(frame: pd.DataFrame, path: Path) -> Matrix:
    out = np.empty(frame.shape, dtype=np.float64)
    for j, col in enumerate(frame.columns):
        raw = frame[col].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(parsed)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            # +2: 1-based lines and the header row
            raise DataError(
                f"{path}: unparseable cell {raw.iloc[i]!r} at line {i + 2}, column {col!r}"
            )
        out[:, j] = parsed
    return out


def load_csv(path: str | Path, label_column: str, delimiter: str = ",") -> Dataset:
    """
    Reads a header-first delimited table. The label column may hold any
    strings; they are mapped to 0..C-1 in sorted order. All other columns
    must be real-valued (UCI tables or precomputed image embeddings).
    """
    p = Path(path)
    frame = _read_table(p, delimiter)
    frame.columns = [str(c).strip() for c in frame.columns]
    if label_column not in frame.columns:
        raise DataError(f"{p}: label column {label_column!r} not found in {list(frame.columns)}")

    raw_labels = frame[label_column].str.strip()
    names = tuple(sorted(set(raw_labels.tolist())))
    if len(names) < 2:
        raise DataError(f"{p}: need at least 2 classes, found {len(names)}")

    feature_frame = frame.drop(columns=[label_column])
    if feature_frame.shape[1] == 0:
        raise DataError(f"{p}: no feature columns besides {label_column!r}")

    lookup = {name: i for i, name in enumerate(names)}
    labels = np.array([lookup[v] for v in raw_labels], dtype=np.int64)
    ds = Dataset(
        features=_parse_numeric(feature_frame, p),
        labels=labels,
        class_count=len(names),
        feature_names=tuple(feature_frame.columns),
        label_names=names,
    )
    logger.info("loaded %s: M=%d N=%d C=%d", p.name, ds.n_samples, ds.n_features, ds.class_count)
    return ds


def load_features(
    path: str | Path,
    delimiter: str = ",",
    drop_column: Optional[str] = None,
) -> Tuple[Matrix, Tuple[str, ...]]:
    """
    Feature-only reader for prediction inputs. An empty or header-only
    file gives a 0-row matrix.
    """
    p = Path(path)
    frame = _read_table(p, delimiter)
    frame.columns = [str(c).strip() for c in frame.columns]
    if drop_column and drop_column in frame.columns:
        frame = frame.drop(columns=[drop_column])
    if frame.shape[0] == 0:
        return np.zeros((0, frame.shape[1])), tuple(frame.columns)
    return _parse_numeric(frame, p), tuple(frame.columns)


# -------------------------
# Standardization
# -------------------------
def fit_standardizer(ds: Dataset, indices: Sequence[int]) -> Standardizer:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ArgumentError("fit_standardizer needs at least one row")
    return standardizer_from_rows(ds.features[idx])


def standardizer_from_rows(x: Matrix) -> Standardizer:
    if x.shape[0] == 0:
        raise ArgumentError("fit_standardizer needs at least one row")
    means = x.mean(axis=0)
    # constant columns: the mean is the value itself, so they map to exact zeros
    constant = np.all(x == x[0], axis=0)
    means[constant] = x[0, constant]
    stddevs = np.sqrt(np.mean((x - means) ** 2, axis=0))
    return Standardizer(means=means, stddevs=np.maximum(stddevs, STD_FLOOR))


def identity_standardizer(n_features: int) -> Standardizer:
    return Standardizer(means=np.zeros(n_features), stddevs=np.ones(n_features))


def apply_standardizer(s: Standardizer, features: Matrix) -> Matrix:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != s.n_features:
        raise DimensionError(f"expected {s.n_features} feature columns, found {x.shape[-1]}")
    return (x - s.means) / s.stddevs


# -------------------------
# Splitting
# -------------------------
def _check_class_sizes(ds: Dataset, minimum: int, what: str) -> None:
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    small = [(c, int(n)) for c, n in enumerate(counts) if n < minimum]
    if small:
        raise StratificationError(
            f"{what}: every class needs at least {minimum} samples; too small: {small}"
        )


def _split(ds: Dataset, train_mask: np.ndarray, fold_id: int, k: int) -> FoldSplit:
    return FoldSplit(
        train_indices=np.flatnonzero(train_mask).astype(np.int64),
        validation_indices=np.flatnonzero(~train_mask).astype(np.int64),
        fold_id=fold_id,
        k=k,
    )


def inverted_stratified_kfold(ds: Dataset, k: int, seed: int) -> List[FoldSplit]:
    """
    Shuffles each class with a seeded generator and deals its samples
    round-robin into k folds (the deal continues across classes so fold
    sizes stay balanced). Split i trains on fold i only.
    """
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    _check_class_sizes(ds, k, f"inverted {k}-fold")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(ds.n_samples, dtype=np.int64)
    offset = 0
    for c in range(ds.class_count):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        fold_of[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k

    return [_split(ds, fold_of == i, i, k) for i in range(k)]


def per_class_splits(ds: Dataset, per_class: int, n_splits: int, seed: int) -> List[FoldSplit]:
    """
    Each split trains on exactly `per_class` samples of every class and
    validates on everything else. Splits are independent seeded draws.
    """
    if per_class < 1 or n_splits < 1:
        raise ArgumentError("per_class and n_splits must be >= 1")
    _check_class_sizes(ds, per_class + 1, f"{per_class} per class")

    rng = np.random.default_rng(seed)
    splits: List[FoldSplit] = []
    for i in range(n_splits):
        mask = np.zeros(ds.n_samples, dtype=bool)
        for c in range(ds.class_count):
            members = np.flatnonzero(ds.labels == c)
            mask[rng.choice(members, size=per_class, replace=False)] = True
        splits.append(_split(ds, mask, i, n_splits))
    return splits


def curse_condition(c: int, n: int, m: int, k: int) -> CurseCheck:
    """
    Advisory data-starvation check C^N < M/K. Never gates execution.
    """
    if min(c, n, m, k) < 1:
        raise ArgumentError("curse_condition inputs must all be >= 1")
    rhs = m / k
    try:
        lhs = float(c) ** n
    except OverflowError:
        lhs = math.inf
    return CurseCheck(satisfied=bool(lhs < rhs), lhs=lhs, rhs=rhs)
