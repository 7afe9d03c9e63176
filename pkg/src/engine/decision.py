# src/engine/decision.py
"""
Decision function: fuses the N member probability rows of one sample
into a single label.

  majority_vote         member j votes argmax(row j) only if max(row j) > threshold;
                        plurality wins; no votes or a tied plurality falls back
                        to the plain average of all rows
  equiprobable          argmax of the uniform mixture of rows
  weighted_probability  argmax of the 1/lambda-weighted mixture (whitened forests)

Ties in any argmax resolve to the lowest class index.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import ArgumentError, ConfigError, DimensionError
from .forest import ForestModel, PriorMode, member_probabilities_batch
from .types import Labels, Matrix, Vector

ROW_SUM_TOL = 1e-6
PRIOR_SUM_TOL = 1e-9


class StrategyKind(str, Enum):
    MAJORITY_VOTE = "majority_vote"
    EQUIPROBABLE = "equiprobable"
    WEIGHTED_PROBABILITY = "weighted_probability"


@dataclass(frozen=True)
class DecisionStrategy:
    kind: StrategyKind
    threshold: float = 0.5   # majority vote only

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ArgumentError(f"vote threshold must be in (0, 1), got {self.threshold}")

    @classmethod
    def majority_vote(cls, threshold: float = 0.5) -> "DecisionStrategy":
        return cls(StrategyKind.MAJORITY_VOTE, threshold)

    @classmethod
    def equiprobable(cls) -> "DecisionStrategy":
        return cls(StrategyKind.EQUIPROBABLE)

    @classmethod
    def weighted(cls) -> "DecisionStrategy":
        return cls(StrategyKind.WEIGHTED_PROBABILITY)

    @property
    def needs_whitening(self) -> bool:
        return self.kind == StrategyKind.WEIGHTED_PROBABILITY


@dataclass(frozen=True, eq=False)
class Decision:
    label: int
    posterior: Optional[Vector] = None
    votes: Optional[Tuple[Optional[int], ...]] = None   # None entry = rejected member
    fallback_used: bool = False


@dataclass(frozen=True, eq=False)
class BatchDecision:
    labels: Labels
    posteriors: Optional[Matrix]      # rows are NaN where no posterior applies
    fallback_used: np.ndarray


# -------------------------
# Validation
# -------------------------
def _as_batch(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 3 or p.shape[1] == 0 or p.shape[2] == 0:
        raise ArgumentError(f"expected (samples, members, classes) probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ArgumentError("member probabilities must be finite and non-negative")
    if np.any(np.abs(p.sum(axis=2) - 1.0) > ROW_SUM_TOL):
        raise ArgumentError("every member probability row must sum to 1")
    return p


def _as_single(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ArgumentError(f"expected a non-empty (members, classes) matrix, got shape {p.shape}")
    return p[None, :, :]


def _check_priors(priors, n_members: int) -> Vector:
    w = np.asarray(priors, dtype=np.float64)
    if w.shape != (n_members,):
        raise DimensionError(f"expected {n_members} priors, got shape {w.shape}")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > PRIOR_SUM_TOL:
        raise ArgumentError("priors must be non-negative and sum to 1")
    return w


# -------------------------
# Strategies
# -------------------------
def vote_decide_batch(probs: np.ndarray, threshold: float = 0.5) -> BatchDecision:
    p = _as_batch(probs)
    m, _, c = p.shape
    winners = np.argmax(p, axis=2)
    accepted = np.max(p, axis=2) > threshold

    counts = np.zeros((m, c), dtype=np.int64)
    for cls in range(c):
        counts[:, cls] = np.sum((winners == cls) & accepted, axis=1)
    top = counts.max(axis=1)
    tied = np.sum(counts == top[:, None], axis=1) > 1
    fallback = (top == 0) | tied

    mean = p.mean(axis=1)
    labels = np.where(fallback, np.argmax(mean, axis=1), np.argmax(counts, axis=1))
    posteriors = np.where(fallback[:, None], mean, np.nan)
    return BatchDecision(labels=labels.astype(np.int64), posteriors=posteriors, fallback_used=fallback)


def vote_decide(probs: Matrix, threshold: float = 0.5) -> Decision:
    single = _as_single(probs)
    batch = vote_decide_batch(single, threshold)
    rows = single[0]
    votes = tuple(
        int(np.argmax(r)) if float(np.max(r)) > threshold else None
        for r in rows
    )
    fallback = bool(batch.fallback_used[0])
    return Decision(
        label=int(batch.labels[0]),
        posterior=batch.posteriors[0] if fallback else None,
        votes=votes,
        fallback_used=fallback,
    )


def prob_decide_batch(probs: np.ndarray, priors: Vector) -> BatchDecision:
    p = _as_batch(probs)
    w = _check_priors(priors, p.shape[1])
    posteriors = np.einsum("j,mjc->mc", w, p)
    return BatchDecision(
        labels=np.argmax(posteriors, axis=1).astype(np.int64),
        posteriors=posteriors,
        fallback_used=np.zeros(p.shape[0], dtype=bool),
    )


def prob_decide(probs: Matrix, priors: Vector) -> Decision:
    batch = prob_decide_batch(_as_single(probs), priors)
    return Decision(label=int(batch.labels[0]), posterior=batch.posteriors[0])


# -------------------------
# Forest dispatch
# -------------------------
def _priors_for(f: ForestModel, s: DecisionStrategy) -> Vector:
    if s.kind == StrategyKind.EQUIPROBABLE:
        return f.priors(PriorMode.EQUIPROBABLE)
    if not f.whitened:
        raise ConfigError("weighted_probability needs a forest trained with whitening")
    return f.priors(PriorMode.WEIGHTED)


def decide_batch(f: ForestModel, probs: np.ndarray, s: DecisionStrategy) -> BatchDecision:
    if s.kind == StrategyKind.MAJORITY_VOTE:
        return vote_decide_batch(probs, s.threshold)
    return prob_decide_batch(probs, _priors_for(f, s))


def predict_batch(f: ForestModel, xs: Matrix, s: DecisionStrategy) -> BatchDecision:
    if s.needs_whitening and not f.whitened:
        raise ConfigError("weighted_probability needs a forest trained with whitening")
    return decide_batch(f, member_probabilities_batch(f, xs), s)


def predict(f: ForestModel, x: Vector, s: DecisionStrategy) -> Decision:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"predict takes one sample, got shape {v.shape}")
    probs = member_probabilities_batch(f, v[None, :])[0]
    if s.kind == StrategyKind.MAJORITY_VOTE:
        return vote_decide(probs, s.threshold)
    return prob_decide(probs, _priors_for(f, s))


def parse_strategies(names: List[str], threshold: float = 0.5) -> List[DecisionStrategy]:
    out: List[DecisionStrategy] = []
    for name in names:
        try:
            kind = StrategyKind(str(name).strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown strategy {name!r}; expected one of {[k.value for k in StrategyKind]}"
            ) from None
        out.append(DecisionStrategy(kind, threshold if kind == StrategyKind.MAJORITY_VOTE else 0.5))
    return out
