# src/engine/forest.py
"""
MLP forest: one member per left-out feature, optional PCA whitening of
the feature space, and the classifier priors used by the probabilistic
decision strategies.

Member j never sees feature j. For whitened forests "feature j" is the
j-th whitened coordinate (eigenvalue order), otherwise it is the j-th
standardized raw column.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data import Standardizer, apply_standardizer, standardizer_from_rows
from .errors import ArgumentError, ConfigError, DimensionError
from .linalg import jacobi_eigh, matmul
from .mlp import MlpModel, TrainConfig, TrainHistory, forward_batch, train_mlp
from .types import Labels, Matrix, Vector

logger = logging.getLogger("rfmlp")

EIGENVALUE_FLOOR = 1e-8


class PriorMode(str, Enum):
    EQUIPROBABLE = "equiprobable"
    WEIGHTED = "weighted"


# -------------------------
# Data model
# -------------------------
@dataclass(frozen=True)
class FeatureSubset:
    excluded_index: int
    retained_indices: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class WhiteningTransform:
    means: Vector
    eigenvectors: Matrix          # N x N, columns paired with eigenvalues
    eigenvalues: Vector           # descending, already floored
    eigenvalue_floor: float = EIGENVALUE_FLOOR

    @property
    def n_features(self) -> int:
        return int(self.means.shape[0])


@dataclass(frozen=True, eq=False)
class ForestModel:
    members: Tuple[MlpModel, ...]
    subsets: Tuple[FeatureSubset, ...]
    standardizer: Standardizer
    whitening: Optional[WhiteningTransform]
    priors_equiprobable: Vector
    priors_weighted: Optional[Vector]
    class_count: int
    feature_names: Tuple[str, ...] = ()
    label_names: Tuple[str, ...] = ()
    histories: Tuple[TrainHistory, ...] = field(default=(), repr=False)

    @property
    def n_features(self) -> int:
        return len(self.subsets)

    @property
    def whitened(self) -> bool:
        return self.whitening is not None

    @property
    def hidden_size(self) -> int:
        return self.members[0].hidden_size

    def priors(self, mode: PriorMode) -> Vector:
        if mode == PriorMode.EQUIPROBABLE:
            return self.priors_equiprobable
        if self.priors_weighted is None:
            raise ConfigError("weighted priors need a forest trained with whitening")
        return self.priors_weighted

    def with_members(self, members: Tuple[MlpModel, ...]) -> "ForestModel":
        """Same transforms and priors, different member parameters (epoch snapshots)."""
        return ForestModel(
            members=members,
            subsets=self.subsets,
            standardizer=self.standardizer,
            whitening=self.whitening,
            priors_equiprobable=self.priors_equiprobable,
            priors_weighted=self.priors_weighted,
            class_count=self.class_count,
            feature_names=self.feature_names,
            label_names=self.label_names,
        )


class ComplexityRow(NamedTuple):
    subspace_dim: int
    members: int
    parameters: int


# -------------------------
# Subsets
# -------------------------
def generate_subsets(n_features: int) -> List[FeatureSubset]:
    if n_features < 2:
        raise ArgumentError(f"need at least 2 features to leave one out, got {n_features}")
    return [
        FeatureSubset(
            excluded_index=j,
            retained_indices=tuple(i for i in range(n_features) if i != j),
        )
        for j in range(n_features)
    ]


def subspace_parameter_count(n_features: int, subspace_dim: int, hidden: int, classes: int) -> int:
    """
    Trainable parameters of a forest holding one MLP per subspace of the
    given dimensionality.
    """
    if not 1 <= subspace_dim <= n_features:
        raise ArgumentError(f"subspace_dim must be in [1, {n_features}], got {subspace_dim}")
    per_member = subspace_dim * hidden + hidden + hidden * classes + classes
    return math.comb(n_features, subspace_dim) * per_member


def complexity_table(n_features: int, hidden: int, classes: int) -> List[ComplexityRow]:
    if n_features < 2:
        raise ArgumentError(f"need at least 2 features to leave one out, got {n_features}")
    return [
        ComplexityRow(
            subspace_dim=k,
            members=math.comb(n_features, k),
            parameters=subspace_parameter_count(n_features, k, hidden, classes),
        )
        for k in range(1, n_features)
    ]


# -------------------------
# Whitening
# -------------------------
def fit_whitening(x_train: Matrix, floor: float = EIGENVALUE_FLOOR) -> WhiteningTransform:
    x = np.asarray(x_train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ArgumentError("fit_whitening needs a 2-d matrix with at least 2 rows")
    if floor <= 0:
        raise ArgumentError(f"eigenvalue floor must be > 0, got {floor}")

    means = x.mean(axis=0)
    centered = x - means
    cov = matmul(centered.T, centered) / (x.shape[0] - 1)
    eig = jacobi_eigh((cov + cov.T) / 2.0)

    floored = int(np.sum(eig.eigenvalues < floor))
    if floored:
        logger.warning("fit_whitening: %d eigenvalue(s) below %g were floored", floored, floor)
    return WhiteningTransform(
        means=means,
        eigenvectors=eig.eigenvectors,
        eigenvalues=np.maximum(eig.eigenvalues, floor),
        eigenvalue_floor=floor,
    )


def apply_whitening(t: WhiteningTransform, x: Matrix) -> Matrix:
    # row-vector convention: (x - mean) P Lambda^-1/2
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != t.n_features:
        raise DimensionError(f"expected {t.n_features} feature columns, found {arr.shape[-1]}")
    return ((arr - t.means) @ t.eigenvectors) / np.sqrt(t.eigenvalues)


# -------------------------
# Priors
# -------------------------
def compute_priors(eigenvalues: Vector, mode: PriorMode) -> Vector:
    """
    equiprobable: 1/N for every member.
    weighted: member j (which drops whitened feature j) gets weight
    proportional to 1/lambda_j, so dropping a high-variance direction
    costs that member influence.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ArgumentError("compute_priors needs a non-empty eigenvalue vector")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ArgumentError("compute_priors needs strictly positive eigenvalues")

    n = lam.size
    mode = PriorMode(mode)
    if mode == PriorMode.EQUIPROBABLE or np.all(lam == lam[0]):
        return np.full(n, 1.0 / n)
    inv = 1.0 / lam
    return inv / inv.sum()


# -------------------------
# Training / inference
# -------------------------
def derive_seed(*parts: int) -> int:
    """Deterministic non-negative 63-bit seed from a tuple of integers."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)
    return int(state[0]) >> 1


def member_seed(base_seed: int, j: int) -> int:
    return derive_seed(base_seed, j)


def forest_inputs(f: ForestModel, x: Matrix) -> Matrix:
    """Raw features -> the space the members index into."""
    z = apply_standardizer(f.standardizer, x)
    if f.whitening is not None:
        z = apply_whitening(f.whitening, z)
    return z


def train_forest(
    x_train: Matrix,
    y_train: Labels,
    class_count: int,
    cfg: TrainConfig,
    whiten: bool,
    base_seed: int,
    standardizer: Optional[Standardizer] = None,
    n_jobs: int = 1,
    keep_snapshots: bool = False,
    early_stop: bool = True,
    feature_names: Tuple[str, ...] = (),
    label_names: Tuple[str, ...] = (),
) -> ForestModel:
    """
    Standardizes the training rows (or uses the given standardizer),
    optionally fits a whitening transform on them, then trains one MLP per
    leave-one-feature-out subset. Member j uses seed member_seed(base_seed, j),
    so the result does not depend on n_jobs.
    """
    x = np.asarray(x_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ArgumentError("train_forest needs a non-empty 2-d training set")
    subsets = generate_subsets(x.shape[1])

    std = standardizer or standardizer_from_rows(x)
    z = apply_standardizer(std, x)
    whitening = None
    if whiten:
        whitening = fit_whitening(z)
        z = apply_whitening(whitening, z)

    seeds = [member_seed(base_seed, s.excluded_index) for s in subsets]
    fitted = Parallel(n_jobs=n_jobs)(
        delayed(train_mlp)(
            z[:, list(s.retained_indices)],
            y,
            cfg,
            seed,
            class_count,
            keep_snapshots,
            early_stop,
        )
        for s, seed in zip(subsets, seeds)
    )
    members = tuple(m for m, _ in fitted)
    histories = tuple(h for _, h in fitted)
    logger.info(
        "trained forest: %d members, whiten=%s, epochs=%s",
        len(members), whiten, [h.completed_epochs for h in histories],
    )

    return ForestModel(
        members=members,
        subsets=tuple(subsets),
        standardizer=std,
        whitening=whitening,
        priors_equiprobable=compute_priors(np.ones(len(subsets)), PriorMode.EQUIPROBABLE),
        priors_weighted=(
            compute_priors(whitening.eigenvalues, PriorMode.WEIGHTED) if whitening is not None else None
        ),
        class_count=class_count,
        feature_names=tuple(feature_names),
        label_names=tuple(label_names),
        histories=histories,
    )


def member_probabilities_batch(f: ForestModel, xs: Matrix) -> np.ndarray:
    """(M samples, N members, C classes) member softmax outputs."""
    x = np.asarray(xs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != f.n_features:
        raise DimensionError(f"expected {f.n_features} feature columns, got shape {x.shape}")
    return member_probabilities_from_inputs(f, forest_inputs(f, x))


def member_probabilities_from_inputs(f: ForestModel, z: Matrix) -> np.ndarray:
    """Same as member_probabilities_batch, for rows already standardized (and whitened)."""
    out = np.empty((z.shape[0], len(f.members), f.class_count))
    for j, (member, subset) in enumerate(zip(f.members, f.subsets)):
        out[:, j, :] = forward_batch(member, z[:, list(subset.retained_indices)])
    return out


def member_probabilities(f: ForestModel, x: Vector) -> Matrix:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != f.n_features:
        raise DimensionError(f"expected {f.n_features} features, got shape {v.shape}")
    return member_probabilities_batch(f, v[None, :])[0]
