# src/engine/mlp.py
"""
Single-hidden-layer softmax MLP (d_in -> h -> C) trained with Adam.

- ReLU hidden layer, softmax output, mean categorical cross-entropy
- He initialization, zero biases
- step LR schedule, fixed number of sampled batches per epoch
- early stopping on a stratified holdout carved from the training rows
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import ArgumentError, ConfigError, DimensionError
from .types import Labels, Matrix, Vector

logger = logging.getLogger("rfmlp")

DEFAULT_HIDDEN = 100


# -------------------------
# Data model
# -------------------------
class MlpParams(NamedTuple):
    w1: Matrix   # d_in x h
    b1: Vector   # h
    w2: Matrix   # h x C
    b2: Vector   # C


@dataclass
class MlpModel:
    w1: Matrix
    b1: Vector
    w2: Matrix
    b2: Vector

    @property
    def d_in(self) -> int:
        return int(self.w1.shape[0])

    @property
    def hidden_size(self) -> int:
        return int(self.w1.shape[1])

    @property
    def class_count(self) -> int:
        return int(self.w2.shape[1])

    def params(self) -> MlpParams:
        return MlpParams(self.w1, self.b1, self.w2, self.b2)

    def copy(self) -> "MlpModel":
        return MlpModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    @classmethod
    def from_params(cls, params: MlpParams) -> "MlpModel":
        return cls(*(np.array(p, dtype=np.float64) for p in params))


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "AdamState":
        return cls(
            m=_like(params, [np.zeros_like(p) for p in params]),
            v=_like(params, [np.zeros_like(p) for p in params]),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batches_per_epoch: int = 200
    batch_size: Optional[int] = None      # None -> min(32, train size)
    lr_initial: float = 1e-3
    lr_after_drop: float = 1e-4
    lr_drop_epoch: int = 50
    early_stop_patience: int = 10
    holdout_fraction: float = 0.2
    hidden_size: int = DEFAULT_HIDDEN
    seed: int = 0

    def __post_init__(self) -> None:
        counts = {
            "epochs": self.epochs,
            "batches_per_epoch": self.batches_per_epoch,
            "lr_drop_epoch": self.lr_drop_epoch,
            "early_stop_patience": self.early_stop_patience,
            "hidden_size": self.hidden_size,
        }
        if self.batch_size is not None:
            counts["batch_size"] = self.batch_size
        low = [k for k, v in counts.items() if int(v) < 1]
        if low:
            raise ConfigError(f"TrainConfig counts must be >= 1: {low}")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")
        if self.lr_initial <= 0 or self.lr_after_drop <= 0:
            raise ConfigError("learning rates must be > 0")


@dataclass
class TrainHistory:
    train_accuracy: List[float] = field(default_factory=list)
    holdout_accuracy: List[float] = field(default_factory=list)   # NaN when no holdout
    loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    last_improvement: int = 0       # last epoch holdout accuracy strictly rose
    early_stopping: bool = True
    # positions (into the rows passed to train_mlp) the optimizer saw
    fit_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)
    snapshots: List[MlpModel] = field(default_factory=list, repr=False)

    @property
    def completed_epochs(self) -> int:
        return len(self.loss)


class LossAndGrads(NamedTuple):
    loss: float
    grads: MlpParams


# -------------------------
# Network
# -------------------------
def init_mlp(d_in: int, hidden: int, classes: int, seed: int) -> MlpModel:
    if classes < 2:
        raise ArgumentError(f"need at least 2 classes, got {classes}")
    if d_in < 1 or hidden < 1:
        raise ArgumentError(f"d_in and hidden must be >= 1, got {d_in}, {hidden}")
    rng = np.random.default_rng(seed)
    return MlpModel(
        w1=rng.standard_normal((d_in, hidden)) * math.sqrt(2.0 / d_in),
        b1=np.zeros(hidden),
        w2=rng.standard_normal((hidden, classes)) * math.sqrt(2.0 / hidden),
        b2=np.zeros(classes),
    )


def softmax(logits: Matrix) -> Matrix:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _log_softmax(logits: Matrix) -> Matrix:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def _check_inputs(model: MlpModel, xs: Matrix) -> Matrix:
    x = np.asarray(xs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d_in:
        raise DimensionError(f"expected rows of length {model.d_in}, got shape {x.shape}")
    return x


def forward_batch(model: MlpModel, xs: Matrix) -> Matrix:
    x = _check_inputs(model, xs)
    hidden = np.maximum(x @ model.w1 + model.b1, 0.0)
    return softmax(hidden @ model.w2 + model.b2)


def forward(model: MlpModel, x: Vector) -> Vector:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"forward takes one sample, got shape {v.shape}")
    return forward_batch(model, v[None, :])[0]


def predict_labels(model: MlpModel, xs: Matrix) -> Labels:
    return np.argmax(forward_batch(model, xs), axis=1).astype(np.int64)


def accuracy(model: MlpModel, xs: Matrix, ys: Labels) -> float:
    if len(ys) == 0:
        return math.nan
    return float(np.mean(predict_labels(model, xs) == ys))


def loss_and_grads(model: MlpModel, xs: Matrix, ys: Labels) -> LossAndGrads:
    x = _check_inputs(model, xs)
    y = np.asarray(ys, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ArgumentError("loss_and_grads needs a non-empty batch")
    if y.shape != (n,):
        raise DimensionError(f"{y.shape[0] if y.ndim else 0} labels for {n} rows")
    if y.min() < 0 or y.max() >= model.class_count:
        raise ArgumentError(f"labels must lie in [0, {model.class_count})")

    z1 = x @ model.w1 + model.b1
    a1 = np.maximum(z1, 0.0)
    logits = a1 @ model.w2 + model.b2
    logp = _log_softmax(logits)
    rows = np.arange(n)
    loss = float(-np.mean(logp[rows, y]))

    dz2 = np.exp(logp)
    dz2[rows, y] -= 1.0
    dz2 /= n
    da1 = dz2 @ model.w2.T
    dz1 = da1 * (z1 > 0.0)
    grads = MlpParams(
        w1=x.T @ dz1,
        b1=dz1.sum(axis=0),
        w2=a1.T @ dz2,
        b2=dz2.sum(axis=0),
    )
    return LossAndGrads(loss, grads)


# -------------------------
# Optimizer / schedule
# -------------------------
def _like(template, items):
    if isinstance(template, MlpParams):
        return MlpParams(*items)
    return tuple(items)


def adam_step(
    state: AdamState,
    params: MlpParams,
    grads: MlpParams,
    lr: float,
) -> Tuple[MlpParams, AdamState]:
    """
    One bias-corrected Adam update. Inputs are left untouched.
    """
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise DimensionError("adam_step: parameter and gradient shapes differ")
    if any(p.shape != m.shape for p, m in zip(params, state.m)):
        raise DimensionError("adam_step: optimizer state does not match parameters")

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * mi + (1.0 - b1) * g for mi, g in zip(state.m, grads)]
    v = [b2 * vi + (1.0 - b2) * g * g for vi, g in zip(state.v, grads)]
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params = [
        p - lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps)
        for p, mi, vi in zip(params, m, v)
    ]
    new_state = AdamState(
        m=_like(params, m),
        v=_like(params, v),
        t=t,
        beta1=b1,
        beta2=b2,
        eps=state.eps,
    )
    return _like(params, new_params), new_state


def lr_schedule(cfg: TrainConfig, epoch: int) -> float:
    # epochs are 1-indexed; the drop applies strictly after lr_drop_epoch
    if epoch < 1:
        raise ArgumentError(f"epochs are 1-indexed, got {epoch}")
    return cfg.lr_initial if epoch <= cfg.lr_drop_epoch else cfg.lr_after_drop


# -------------------------
# Training
# -------------------------
def stratified_holdout(
    ys: Labels,
    class_count: int,
    fraction: float,
    rng: np.random.Generator,
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    Returns (fit_indices, holdout_indices) or None when some class cannot
    put at least one sample on each side.
    """
    if fraction <= 0.0:
        return None
    fit_parts: List[np.ndarray] = []
    hold_parts: List[np.ndarray] = []
    for c in range(class_count):
        members = np.flatnonzero(ys == c)
        if members.size < 2:
            return None
        n_hold = min(members.size - 1, max(1, int(round(fraction * members.size))))
        shuffled = rng.permutation(members)
        hold_parts.append(shuffled[:n_hold])
        fit_parts.append(shuffled[n_hold:])
    return np.sort(np.concatenate(fit_parts)), np.sort(np.concatenate(hold_parts))


def train_mlp(
    xs: Matrix,
    ys: Labels,
    cfg: TrainConfig,
    rng_seed: Optional[int] = None,
    class_count: Optional[int] = None,
    keep_snapshots: bool = False,
    early_stop: bool = True,
) -> Tuple[MlpModel, TrainHistory]:
    """
    Trains one MLP and returns the parameters of the best holdout epoch.

    Each epoch draws cfg.batches_per_epoch batches with replacement.
    Training stops once holdout accuracy has not strictly improved for
    cfg.early_stop_patience epochs. Among epochs tied at the best holdout
    accuracy the latest one is returned.

    Without a usable holdout, or with early_stop=False, every epoch runs and
    the last parameters are returned. The holdout is still carved off and
    tracked when early_stop=False. rng_seed defaults to cfg.seed.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ArgumentError("train_mlp needs a non-empty 2-d training set")
    if y.shape != (x.shape[0],):
        raise DimensionError(f"{y.shape} labels for {x.shape[0]} rows")
    classes = int(class_count if class_count is not None else y.max() + 1)

    rng = np.random.default_rng(cfg.seed if rng_seed is None else rng_seed)
    split = stratified_holdout(y, classes, cfg.holdout_fraction, rng)
    history = TrainHistory(early_stopping=split is not None and early_stop)
    if split is None:
        if cfg.holdout_fraction > 0:
            logger.warning(
                "train_mlp: %d rows cannot hold out one sample per class; early stopping disabled",
                x.shape[0],
            )
        fit_idx = np.arange(x.shape[0])
        x_hold, y_hold = x[:0], y[:0]
    else:
        fit_idx, hold_idx = split
        x_hold, y_hold = x[hold_idx], y[hold_idx]
    x_fit, y_fit = x[fit_idx], y[fit_idx]
    history.fit_indices = np.asarray(fit_idx, dtype=np.int64)

    model = init_mlp(x.shape[1], cfg.hidden_size, classes, int(rng.integers(2**63 - 1)))
    params = model.params()
    state = AdamState.zeros_like(params)
    batch_size = cfg.batch_size or min(32, x_fit.shape[0])

    best_acc = -math.inf
    best_params = params

    for epoch in range(1, cfg.epochs + 1):
        lr = lr_schedule(cfg, epoch)
        losses = np.empty(cfg.batches_per_epoch)
        for b in range(cfg.batches_per_epoch):
            idx = rng.integers(0, x_fit.shape[0], size=batch_size)
            losses[b], grads = loss_and_grads(MlpModel(*params), x_fit[idx], y_fit[idx])
            params, state = adam_step(state, params, grads, lr)

        current = MlpModel(*params)
        history.loss.append(float(losses.mean()))
        history.train_accuracy.append(accuracy(current, x_fit, y_fit))
        history.holdout_accuracy.append(accuracy(current, x_hold, y_hold))
        if keep_snapshots:
            history.snapshots.append(current.copy())
        logger.debug(
            "epoch %d lr=%g loss=%.4f train=%.3f holdout=%.3f",
            epoch, lr, history.loss[-1], history.train_accuracy[-1], history.holdout_accuracy[-1],
        )

        if not history.early_stopping:
            best_params, history.best_epoch = params, epoch
            continue
        acc = history.holdout_accuracy[-1]
        if acc > best_acc:
            best_acc, history.last_improvement = acc, epoch
        if acc >= best_acc:
            best_params, history.best_epoch = params, epoch
        if epoch - history.last_improvement >= cfg.early_stop_patience:
            logger.debug("early stop at epoch %d (best %d)", epoch, history.best_epoch)
            break

    return MlpModel.from_params(best_params), history
