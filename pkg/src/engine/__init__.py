# src/engine/__init__.py
from .data import Dataset, FoldSplit, Standardizer, inverted_stratified_kfold, load_csv, per_class_splits
from .decision import BatchDecision, Decision, DecisionStrategy, StrategyKind, predict, predict_batch
from .errors import ErrorCategory, RfmlpError
from .forest import ForestModel, PriorMode, train_forest
from .metrics import EvalReport, aggregate, evaluate, weighted_f1
from .mlp import MlpModel, TrainConfig, TrainHistory, train_mlp
from .model_io import load_forest, save_forest

__all__ = [
    "Dataset",
    "FoldSplit",
    "Standardizer",
    "inverted_stratified_kfold",
    "load_csv",
    "per_class_splits",
    "BatchDecision",
    "Decision",
    "DecisionStrategy",
    "StrategyKind",
    "predict",
    "predict_batch",
    "ErrorCategory",
    "RfmlpError",
    "ForestModel",
    "PriorMode",
    "train_forest",
    "EvalReport",
    "aggregate",
    "evaluate",
    "weighted_f1",
    "MlpModel",
    "TrainConfig",
    "TrainHistory",
    "train_mlp",
    "load_forest",
    "save_forest",
]
