# src/bench/config.py
"""
RunConfig: one YAML file, validated against schema/run_config.schema.json,
then merged with command-line overrides.

Every key and its default is listed in docs/CONFIG.md.
"""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from jsonschema import Draft202012Validator

from ..engine.decision import DecisionStrategy, StrategyKind, parse_strategies
from ..engine.errors import ConfigError
from ..engine.mlp import TrainConfig
from . import settings

logger = logging.getLogger("rfmlp")

SCHEMA_PATH = Path(__file__).resolve().parent / "schema" / "run_config.schema.json"

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
ALL_STRATEGIES = tuple(k.value for k in StrategyKind)

RAW_FOREST = "forest_raw"
WHITENED_FOREST = "forest_whitened"


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    label_column: str
    delimiter: str = ","
    k_folds: int = 10
    split_mode: str = "kfold"          # "kfold" | "per_class"
    per_class: int = 5
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    strategies: Tuple[str, ...] = ALL_STRATEGIES
    vote_threshold: float = 0.5
    include_baseline_mlp: bool = True
    whiten: bool = False
    curve_fold: int = 0
    output_dir: str = settings.OUTPUT_DIR
    n_jobs: int = settings.N_JOBS
    train: TrainConfig = field(default_factory=TrainConfig)

    def decision_strategies(self) -> List[DecisionStrategy]:
        return parse_strategies(list(self.strategies), self.vote_threshold)

    def forest_variants(self) -> Dict[str, bool]:
        """
        Forests to train per cell, name -> whitened.

        weighted_probability always runs on a whitened forest. The other
        strategies run on the raw-feature forest unless `whiten` is set.
        """
        variants: Dict[str, bool] = {}
        for s in self.decision_strategies():
            name = self.forest_for(s)
            variants[name] = name == WHITENED_FOREST
        return dict(sorted(variants.items()))

    def forest_for(self, s: DecisionStrategy) -> str:
        if self.whiten or s.kind == StrategyKind.WEIGHTED_PROBABILITY:
            return WHITENED_FOREST
        return RAW_FOREST


# -------------------------
# Helpers
# -------------------------
def _deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _read_yaml(p: Path) -> Dict[str, Any]:
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{p}: invalid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return data


def validate_config_dict(data: Dict[str, Any]) -> None:
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    errors = sorted(Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = ".".join(str(x) for x in e.path) or "<root>"
        raise ConfigError(f"config {where}: {e.message}")


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    validate_config_dict(data)
    ds = data["dataset"]
    train = TrainConfig(**(data.get("train") or {}))
    cfg = RunConfig(
        dataset_path=str(ds["path"]),
        label_column=str(ds["label_column"]),
        delimiter=str(ds.get("delimiter", ",")),
        k_folds=int(data.get("k_folds", 10)),
        split_mode=str(data.get("split_mode", "kfold")),
        per_class=int(data.get("per_class", 5)),
        seeds=tuple(int(s) for s in data.get("seeds", DEFAULT_SEEDS)),
        strategies=tuple(data.get("strategies", ALL_STRATEGIES)),
        vote_threshold=float(data.get("vote_threshold", 0.5)),
        include_baseline_mlp=bool(data.get("include_baseline_mlp", True)),
        whiten=bool(data.get("whiten", False)),
        curve_fold=int(data.get("curve_fold", 0)),
        output_dir=str(data.get("output_dir", settings.OUTPUT_DIR)),
        n_jobs=int(data.get("n_jobs", settings.N_JOBS)),
        train=train,
    )
    if cfg.n_jobs == 0:
        raise ConfigError("n_jobs must be non-zero (negative counts back from the CPU count)")
    if StrategyKind.WEIGHTED_PROBABILITY.value in cfg.strategies and not cfg.whiten:
        logger.info(
            "weighted_probability requested with whiten=false: whitening forced for its forest"
        )
    return cfg


def load_run_config(path: Optional[str | Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    data: Dict[str, Any] = _read_yaml(Path(path)) if path else {}
    return run_config_from_dict(_deep_merge(data, overrides or {}))
