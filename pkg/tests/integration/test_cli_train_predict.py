from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.bench.cli import main
from src.engine.data import load_csv
from src.engine.decision import DecisionStrategy, predict_batch
from src.engine.model_io import dumps_forest, load_forest

ROOT = Path(__file__).resolve().parents[2]
DATA = ROOT / "tests" / "fixtures" / "data"

PREDICTION_HEADER = "row,label,label_name,fallback_used,p_a,p_b,p_c"


def _memorizing_config(tmp_path: Path, strategies: str = "[majority_vote, equiprobable, weighted_probability]") -> Path:
    cfg = tmp_path / "train.yaml"
    cfg.write_text(
        f"dataset: {{path: '{(DATA / 'blobs.csv').as_posix()}', label_column: label}}\n"
        "seeds: [0]\n"
        f"strategies: {strategies}\n"
        "train:\n"
        "  epochs: 30\n"
        "  batches_per_epoch: 20\n"
        "  hidden_size: 16\n"
        "  lr_initial: 0.01\n"
        "  lr_drop_epoch: 25\n"
        "  holdout_fraction: 0.0\n",
        encoding="utf-8",
    )
    return cfg


@pytest.fixture
def trained_model(tmp_path):
    model = tmp_path / "blobs.rfmlp"
    assert main(["train", "--config", str(_memorizing_config(tmp_path)), "--model", str(model)]) == 0
    return model


def test_train_writes_reloadable_model(trained_model):
    forest = load_forest(trained_model)
    assert forest.whitened
    assert forest.n_features == 3
    assert len(forest.members) == 3
    assert forest.label_names == ("a", "b", "c")
    assert dumps_forest(forest) == trained_model.read_bytes()


def test_train_is_deterministic(tmp_path, trained_model):
    again = tmp_path / "again.rfmlp"
    assert main(["train", "--config", str(_memorizing_config(tmp_path)), "--model", str(again)]) == 0
    assert again.read_bytes() == trained_model.read_bytes()


@pytest.mark.parametrize("strategy", ["majority_vote", "equiprobable", "weighted_probability"])
def test_predict_training_file_recovers_labels(tmp_path, trained_model, strategy):
    out = tmp_path / f"{strategy}.csv"
    args = [
        "predict", "--model", str(trained_model), "--input", str(DATA / "blobs.csv"),
        "--label-column", "label", "--strategy", strategy, "--output", str(out),
    ]
    assert main(args) == 0
    pred = pd.read_csv(out)
    truth = load_csv(DATA / "blobs.csv", "label")
    assert list(pred.columns) == PREDICTION_HEADER.split(",")
    assert pred["row"].tolist() == list(range(24))
    assert pred["label"].tolist() == truth.labels.tolist()
    assert pred["label_name"].tolist() == [truth.label_names[i] for i in truth.labels]


def test_predict_matches_library_posteriors(tmp_path, trained_model):
    out = tmp_path / "pred.csv"
    args = ["predict", "--model", str(trained_model), "--input", str(DATA / "blobs_features.csv"), "--output", str(out)]
    assert main(args) == 0
    pred = pd.read_csv(out)
    forest = load_forest(trained_model)
    expected = predict_batch(forest, load_csv(DATA / "blobs.csv", "label").features, DecisionStrategy.equiprobable())
    np.testing.assert_allclose(pred[["p_a", "p_b", "p_c"]].to_numpy(), expected.posteriors, atol=1e-6)
    np.testing.assert_allclose(pred[["p_a", "p_b", "p_c"]].sum(axis=1), 1.0, atol=1e-5)


def test_predict_default_output_path(tmp_path, trained_model):
    features = tmp_path / "rows.csv"
    features.write_bytes((DATA / "blobs_features.csv").read_bytes())
    assert main(["predict", "--model", str(trained_model), "--input", str(features)]) == 0
    assert (tmp_path / "rows.predictions.csv").exists()


def test_predict_wrong_column_count(tmp_path, trained_model, caplog):
    args = [
        "predict", "--model", str(trained_model), "--input", str(DATA / "two_columns.csv"),
        "--output", str(tmp_path / "out.csv"),
    ]
    with caplog.at_level("ERROR", logger="rfmlp"):
        assert main(args) == 3
    assert "expects 3 feature columns" in caplog.text
    assert "input has 2" in caplog.text
    assert not (tmp_path / "out.csv").exists()


def test_predict_empty_input(tmp_path, trained_model):
    out = tmp_path / "empty.predictions.csv"
    args = [
        "predict", "--model", str(trained_model), "--input", str(DATA / "features_header_only.csv"),
        "--output", str(out),
    ]
    assert main(args) == 0
    assert out.read_text(encoding="utf-8") == PREDICTION_HEADER + "\n"


def test_weighted_prediction_needs_whitened_model(tmp_path):
    model = tmp_path / "raw.rfmlp"
    cfg = _memorizing_config(tmp_path, strategies="[majority_vote]")
    assert main(["train", "--config", str(cfg), "--model", str(model)]) == 0
    assert not load_forest(model).whitened
    args = [
        "predict", "--model", str(model), "--input", str(DATA / "blobs_features.csv"),
        "--strategy", "weighted_probability", "--output", str(tmp_path / "out.csv"),
    ]
    assert main(args) == 7


def test_unwritable_model_path(tmp_path):
    model = tmp_path / "missing" / "dir" / "m.rfmlp"
    assert main(["train", "--config", str(_memorizing_config(tmp_path)), "--model", str(model)]) == 8


def test_missing_model_file(tmp_path):
    args = ["predict", "--model", str(tmp_path / "nope.rfmlp"), "--input", str(DATA / "blobs_features.csv")]
    assert main(args) == 8


def test_version_mismatch_exit_code(tmp_path, trained_model):
    blob = trained_model.read_bytes()
    tampered = tmp_path / "old.rfmlp"
    tampered.write_bytes(blob.replace(b'"version":"rfmlp-forest/1"', b'"version":"rfmlp-forest/0"'))
    args = ["predict", "--model", str(tampered), "--input", str(DATA / "blobs_features.csv")]
    assert main(args) == 9


def test_inconsistent_header_exit_code(tmp_path, trained_model):
    blob = trained_model.read_bytes()
    tampered = tmp_path / "wide.rfmlp"
    tampered.write_bytes(blob.replace(b'"n_features":3', b'"n_features":4'))
    args = ["predict", "--model", str(tampered), "--input", str(DATA / "blobs_features.csv")]
    assert main(args) == 8
