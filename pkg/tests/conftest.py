import sys
from pathlib import Path

import pytest

# Add repo root so "import src...." works
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.engine.data import load_csv  # noqa: E402
from src.engine.mlp import TrainConfig  # noqa: E402

DATA = ROOT / "tests" / "fixtures" / "data"


@pytest.fixture
def blobs():
    # 3 classes x 8 rows, 3 features, well separated
    return load_csv(DATA / "blobs.csv", "label")


@pytest.fixture
def fast_cfg() -> TrainConfig:
    return TrainConfig(
        epochs=8,
        batches_per_epoch=10,
        hidden_size=8,
        early_stop_patience=3,
        lr_initial=1e-2,
        lr_after_drop=1e-3,
        lr_drop_epoch=5,
    )
