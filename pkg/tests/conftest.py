import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

DATA_ROOT = Path(os.environ.get("CET_DATA_ROOT", "data"))
FB15KET_DIR = DATA_ROOT / "FB15kET"
YAGO43KET_DIR = DATA_ROOT / "YAGO43kET"

requires_fb15ket = pytest.mark.skipif(
    not (FB15KET_DIR / "train.txt").exists(),
    reason=f"FB15kET dataset not found under {FB15KET_DIR}; set CET_DATA_ROOT",
)
requires_yago43ket = pytest.mark.skipif(
    not (YAGO43KET_DIR / "train.txt").exists(),
    reason=f"YAGO43kET dataset not found under {YAGO43KET_DIR}; set CET_DATA_ROOT",
)
