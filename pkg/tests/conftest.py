import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from utils.dynamics import PlantParams  # noqa: E402


@pytest.fixture
def plant():
    """Reference plant a = 10, b = -2."""
    return PlantParams(a=10.0, b=-2.0)


@pytest.fixture
def unit_plant():
    return PlantParams(a=1.0, b=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20210)


@pytest.fixture(autouse=True)
def _log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))
