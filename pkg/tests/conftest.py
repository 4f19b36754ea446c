from __future__ import annotations

import pathlib

import pandas as pd
import pytest

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris() -> pd.DataFrame:
    """The 150-flower table: four measurements plus Species, ids 1..150."""
    return pd.read_csv(DATA_DIR / "iris.csv")


@pytest.fixture()
def iris_path() -> pathlib.Path:
    return DATA_DIR / "iris.csv"
