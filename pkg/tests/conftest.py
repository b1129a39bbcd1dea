import json
from pathlib import Path

import pytest

from tilekit.tileset import build_superset, load_tileset

DATA = Path(__file__).resolve().parents[1] / "src" / "tilekit" / "data"


def load_named(name):
    with open(DATA / f"{name}.json") as fh:
        return load_tileset(json.load(fh))


@pytest.fixture(scope="session")
def square_ts():
    return load_named("square")


@pytest.fixture(scope="session")
def domino_ts():
    return load_named("domino")


@pytest.fixture(scope="session")
def square_domino_ts():
    return load_named("square_domino")


@pytest.fixture(scope="session")
def tromino_ts():
    return load_named("tromino")


@pytest.fixture(scope="session")
def square_superset(square_ts):
    return build_superset(square_ts, rings=4)


@pytest.fixture(scope="session")
def domino_superset(domino_ts):
    return build_superset(domino_ts, rings=5)


@pytest.fixture(scope="session")
def square_domino_superset(square_domino_ts):
    return build_superset(square_domino_ts, rings=4)
