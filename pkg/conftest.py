from fractions import Fraction

import pytest

from src.jointmatrix import PointTuple
from src.models import SampleCfg
from src.observability import collecting_warnings
from src.spec_store import builtin_fixture


@pytest.fixture
def cfg():
    return SampleCfg(seed=42, trials=32)


@pytest.fixture
def warnings_log():
    with collecting_warnings() as collector:
        yield collector


@pytest.fixture(scope="session")
def gallery():
    names = ["se2", "gl3", "sim2", "polar", "bump", "monomials3", "dependent-pair", "translation1", "bump-pair"]
    return {name: builtin_fixture(name) for name in names}


@pytest.fixture
def se2(gallery):
    return gallery["se2"]


@pytest.fixture
def gl3(gallery):
    return gallery["gl3"]


@pytest.fixture
def sim2(gallery):
    return gallery["sim2"]


@pytest.fixture
def polar(gallery):
    return gallery["polar"]


def exact_tuple(*points):
    return PointTuple(tuple(tuple(Fraction(v) for v in p) for p in points), True)
