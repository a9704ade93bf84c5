from pathlib import Path

import numpy as np
import pytest

from prefalign.policy import Runtime
from prefalign.states import PolicySpec
from prefalign.tokens import Vocab
from prefalign.world import WorldConfig, generate_corpus

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def vocab() -> Vocab:
    return Vocab()


@pytest.fixture(scope="session")
def spec() -> PolicySpec:
    return PolicySpec()


@pytest.fixture(scope="session")
def runtime(spec) -> Runtime:
    return Runtime(spec)


@pytest.fixture(scope="session")
def world() -> WorldConfig:
    return WorldConfig(seed=11)


@pytest.fixture(scope="session")
def small_corpus(world):
    return generate_corpus(world, 30, 4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
