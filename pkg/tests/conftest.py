import random

import pytest

from eseds.cipher import keygen


@pytest.fixture(scope="session")
def key():
    return keygen()


@pytest.fixture
def rng():
    return random.Random(0xE5ED5)
