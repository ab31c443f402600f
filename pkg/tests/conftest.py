import numpy as np
import pytest
from hypothesis import settings

from tatonnement.market import CES, Buyer, CobbDouglas, Leontief, MarketInstance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def cd_market():
    return MarketInstance(2, [Buyer(1.0, CobbDouglas((0.5, 0.5)))])


@pytest.fixture
def leo_market():
    return MarketInstance(2, [Buyer(1.0, Leontief((1.0, 1.0)))])


@pytest.fixture
def ces_market():
    return MarketInstance(2, [Buyer(1.0, CES(-1.0, (1.0, 1.0)))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
