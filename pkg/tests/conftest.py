import numpy as np
import pytest

from defaults_resolver import DefaultsResolver
from simgen import Scenario, ScenarioConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale Monte Carlo checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fresh_defaults():
    DefaultsResolver.reset()
    yield
    DefaultsResolver.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(20190101)


@pytest.fixture(params=Scenario.AVAILABLE)
def scenario(request):
    return request.param


@pytest.fixture
def small_config():
    return ScenarioConfig(scenario=Scenario.TV_TREATMENT, n_subjects=2000, beta_c=0.7830)
