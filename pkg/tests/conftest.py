import numpy as np
import pytest

from hypdet import maps


@pytest.fixture(scope="session")
def cat():
    return maps.builtin_cat_map()


@pytest.fixture(scope="session")
def cat_split(cat):
    return maps.splitting_power_iteration(cat)


@pytest.fixture(scope="session")
def pcat():
    return maps.builtin_perturbed_cat(0.01)


@pytest.fixture(scope="session")
def pcat_split(pcat):
    return maps.splitting_power_iteration(pcat)


@pytest.fixture(scope="session")
def chart():
    return maps.builtin_chart_model(0.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
