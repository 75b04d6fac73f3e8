import pytest

from slrtrack.linalg import random_basis
from slrtrack.utilities import rng_stream


def pytest_addoption(parser):
    parser.addoption("--run-full", action="store_true", default=False, help="run full-scale presets")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance runs")
    config.addinivalue_line("markers", "full: full-scale presets, only with --run-full")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-full"):
        return
    skip = pytest.mark.skip(reason="full-scale preset, use --run-full")
    for item in items:
        if item.get_closest_marker("full") is not None:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return rng_stream(1234, "tests")


@pytest.fixture
def basis_200x5():
    return random_basis(200, 5, rng_stream(7, "basis"))

