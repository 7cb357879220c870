"""Shared test fixtures and configuration."""

import os

import numpy as np
import pytest

# Set test environment
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ.setdefault("RRM_CACHE_ENABLED", "true")


@pytest.fixture
def rng():
    """Seeded generator for randomized checks."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def uniform4():
    from src.fem.mesh import build_uniform
    return build_uniform(n=4)


@pytest.fixture(scope="session")
def uniform6():
    from src.fem.mesh import build_uniform
    return build_uniform(n=6)


@pytest.fixture(scope="session")
def uniform8():
    from src.fem.mesh import build_uniform
    return build_uniform(n=8)


@pytest.fixture(scope="session")
def pattern2():
    from src.fem.mesh import build_pattern
    return build_pattern(2)


@pytest.fixture(scope="session")
def lshape4():
    from src.fem.mesh import build_lshape
    return build_lshape(4)


@pytest.fixture(scope="session")
def interior6(uniform6):
    """Interior basis on the 6x6 unit-square grid (16 functions)."""
    from src.fem.basis import build_interior_set
    from src.fem.mesh import classify
    return build_interior_set(uniform6, classify(uniform6))


@pytest.fixture(scope="session")
def extended6(uniform6):
    """Extended basis on the 6x6 unit-square grid (64 functions)."""
    from src.fem.basis import build_extended_set
    from src.fem.mesh import classify
    return build_extended_set(uniform6, classify(uniform6))


@pytest.fixture(scope="session")
def interior8(uniform8):
    from src.fem.basis import build_interior_set
    from src.fem.mesh import classify
    return build_interior_set(uniform8, classify(uniform8))


@pytest.fixture
def fresh_cache():
    """Global cache emptied before and after the test."""
    from src.core.cache_manager import cache_manager
    cache_manager.clear_memory_cache()
    yield cache_manager
    cache_manager.clear_memory_cache()


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="Run full table reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def pytest_configure(config):
    # Route structlog through stdlib logging on stderr (as the CLI does), so
    # log lines emitted by fixtures don't leak into captured stdout.
    from src.cli import configure_logging
    configure_logging()
