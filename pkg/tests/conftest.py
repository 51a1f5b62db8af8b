"""Shared fixtures for the GSDM test suite."""

import numpy as np
import pytest

from GSDM.datasets import DatasetSpec, generate_dataset, split
from GSDM.graphs import decompose_all
from GSDM.scorenet import ScoreNetArch


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte-Carlo or training runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def community_graphs():
    return generate_dataset(DatasetSpec(name="community_small", count=12, seed=3))


@pytest.fixture(scope="session")
def community_split(community_graphs):
    train, test = split(community_graphs, 0.75, seed=3)
    return decompose_all(train), test


@pytest.fixture
def tiny_arch(community_graphs):
    return ScoreNetArch(d=community_graphs[0].d, hidden=8, time_dim=4)
