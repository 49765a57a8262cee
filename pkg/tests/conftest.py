"""Shared fixtures for the histreg test suite."""

import numpy as np
import pytest

from histreg.core.dsd import SymbolicTable
from histreg.core.histcore import QuantileFunction
from histreg.core.histcore import histogram_new
from histreg.core.histcore import to_quantile
from histreg.io.dataset import packaged_dataset


def random_quantile(rng: np.random.Generator, max_pieces: int = 5) -> QuantileFunction:
    """Quantile function with random weights, widths and gaps between pieces."""
    n = int(rng.integers(1, max_pieces + 1))
    weights = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    widths = rng.exponential(1.0, n) * (rng.random(n) > 0.1)
    gaps = rng.exponential(0.3, n) * (rng.random(n) > 0.5)
    gaps[0] = 0.0
    lowers = rng.normal(0.0, 3.0) + np.cumsum(gaps) + np.concatenate(([0.0], np.cumsum(widths)[:-1]))
    return QuantileFunction.from_bounds(cum, lowers, lowers + widths)


def random_table(rng: np.random.Generator, m: int, p: int, max_pieces: int = 4) -> SymbolicTable:
    """Table of independent random values on their global partition."""
    predictors = [[random_quantile(rng, max_pieces) for _ in range(m)] for _ in range(p)]
    response = [random_quantile(rng, max_pieces) for _ in range(m)]
    return SymbolicTable.build(response, predictors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_quantile():
    return random_quantile


@pytest.fixture
def make_table():
    return random_table


@pytest.fixture
def example1_x():
    return to_quantile(histogram_new([(1, 3), (3, 5), (5, 8)], [0.1, 0.6, 0.3]))


@pytest.fixture
def example1_y():
    return to_quantile(histogram_new([(0, 1), (1, 4)], [0.8, 0.2]))


@pytest.fixture(scope="session")
def hematocrit():
    return packaged_dataset()


@pytest.fixture(scope="session")
def hematocrit_table(hematocrit):
    return hematocrit.table("hematocrit", ["hemoglobin"])
