"""Shared pytest fixtures for silab tests."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from loguru import logger
from scipy.special import expit

from silab.models import build_dataset

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator

    from numpy.typing import ArrayLike

    from silab.models import Dataset

type DatasetFactory = Callable[..., Dataset]


def logistic_dataset(n: int, beta: ArrayLike, seed: int, *, scale: float = 1.0) -> Dataset:
    """Draw a standard-normal design and Bernoulli responses from the given coefficients."""
    coefficients = np.asarray(beta, dtype=np.float64)
    rng = np.random.default_rng(seed)
    X = scale * rng.standard_normal((n, coefficients.size))
    y = (rng.random(n) < expit(X @ coefficients)).astype(float)
    return build_dataset(y, X, [f"x{j + 1}" for j in range(coefficients.size)])


@pytest.fixture(autouse=True)
def quiet_logger() -> Iterator[None]:
    """Keep loguru output out of the test report."""
    logger.remove()
    yield
    logger.remove()


@pytest.fixture
def make_dataset() -> DatasetFactory:
    """Provide the synthetic logistic dataset factory."""
    return logistic_dataset


@pytest.fixture
def small_dataset() -> Dataset:
    """Provide a well-conditioned low-dimensional dataset."""
    return logistic_dataset(300, [0.8, -0.5, 0.0], seed=11)


@pytest.fixture
def sparse_dataset() -> Dataset:
    """Provide a dataset with more covariates than a half sample can support."""
    beta = np.zeros(50)
    beta[[0, 3, 7]] = [1.5, 1.0, -1.2]
    return logistic_dataset(100, beta, seed=5)


@pytest.fixture
def null_dataset() -> Dataset:
    """Provide a dataset whose responses do not depend on the design."""
    return logistic_dataset(100, np.zeros(50), seed=23)
