"""Tests for the iterative bootstrap bias correction."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from scipy.special import expit

from silab.bcmle import IbConfig, fixed_point_residual, ib_fit, simulate_responses
from silab.exceptions import InitialMleFailed, ValidationError
from silab.glm import fit_mle
from silab.models import RandomStream, Submodel, build_dataset, derive_stream

if TYPE_CHECKING:
    from silab.models import Dataset

pytestmark = pytest.mark.unit


def test_simulate_responses_is_binary_and_reproducible(small_dataset: Dataset) -> None:
    """Test that draws are 0/1, repeat per stream and track the model means."""
    gamma = np.array([0.5, -0.5, 0.2])
    stream = RandomStream(8, (3,))

    first = simulate_responses(small_dataset.X, gamma, stream)
    second = simulate_responses(small_dataset.X, gamma, stream)

    np.testing.assert_array_equal(first, second)
    assert set(np.unique(first)) <= {0.0, 1.0}
    assert abs(first.mean() - expit(small_dataset.X @ gamma).mean()) < 0.1


def test_simulate_responses_checks_coefficient_length(small_dataset: Dataset) -> None:
    """Test that the coefficient vector must match the submodel width."""
    with pytest.raises(ValidationError):
        simulate_responses(small_dataset.X, [0.1], RandomStream(0))


def test_ib_config_defaults_scale_with_dimension() -> None:
    """Test the default tolerance and redraw cap."""
    config = IbConfig()

    assert config.tolerance(4) == pytest.approx(2e-4)
    assert config.redraw_limit() == 2000
    assert IbConfig(epsilon=0.01).tolerance(100) == 0.01


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param({"H": 0}, id="no-samples"),
        pytest.param({"epsilon": 0.0}, id="zero-tolerance"),
        pytest.param({"k_max": 0}, id="no-iterations"),
        pytest.param({"resim_limit": -1}, id="negative-redraws"),
        pytest.param({"threads": 0}, id="no-threads"),
    ],
)
def test_ib_config_rejects_invalid_values(kwargs: dict) -> None:
    """Test that invalid tuning is refused at construction."""
    with pytest.raises(ValidationError):
        IbConfig(**kwargs)


def test_ib_fit_starts_from_the_observed_mle(small_dataset: Dataset) -> None:
    """Test that the first iterate is the MLE and each step is recorded."""
    config = IbConfig(H=30, k_max=3, stream=RandomStream(5))

    beta_hat, fit, trace = ib_fit(small_dataset, Submodel.full(3), config)

    np.testing.assert_allclose(trace.iterates[0], fit_mle(small_dataset).beta)
    np.testing.assert_array_equal(trace.iterates[-1], beta_hat)
    assert len(trace.iterates) == trace.iterations + 1
    assert len(trace.mc_standard_errors) == trace.iterations
    np.testing.assert_array_equal(fit.beta, beta_hat)


def test_ib_fit_flags_the_iteration_cap(small_dataset: Dataset) -> None:
    """Test that independent streams with a tight tolerance stop at k_max unconverged."""
    config = IbConfig(H=20, epsilon=1e-12, k_max=3, stream=RandomStream(1))

    _, fit, trace = ib_fit(small_dataset, Submodel.full(3), config)

    assert trace.iterations == 3
    assert not trace.converged
    assert not fit.converged


def test_ib_fit_is_reproducible_and_thread_independent(small_dataset: Dataset) -> None:
    """Test that the estimate depends on the stream but not on the thread count."""
    base = {"H": 120, "k_max": 2, "stream": RandomStream(42)}

    serial, _, _ = ib_fit(small_dataset, Submodel.full(3), IbConfig(**base))
    repeat, _, _ = ib_fit(small_dataset, Submodel.full(3), IbConfig(**base))
    threaded, _, _ = ib_fit(small_dataset, Submodel.full(3), IbConfig(**base, threads=3))

    np.testing.assert_array_equal(serial, repeat)
    np.testing.assert_array_equal(serial, threaded)


def test_ib_fit_with_common_random_numbers_reaches_a_fixed_point(small_dataset: Dataset) -> None:
    """Test that reusing one stream per sample makes the iteration converge to its fixed point."""
    config = IbConfig(H=50, k_max=50, stream=RandomStream(9), crn=True)
    s = Submodel.full(3)

    beta_hat, _, trace = ib_fit(small_dataset, s, config)
    residual = fixed_point_residual(small_dataset, s, beta_hat, 50, derive_stream(config.stream, 0))

    assert trace.converged
    assert trace.epsilons[-1] < trace.tolerance
    assert residual < 5 * trace.tolerance


def test_ib_fit_wraps_failed_initial_mle() -> None:
    """Test that a separated observed sample fails with the initial-MLE error."""
    dataset = build_dataset([0, 0, 1, 1], [[-2.0], [-1.0], [1.0], [2.0]], ["x"])

    with pytest.raises(InitialMleFailed):
        ib_fit(dataset, Submodel.full(1), IbConfig(H=5, k_max=1))


def test_fixed_point_residual_requires_samples(small_dataset: Dataset) -> None:
    """Test that at least one check sample is needed."""
    with pytest.raises(ValidationError):
        fixed_point_residual(small_dataset, Submodel.full(3), np.zeros(3), 0, RandomStream(0))
