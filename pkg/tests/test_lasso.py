"""Tests for the L1-penalized solver, bracketed paths and AIC tuning."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import expit

from silab.exceptions import BracketingInfeasible, ValidationError
from silab.glm import fit_mle, log_likelihood
from silab.lasso import (
    LassoFit,
    LassoPath,
    aic_select,
    build_bracketed_paths,
    fit_path,
    kkt_residuals,
    lambda_max,
    lasso_fit,
    single_lasso_select,
)
from silab.models import build_dataset

if TYPE_CHECKING:
    from silab.models import Dataset
    from tests.conftest import DatasetFactory

pytestmark = pytest.mark.unit


def _halves(dataset: Dataset) -> tuple[Dataset, Dataset]:
    cut = dataset.n // 2
    return dataset.take_rows(range(cut)), dataset.take_rows(range(cut, dataset.n))


def _fit(lam: float, support: tuple[int, ...], d: int = 3) -> LassoFit:
    return LassoFit(
        lam=lam,
        beta=np.zeros(d),
        support=support,
        penalized_objective=0.0,
        kkt_violation=0.0,
        converged=True,
        sweeps=1,
        deviance=0.0,
    )


def test_lambda_max_matches_closed_form(sparse_dataset: Dataset) -> None:
    """Test that the zero-solution threshold is the scaled null score."""
    scales = np.std(sparse_dataset.X, axis=0, ddof=1)
    expected = np.max(2.0 * np.abs(sparse_dataset.X.T @ (sparse_dataset.y - 0.5)) / scales)

    assert lambda_max(sparse_dataset) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("factor", [1.001, 1.5, 3.0])
def test_lasso_fit_is_zero_at_or_above_lambda_max(sparse_dataset: Dataset, factor: float) -> None:
    """Test that no coefficient enters once lambda reaches its maximum."""
    fit = lasso_fit(sparse_dataset, factor * lambda_max(sparse_dataset))

    assert fit.support == ()
    np.testing.assert_array_equal(fit.beta, 0.0)
    assert fit.converged


def test_lasso_fit_without_penalty_recovers_the_mle(small_dataset: Dataset) -> None:
    """Test that lambda = 0 solves the unpenalized score equations."""
    fit = lasso_fit(small_dataset, 0.0)

    np.testing.assert_allclose(fit.beta, fit_mle(small_dataset).beta, atol=1e-5)
    assert fit.support == (0, 1, 2)


@pytest.mark.parametrize("fraction", [0.5, 0.2, 0.1])
def test_lasso_fit_satisfies_kkt_conditions(sparse_dataset: Dataset, fraction: float) -> None:
    """Test that every coordinate meets its subgradient condition at convergence."""
    fit = lasso_fit(sparse_dataset, fraction * lambda_max(sparse_dataset))

    assert fit.converged
    assert np.max(kkt_residuals(sparse_dataset, fit)) <= 1e-4
    assert set(fit.support) == set(np.flatnonzero(fit.beta))


def test_kkt_residuals_on_the_original_scale_use_raw_gradients(sparse_dataset: Dataset) -> None:
    """Test raw-covariate KKT residuals against a direct gradient evaluation."""
    fit = lasso_fit(sparse_dataset, 0.2 * lambda_max(sparse_dataset))
    X, beta = sparse_dataset.X, fit.beta
    scales = np.std(X, axis=0, ddof=1)
    gradient = -2.0 * (X.T @ (sparse_dataset.y - expit(X @ beta)))
    expected = np.where(
        beta != 0.0,
        np.abs(gradient + fit.lam * scales * np.sign(beta)),
        np.maximum(np.abs(gradient) - fit.lam * scales, 0.0),
    )

    raw = kkt_residuals(sparse_dataset, fit, original_scale=True)

    np.testing.assert_allclose(raw, expected, atol=1e-9)
    np.testing.assert_allclose(raw, kkt_residuals(sparse_dataset, fit) * scales)
    assert np.max(raw) <= 1e-4 * np.max(scales)


@pytest.mark.parametrize("seed", range(5))
def test_lasso_fit_matches_one_dimensional_oracle(seed: int, make_dataset: DatasetFactory) -> None:
    """Test that the scalar solution minimizes the scaled deviance-plus-penalty objective."""
    dataset = make_dataset(60, [0.9], seed=seed)
    lam = 0.3 * lambda_max(dataset)
    scale = float(np.std(dataset.X[:, 0], ddof=1))

    fit = lasso_fit(dataset, lam)
    oracle = minimize_scalar(
        lambda b: -2.0 * log_likelihood(dataset, [b]) + lam * scale * abs(b),
        bounds=(-15.0, 15.0),
        method="bounded",
        options={"xatol": 1e-10},
    )

    assert fit.beta[0] == pytest.approx(oracle.x, abs=1e-5)
    assert fit.penalized_objective == pytest.approx(oracle.fun, rel=1e-8)


def test_lasso_fit_warm_start_agrees_with_cold_start(sparse_dataset: Dataset) -> None:
    """Test that the starting point does not change the solution."""
    lam = 0.2 * lambda_max(sparse_dataset)
    previous = lasso_fit(sparse_dataset, 1.5 * lam)

    cold = lasso_fit(sparse_dataset, lam)
    warm = lasso_fit(sparse_dataset, lam, init=previous.beta)

    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-4)


def test_lasso_fit_keeps_unpenalized_coordinates(sparse_dataset: Dataset) -> None:
    """Test that an unpenalized coordinate stays in the support at any lambda."""
    top = lambda_max(sparse_dataset, unpenalized=[5])

    fit = lasso_fit(sparse_dataset, 2.0 * top, unpenalized=[5])

    assert fit.support == (5,)
    assert fit.beta[5] != 0.0
    assert np.count_nonzero(fit.beta) == 1


def test_lasso_fit_drops_constant_columns(small_dataset: Dataset) -> None:
    """Test that a zero-variance column is never selected."""
    X = np.column_stack([small_dataset.X, np.ones(small_dataset.n)])
    dataset = build_dataset(small_dataset.y, X, ["a", "b", "c", "const"])

    fit = lasso_fit(dataset, 0.05 * lambda_max(dataset))

    assert 3 not in fit.support
    assert fit.beta[3] == 0.0


def test_lasso_fit_rejects_negative_lambda(small_dataset: Dataset) -> None:
    """Test that a negative penalty is refused."""
    with pytest.raises(ValidationError):
        lasso_fit(small_dataset, -1.0)


def test_fit_path_supports_shrink_as_lambda_grows(sparse_dataset: Dataset) -> None:
    """Test that a warm-started path keeps one fit per grid point."""
    top = lambda_max(sparse_dataset)
    grid = np.geomspace(0.05 * top, top, 8)

    path = fit_path(sparse_dataset, grid)

    assert len(path.fits) == 8
    assert path.support_sizes()[-1] == 0
    assert path.support_sizes()[0] > 0
    assert [fit.lam for fit in path.fits] == pytest.approx(list(grid))


def test_lasso_path_rejects_unsorted_grid() -> None:
    """Test that grids must be strictly increasing and aligned with the fits."""
    with pytest.raises(ValidationError, match="increasing"):
        LassoPath(grid=np.array([0.2, 0.1]), fits=[_fit(0.2, ()), _fit(0.1, ())])
    with pytest.raises(ValidationError, match="one fit per grid point"):
        LassoPath(grid=np.array([0.1, 0.2]), fits=[_fit(0.1, ())])


def test_build_bracketed_paths_without_constraints_spans_the_default_range(make_dataset: DatasetFactory) -> None:
    """Test that vacuous brackets give the grid from lambda_max / 1000 to lambda_max."""
    half1, half2 = _halves(make_dataset(120, [1.0, -0.5, 0.0, 0.0, 0.3], seed=2))

    first, second = build_bracketed_paths(half1, half2, 0.0, math.inf, K=5)

    top = max(lambda_max(half1), lambda_max(half2))
    np.testing.assert_array_equal(first.grid, second.grid)
    assert first.grid.size == 5
    assert first.grid[-1] == pytest.approx(top)
    assert first.grid[0] == pytest.approx(top * 1e-3)


def test_build_bracketed_paths_meets_both_endpoint_conditions(null_dataset: Dataset) -> None:
    """Test that both halves exceed delta1 at the top and stay below delta2 at the bottom."""
    half1, half2 = _halves(null_dataset)

    first, second = build_bracketed_paths(half1, half2, 5.0, 40.0, K=10)

    assert min(len(first.fits[-1].support), len(second.fits[-1].support)) > 5
    assert max(len(first.fits[0].support), len(second.fits[0].support)) < 40
    assert first.grid[0] < first.grid[-1]


@pytest.mark.parametrize(
    ("delta1", "delta2", "error"),
    [
        pytest.param(50.0, 60.0, BracketingInfeasible, id="delta1-at-dimension"),
        pytest.param(10.0, 5.0, ValidationError, id="reversed"),
        pytest.param(-1.0, 5.0, ValidationError, id="negative"),
    ],
)
def test_build_bracketed_paths_rejects_impossible_brackets(
    null_dataset: Dataset,
    delta1: float,
    delta2: float,
    error: type[Exception],
) -> None:
    """Test that unreachable or malformed brackets fail before any path is fit."""
    half1, half2 = _halves(null_dataset)

    with pytest.raises(error):
        build_bracketed_paths(half1, half2, delta1, delta2, K=5)


def test_aic_select_breaks_ties_by_support_then_lambda(small_dataset: Dataset) -> None:
    """Test that equal criteria prefer the smaller support and then the larger lambda."""
    path = LassoPath(
        grid=np.array([0.1, 0.2, 0.3]),
        fits=[_fit(0.1, (0,)), _fit(0.2, ()), _fit(0.3, ())],
    )

    selection = aic_select(path, small_dataset, penalty=0.0)

    assert selection.index == 2
    assert selection.lam == 0.3
    assert selection.criteria.size == 3


def test_aic_select_picks_the_minimum_criterion(small_dataset: Dataset) -> None:
    """Test that the chosen grid point minimizes the unit-penalty criterion."""
    top = lambda_max(small_dataset)
    path = fit_path(small_dataset, np.geomspace(0.01 * top, top, 6))

    selection = aic_select(path, small_dataset)

    expected = [-2.0 * log_likelihood(small_dataset, fit.beta) + len(fit.support) for fit in path.fits]
    np.testing.assert_allclose(selection.criteria, expected)
    assert selection.criterion == pytest.approx(min(expected))


def test_single_lasso_select_returns_a_point_on_its_grid(sparse_dataset: Dataset) -> None:
    """Test that the whole-sample Lasso selects by the standard criterion."""
    selection = single_lasso_select(sparse_dataset, K=10)

    assert 0 <= selection.index < 10
    assert selection.criterion == pytest.approx(float(selection.criteria.min()))
