"""Tests for the split-intersection selection."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from silab.exceptions import IndexOutOfRange, ValidationError
from silab.models import InclusionMode, RandomStream
from silab.sila import SilaConfig, auto_deltas, even_split, sila_select

if TYPE_CHECKING:
    from silab.models import Dataset

pytestmark = pytest.mark.unit


@pytest.mark.parametrize("n", [4, 7, 100, 101])
def test_even_split_partitions_rows(n: int) -> None:
    """Test that the halves are disjoint, sorted and sized ceil(n/2) and floor(n/2)."""
    first, second = even_split(n, RandomStream(3))

    assert first.size == math.ceil(n / 2)
    assert second.size == n // 2
    assert np.all(np.diff(first) > 0)
    assert np.all(np.diff(second) > 0)
    np.testing.assert_array_equal(np.sort(np.concatenate([first, second])), np.arange(n))


def test_even_split_is_reproducible_per_stream() -> None:
    """Test that the split depends only on its stream."""
    first, _ = even_split(50, RandomStream(1, (2,)))
    again, _ = even_split(50, RandomStream(1, (2,)))
    other, _ = even_split(50, RandomStream(2, (2,)))

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_even_split_rejects_tiny_samples() -> None:
    """Test that fewer than four rows cannot be split."""
    with pytest.raises(ValidationError):
        even_split(3, RandomStream(0))


@pytest.mark.parametrize(
    ("cases", "n", "expected"),
    [
        pytest.param(50, 100, (100 / 12, 50.0), id="balanced"),
        pytest.param(60, 100, (100 / 12, 50.0), id="balanced-at-threshold"),
        pytest.param(20, 100, (20 / 6, 50.0), id="few-cases"),
        pytest.param(85, 100, (15 / 6, 50.0), id="few-controls"),
    ],
)
def test_auto_deltas_follow_response_balance(cases: int, n: int, expected: tuple[float, float]) -> None:
    """Test that unbalanced responses shrink the lower bracket."""
    y = np.zeros(n)
    y[:cases] = 1.0

    assert auto_deltas(y) == pytest.approx(expected)


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param({"delta1": 5, "delta2": 5}, id="equal-brackets"),
        pytest.param({"delta1": -1}, id="negative"),
        pytest.param({"K": 1}, id="tiny-grid"),
        pytest.param({"lambda_ratio": 1.0}, id="ratio-one"),
    ],
)
def test_sila_config_rejects_invalid_tuning(kwargs: dict) -> None:
    """Test that malformed tuning fails at construction."""
    with pytest.raises(ValidationError):
        SilaConfig(**kwargs)


def test_sila_config_resolves_auto_brackets() -> None:
    """Test that only the "auto" bracket is replaced by its default."""
    y = np.array([1.0, 0.0] * 30)

    assert SilaConfig(delta1=2).resolve_deltas(y) == (2.0, 30.0)
    assert SilaConfig().resolve_deltas(y) == pytest.approx((5.0, 30.0))
    with pytest.raises(ValidationError):
        SilaConfig(delta1=40).resolve_deltas(y)


def test_sila_select_intersects_half_supports_and_adds_forced_index(sparse_dataset: Dataset) -> None:
    """Test that the final submodel is the half-support intersection plus the forced index."""
    config = SilaConfig(K=10, split_seed=RandomStream(7))

    submodel, trace = sila_select(sparse_dataset, 20, config)

    expected = (set(trace.half_supports[0]) & set(trace.half_supports[1])) | {20}
    assert set(submodel.indices) == expected
    assert submodel.forced_index == 20
    assert trace.final == submodel
    assert trace.half_indices[0].size + trace.half_indices[1].size == sparse_dataset.n
    assert trace.labels == submodel.labels(sparse_dataset)
    assert trace.to_dict()["final"]["forced_index"] == 20


def test_sila_select_is_reproducible(sparse_dataset: Dataset) -> None:
    """Test that the same split stream gives the same submodel."""
    config = SilaConfig(K=8, split_seed=RandomStream(11))

    first, _ = sila_select(sparse_dataset, 0, config)
    second, _ = sila_select(sparse_dataset, 0, config)

    assert first == second


def test_sila_select_with_unpenalized_forced_indices(sparse_dataset: Dataset) -> None:
    """Test that unpenalized forced indices survive the plain intersection."""
    config = SilaConfig(K=8, inclusion_mode=InclusionMode.UNPENALIZED_J0, split_seed=RandomStream(4))

    submodel, trace = sila_select(sparse_dataset, [12, 30], config)

    assert {12, 30} <= set(trace.half_supports[0])
    assert {12, 30} <= set(trace.half_supports[1])
    assert set(submodel.indices) == set(trace.half_supports[0]) & set(trace.half_supports[1])
    assert submodel.forced_index == 12
    assert trace.forced == (12, 30)


def test_sila_select_rejects_out_of_range_index(sparse_dataset: Dataset) -> None:
    """Test that the forced index must name a covariate."""
    with pytest.raises(IndexOutOfRange):
        sila_select(sparse_dataset, 50, SilaConfig(K=5))
