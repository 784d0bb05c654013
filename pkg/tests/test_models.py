"""Tests for datasets, submodels and random streams."""

from __future__ import annotations

import math

import numpy as np
import pytest

from silab.exceptions import (
    DataError,
    DimensionMismatch,
    IndexOutOfRange,
    NonBinaryResponse,
    NonFiniteCovariate,
    ValidationError,
)
from silab.models import RandomStream, RunStatus, Submodel, build_dataset, derive_stream, restrict

pytestmark = pytest.mark.unit

LABELS = ["a", "b"]


def test_build_dataset_accepts_flat_and_nested_designs() -> None:
    """Test that a flat row-major design equals its nested form."""
    flat = build_dataset([0, 1, 1], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], LABELS)
    nested = build_dataset([0, 1, 1], [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], LABELS)

    assert flat.n == 3
    assert flat.d == 2
    np.testing.assert_array_equal(flat.X, nested.X)
    assert flat.X.flags.f_contiguous
    assert not flat.X.flags.writeable


@pytest.mark.parametrize(
    ("y", "X", "error"),
    [
        pytest.param([0, 1, 1], [1.0, 2.0, 3.0], DimensionMismatch, id="short-design"),
        pytest.param([0, 1], [[1.0], [2.0]], DimensionMismatch, id="wrong-width"),
        pytest.param([0, 2, 1], [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], NonBinaryResponse, id="non-binary"),
        pytest.param([0, 1, 1], [[1.0, 0.0], [math.nan, 0.0], [3.0, 0.0]], NonFiniteCovariate, id="nan"),
        pytest.param([0, 1, 1], [[1.0, 0.0], [math.inf, 0.0], [3.0, 0.0]], NonFiniteCovariate, id="inf"),
        pytest.param([1], [[1.0, 0.0]], DimensionMismatch, id="single-row"),
    ],
)
def test_build_dataset_rejects_malformed_input(y: list[float], X: list, error: type[DataError]) -> None:
    """Test that malformed arrays raise the matching data error."""
    with pytest.raises(error):
        build_dataset(y, X, LABELS)


def test_build_dataset_rejects_duplicate_labels() -> None:
    """Test that column labels must be unique."""
    with pytest.raises(DataError):
        build_dataset([0, 1], [[1.0, 2.0], [3.0, 4.0]], ["a", "a"])


def test_dataset_take_rows_and_column_lookup() -> None:
    """Test that row subsets keep labels and follow the requested order."""
    dataset = build_dataset([0, 1, 1, 0], [[1, 0], [2, 0], [3, 1], [4, 1]], LABELS)

    half = dataset.take_rows([3, 0])

    np.testing.assert_array_equal(half.y, [0.0, 0.0])
    np.testing.assert_array_equal(half.X[:, 0], [4.0, 1.0])
    assert dataset.column("b") == 1
    with pytest.raises(IndexOutOfRange, match="unknown column"):
        dataset.column("z")
    with pytest.raises(IndexOutOfRange):
        dataset.take_rows([4])


def test_submodel_of_sorts_and_deduplicates() -> None:
    """Test that submodels are normalized to strictly increasing indices."""
    submodel = Submodel.of([5, 2, 5, 0], forced_index=2)

    assert submodel.indices == (0, 2, 5)
    assert submodel.p == 3
    assert submodel.position(5) == 2
    assert submodel.to_dict() == {"indices": [0, 2, 5], "forced_index": 2}


@pytest.mark.parametrize(
    ("indices", "forced", "error"),
    [
        pytest.param((), None, ValidationError, id="empty"),
        pytest.param((2, 1), None, ValidationError, id="unsorted"),
        pytest.param((1, 1), None, ValidationError, id="duplicate"),
        pytest.param((-1, 2), None, IndexOutOfRange, id="negative"),
        pytest.param((0, 1), 3, ValidationError, id="forced-missing"),
    ],
)
def test_submodel_rejects_invalid_indices(indices: tuple[int, ...], forced: int | None, error: type[Exception]) -> None:
    """Test that invalid index sets are rejected at construction."""
    with pytest.raises(error):
        Submodel(indices=indices, forced_index=forced)


def test_restrict_keeps_identity_and_selects_columns() -> None:
    """Test that restriction to the full model is the identity and other submodels slice columns."""
    dataset = build_dataset([0, 1, 1], [[1, 2, 3], [4, 5, 6], [7, 8, 9]], ["a", "b", "c"])

    assert restrict(dataset, Submodel.full(3)) is dataset
    restricted = restrict(dataset, Submodel.of([0, 2]))
    np.testing.assert_array_equal(restricted.X, [[1, 3], [4, 6], [7, 9]])
    assert restricted.labels == ("a", "c")
    assert Submodel.of([0, 2]).labels(dataset) == ["a", "c"]
    with pytest.raises(IndexOutOfRange):
        restrict(dataset, Submodel.of([3]))


def test_random_stream_is_reproducible_and_paths_are_independent() -> None:
    """Test that identical streams repeat and derived streams differ from their parent."""
    stream = RandomStream(2024, (1,))

    first = stream.generator().random(5)
    second = stream.generator().random(5)
    child = derive_stream(stream, 0).generator().random(5)
    sibling = derive_stream(stream, 1).generator().random(5)

    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, child)
    assert not np.array_equal(child, sibling)
    assert derive_stream(stream, 7).path == (1, 7)
    assert stream.path == (1,)


@pytest.mark.parametrize("seed", [-1, 1 << 64], ids=["negative", "too-large"])
def test_random_stream_rejects_out_of_range_seeds(seed: int) -> None:
    """Test that seeds must fit in 64 unsigned bits."""
    with pytest.raises(ValidationError):
        RandomStream(seed)


def test_run_status_values_are_the_stored_strings() -> None:
    """Test that run states compare equal to the text kept in the run store."""
    assert [status.value for status in RunStatus] == ["running", "completed", "failed"]
    assert RunStatus("failed") is RunStatus.FAILED
