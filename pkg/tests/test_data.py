"""Tests for CSV ingestion and interaction expansion."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest

from silab.data import expand_interactions, read_csv_dataset
from silab.exceptions import DataError, MissingValueError, NonBinaryResponse, UnknownColumnError, ValidationError

if TYPE_CHECKING:
    from pathlib import Path

pytestmark = pytest.mark.unit


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_read_csv_dataset_uses_every_other_column_in_header_order(tmp_path: Path) -> None:
    """Test that non-response, non-excluded columns become covariates in order."""
    csv = _write(tmp_path / "toy.csv", "id,x2,y,x1\n1,0.5,1,2\n2,1.5,0,3\n3,-1,1,4\n")

    dataset = read_csv_dataset(csv, "y", exclude=["id"])

    assert dataset.labels == ("x2", "x1")
    np.testing.assert_array_equal(dataset.y, [1.0, 0.0, 1.0])
    np.testing.assert_array_equal(dataset.X[:, 1], [2.0, 3.0, 4.0])


def test_read_csv_dataset_appends_pairwise_interactions(tmp_path: Path) -> None:
    """Test that second-order expansion skips columns kept marginal."""
    csv = _write(tmp_path / "toy.csv", "y,a,b,c\n1,1,2,3\n0,2,3,4\n")

    dataset = read_csv_dataset(csv, "y", interactions=2, keep_marginal=["c"])

    assert dataset.labels == ("a", "b", "c", "a:b")
    np.testing.assert_array_equal(dataset.X[:, 3], [2.0, 6.0])


def test_expand_interactions_without_pairs_returns_frame_unchanged() -> None:
    """Test that a single expandable column produces no products."""
    frame = pd.DataFrame({"a": [1.0, 2.0], "b": [3.0, 4.0]})

    assert list(expand_interactions(frame, keep_marginal=["b"]).columns) == ["a", "b"]


@pytest.mark.parametrize(
    ("text", "kwargs", "error"),
    [
        pytest.param("y,a\n1,1\n0,\n", {}, MissingValueError, id="missing-cell"),
        pytest.param("y,a\n1,1\n0,2\n", {"exclude": ["zz"]}, UnknownColumnError, id="unknown-exclude"),
        pytest.param("y,a\n1,u\n0,v\n", {}, DataError, id="non-numeric"),
        pytest.param("y,a\n1,1\n3,2\n", {}, NonBinaryResponse, id="non-binary"),
        pytest.param("y,a\n1,1\n0,2\n", {"interactions": 3}, ValidationError, id="bad-order"),
    ],
)
def test_read_csv_dataset_rejects_bad_files(tmp_path: Path, text: str, kwargs: dict, error: type[Exception]) -> None:
    """Test that malformed files raise the matching error."""
    csv = _write(tmp_path / "bad.csv", text)

    with pytest.raises(error):
        read_csv_dataset(csv, "y", **kwargs)


def test_read_csv_dataset_reports_unknown_response(tmp_path: Path) -> None:
    """Test that a missing response column names the column."""
    csv = _write(tmp_path / "toy.csv", "y,a\n1,1\n0,2\n")

    with pytest.raises(UnknownColumnError, match="unknown column 'label'"):
        read_csv_dataset(csv, "label")


def test_read_csv_dataset_wraps_unreadable_paths(tmp_path: Path) -> None:
    """Test that a missing file becomes a data error."""
    with pytest.raises(DataError, match="cannot read"):
        read_csv_dataset(tmp_path / "absent.csv", "y")
