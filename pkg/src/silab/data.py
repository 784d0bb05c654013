"""CSV ingestion and covariate expansion."""

from __future__ import annotations

from itertools import combinations
from typing import TYPE_CHECKING

import pandas as pd
from loguru import logger

from silab.exceptions import DataError, MissingValueError, UnknownColumnError, ValidationError
from silab.models import Dataset, build_dataset

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

PAIRWISE = 2
SUPPORTED_INTERACTION_ORDERS = (1, PAIRWISE)


def _require_columns(frame: pd.DataFrame, names: Sequence[str]) -> None:
    for name in names:
        if name not in frame.columns:
            message = f"unknown column {name!r}"
            raise UnknownColumnError(message)


def expand_interactions(frame: pd.DataFrame, keep_marginal: Sequence[str] = ()) -> pd.DataFrame:
    """Append pairwise products of covariates as columns labelled ``"a:b"``.

    Columns listed in `keep_marginal` enter with their marginal effect only.
    """
    _require_columns(frame, keep_marginal)
    marginal_only = set(keep_marginal)
    expandable = [name for name in frame.columns if name not in marginal_only]
    products = {f"{left}:{right}": frame[left] * frame[right] for left, right in combinations(expandable, 2)}
    if not products:
        return frame
    return pd.concat([frame, pd.DataFrame(products, index=frame.index)], axis=1)


def read_csv_dataset(
    path: Path,
    response: str,
    *,
    exclude: Sequence[str] = (),
    interactions: int = 1,
    keep_marginal: Sequence[str] = (),
) -> Dataset:
    """Read a headed CSV file into a validated dataset.

    Every column other than the response and the excluded ones becomes a covariate, in header
    order. Missing cells are an error.
    """
    if interactions not in SUPPORTED_INTERACTION_ORDERS:
        message = f"interaction order must be one of {SUPPORTED_INTERACTION_ORDERS}, got {interactions}"
        raise ValidationError(message)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        message = f"cannot read {path}: {exc}"
        raise DataError(message) from exc

    _require_columns(frame, [response, *exclude])
    if frame.isna().to_numpy().any():
        column = frame.columns[frame.isna().any()].tolist()[0]
        message = f"missing values in column {column!r}"
        raise MissingValueError(message)

    covariates = frame.drop(columns=[response, *exclude])
    non_numeric = [name for name in covariates.columns if not pd.api.types.is_numeric_dtype(covariates[name])]
    if non_numeric:
        message = f"non-numeric covariate columns: {', '.join(non_numeric)}"
        raise DataError(message)
    if not pd.api.types.is_numeric_dtype(frame[response]):
        message = f"response column {response!r} is not numeric"
        raise DataError(message)

    covariates = covariates.astype(float)
    if interactions == PAIRWISE:
        covariates = expand_interactions(covariates, keep_marginal)

    logger.info("Loaded {} rows and {} covariates from {}", len(frame), covariates.shape[1], path)
    return build_dataset(
        frame[response].to_numpy(dtype=float),
        covariates.to_numpy(dtype=float),
        [str(name) for name in covariates.columns],
    )
