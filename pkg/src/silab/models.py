"""Core data models shared across the silab toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np

from silab.exceptions import (
    DataError,
    DimensionMismatch,
    IndexOutOfRange,
    NonBinaryResponse,
    NonFiniteCovariate,
    ValidationError,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import ArrayLike, NDArray

MIN_OBSERVATIONS = 2
UINT64_MASK = (1 << 64) - 1


class InclusionMode(StrEnum):
    """How the forced index enters the selected submodel."""

    UNION_J0 = "union_j0"
    UNPENALIZED_J0 = "unpenalized_j0"


class Side(StrEnum):
    """Shape of a confidence interval."""

    TWO_SIDED = "two_sided"
    LOWER = "lower"
    UPPER = "upper"


class Alternative(StrEnum):
    """Alternative hypothesis of a one-coordinate test."""

    GREATER = "greater"
    LESS = "less"
    TWO_SIDED = "two_sided"


class RunStatus(StrEnum):
    """Lifecycle of a stored Monte-Carlo run."""

    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True, eq=False)
class Dataset:
    """Binary responses with a dense design matrix and unique column labels.

    The design is stored column-major because the solvers sweep over columns. Both arrays are
    read-only so a dataset can be shared between threads.
    """

    y: NDArray[np.float64]
    X: NDArray[np.float64]
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        """Return the number of observations."""
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        """Return the number of covariates."""
        return int(self.X.shape[1])

    def column(self, label: str) -> int:
        """Return the index of the column with the given label."""
        try:
            return self.labels.index(label)
        except ValueError:
            message = f"unknown column {label!r}"
            raise IndexOutOfRange(message) from None

    def take_rows(self, rows: Sequence[int] | NDArray[np.intp]) -> Dataset:
        """Return the dataset restricted to the given observations, in the given order."""
        index = np.asarray(rows, dtype=np.intp)
        if index.size and (index.min() < 0 or index.max() >= self.n):
            message = f"row index out of range for n={self.n}"
            raise IndexOutOfRange(message)
        return Dataset(
            y=_frozen(self.y[index].copy()),
            X=_frozen(np.asfortranarray(self.X[index, :])),
            labels=self.labels,
        )

    def with_response(self, y: NDArray[np.float64]) -> Dataset:
        """Return a dataset sharing this design with a different response vector."""
        if y.shape != self.y.shape:
            message = f"response has length {y.size}, expected {self.n}"
            raise DimensionMismatch(message)
        return Dataset(y=_frozen(np.asarray(y, dtype=np.float64).copy()), X=self.X, labels=self.labels)


@dataclass(frozen=True, slots=True)
class Submodel:
    """An ordered index set into the full covariate list, with an optional forced index."""

    indices: tuple[int, ...]
    forced_index: int | None = None

    def __post_init__(self) -> None:
        """Validate ordering, uniqueness and membership of the forced index."""
        if not self.indices:
            raise ValidationError("Submodel indices must not be empty.")
        if any(right <= left for left, right in zip(self.indices, self.indices[1:], strict=False)):
            raise ValidationError("Submodel indices must be strictly increasing.")
        if self.indices[0] < 0:
            raise IndexOutOfRange("Submodel indices must be non-negative.")
        if self.forced_index is not None and self.forced_index not in self.indices:
            message = f"forced index {self.forced_index} is not part of the submodel"
            raise ValidationError(message)

    @classmethod
    def of(cls, indices: Iterable[int], forced_index: int | None = None) -> Submodel:
        """Build a submodel from any iterable of indices, sorting and de-duplicating them."""
        return cls(indices=tuple(sorted({int(index) for index in indices})), forced_index=forced_index)

    @classmethod
    def full(cls, d: int, forced_index: int | None = None) -> Submodel:
        """Return the full model over `d` covariates."""
        return cls(indices=tuple(range(d)), forced_index=forced_index)

    @property
    def p(self) -> int:
        """Return the submodel size."""
        return len(self.indices)

    def position(self, index: int) -> int:
        """Return the position of a full-model index inside the submodel."""
        try:
            return self.indices.index(index)
        except ValueError:
            message = f"index {index} is not part of the submodel"
            raise IndexOutOfRange(message) from None

    def validate_against(self, d: int) -> None:
        """Raise `IndexOutOfRange` when an index does not exist in a `d`-column design."""
        if self.indices[-1] >= d:
            message = f"submodel index {self.indices[-1]} out of range for d={d}"
            raise IndexOutOfRange(message)

    def labels(self, dataset: Dataset) -> list[str]:
        """Return the column labels of the submodel."""
        self.validate_against(dataset.d)
        return [dataset.labels[index] for index in self.indices]

    def to_dict(self) -> dict[str, Any]:
        """Convert the submodel into a JSON-serializable dictionary."""
        return {"indices": list(self.indices), "forced_index": self.forced_index}


@dataclass(frozen=True, slots=True)
class RandomStream:
    """A reproducible random sub-stream identified by a master seed and a derivation path.

    Streams are backed by the counter-based Philox generator keyed through `SeedSequence`
    spawn keys, so distinct paths give independent sequences on every platform.
    """

    seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """Reject seeds and path entries outside the unsigned 64-bit range."""
        if not 0 <= self.seed <= UINT64_MASK:
            message = f"seed must be a 64-bit unsigned integer, got {self.seed}"
            raise ValidationError(message)
        if any(tag < 0 for tag in self.path):
            raise ValidationError("stream path entries must be non-negative")

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))

    def to_dict(self) -> dict[str, Any]:
        """Convert the stream identity into a JSON-serializable dictionary."""
        return {"seed": self.seed, "path": list(self.path)}


def build_dataset(y: ArrayLike, X: ArrayLike, labels: Sequence[str]) -> Dataset:
    """Validate raw arrays and build an immutable dataset.

    `X` may be a flat row-major sequence of length ``n * d`` or a nested ``n x d`` array.
    """
    response = np.asarray(y, dtype=np.float64).reshape(-1)
    design = np.asarray(X, dtype=np.float64)
    names = tuple(str(label) for label in labels)
    n, d = response.size, len(names)

    if d < 1 or n < MIN_OBSERVATIONS:
        message = f"need n >= {MIN_OBSERVATIONS} observations and d >= 1 covariates, got n={n}, d={d}"
        raise DimensionMismatch(message)
    if design.ndim == 1:
        if design.size != n * d:
            message = f"design has {design.size} entries, expected n*d = {n * d}"
            raise DimensionMismatch(message)
        design = design.reshape(n, d)
    if design.shape != (n, d):
        message = f"design has shape {design.shape}, expected ({n}, {d})"
        raise DimensionMismatch(message)
    if len(set(names)) != d:
        raise DataError("column labels must be unique")
    if not np.all((response == 0.0) | (response == 1.0)):
        bad = response[(response != 0.0) & (response != 1.0)][0]
        message = f"response values must be 0 or 1, found {bad!r}"
        raise NonBinaryResponse(message)
    if not np.all(np.isfinite(design)):
        row, col = np.argwhere(~np.isfinite(design))[0]
        message = f"non-finite covariate at row {row}, column {names[col]!r}"
        raise NonFiniteCovariate(message)

    return Dataset(y=_frozen(response.copy()), X=_frozen(np.asfortranarray(design)), labels=names)


def restrict(dataset: Dataset, s: Submodel) -> Dataset:
    """Return the dataset with columns restricted to the submodel, in submodel order."""
    s.validate_against(dataset.d)
    if s.indices == tuple(range(dataset.d)):
        return dataset
    columns = list(s.indices)
    return Dataset(
        y=dataset.y,
        X=_frozen(np.asfortranarray(dataset.X[:, columns])),
        labels=tuple(dataset.labels[index] for index in columns),
    )


def derive_stream(stream: RandomStream, tag: int) -> RandomStream:
    """Return the child stream of `stream` identified by `tag`; the parent is left untouched."""
    return RandomStream(seed=stream.seed, path=(*stream.path, int(tag)))
