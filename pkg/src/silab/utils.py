"""Shared utility helpers used across the silab codebase."""

from __future__ import annotations

import json
import math
from datetime import UTC, datetime
from hashlib import sha1
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence


def utcnow() -> str:
    """Return the current UTC timestamp as an ISO 8601 string."""
    return datetime.now(UTC).replace(microsecond=0).isoformat()


def to_jsonable(value: object) -> object:
    """Convert numpy values and non-finite floats into plain JSON values.

    Infinite floats become the strings ``"inf"`` and ``"-inf"`` and NaN becomes ``None`` so the
    output stays strict JSON.
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number):
            return None
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    return value


def json_dumps(value: object, *, indent: int | None = None) -> str:
    """Serialize a JSON value with stable key ordering.

    Floats use Python's shortest round-trip representation, which reproduces the exact binary
    value on reload.
    """
    return json.dumps(to_jsonable(value), ensure_ascii=True, sort_keys=True, allow_nan=False, indent=indent)


def json_loads(value: str | bytes | None) -> object | None:
    """Deserialize a JSON string or return `None` for empty values."""
    if not value:
        return None
    return json.loads(value)


def chunked[T](values: Sequence[T] | Iterable[T], size: int) -> Iterator[list[T]]:
    """Yield consecutive batches from an iterable."""
    batch: list[T] = []
    for value in values:
        batch.append(value)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def stable_hash(value: str) -> str:
    """Return a stable SHA-1 digest for the provided string."""
    return sha1(value.encode("utf-8"), usedforsecurity=False).hexdigest()
