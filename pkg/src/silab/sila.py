"""Split-intersection Lasso selection of a submodel containing the coefficient of interest."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger

from silab.config import AUTO, DEFAULT_GRID_SIZE, Delta
from silab.exceptions import IndexOutOfRange, ValidationError
from silab.lasso import DEFAULT_LAMBDA_RATIO, MIN_GRID_SIZE, AicSelection, aic_select, build_bracketed_paths
from silab.models import InclusionMode, RandomStream, Submodel

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from silab.lasso import LassoPath
    from silab.models import Dataset

MIN_SPLIT_OBSERVATIONS = 4
BALANCE_FRACTION = 0.1


@dataclass(frozen=True, slots=True)
class SilaConfig:
    """Tuning for the split-intersection selection."""

    delta1: Delta = AUTO
    delta2: Delta = AUTO
    K: int = DEFAULT_GRID_SIZE
    inclusion_mode: InclusionMode = InclusionMode.UNION_J0
    split_seed: RandomStream = field(default_factory=lambda: RandomStream(0))
    lambda_ratio: float = DEFAULT_LAMBDA_RATIO

    def __post_init__(self) -> None:
        """Validate explicit brackets and the grid size."""
        explicit = [value for value in (self.delta1, self.delta2) if value != AUTO]
        if any(not isinstance(value, (int, float)) or value < 0 for value in explicit):
            raise ValidationError("support-size brackets must be 'auto' or non-negative numbers")
        if AUTO not in (self.delta1, self.delta2) and not explicit[0] < explicit[1]:
            message = f"delta1 must be below delta2, got ({self.delta1}, {self.delta2})"
            raise ValidationError(message)
        if self.K < MIN_GRID_SIZE:
            message = f"grid size must be at least 2, got {self.K}"
            raise ValidationError(message)
        if not 0.0 < self.lambda_ratio < 1.0:
            message = f"lambda ratio must lie in (0, 1), got {self.lambda_ratio}"
            raise ValidationError(message)

    def resolve_deltas(self, y: NDArray[np.float64]) -> tuple[float, float]:
        """Replace `"auto"` brackets with the response-dependent defaults."""
        auto1, auto2 = auto_deltas(y)
        delta1 = auto1 if self.delta1 == AUTO else float(self.delta1)
        delta2 = auto2 if self.delta2 == AUTO else float(self.delta2)
        if not delta1 < delta2:
            message = f"resolved brackets must satisfy delta1 < delta2, got ({delta1}, {delta2})"
            raise ValidationError(message)
        return delta1, delta2

    def to_dict(self) -> dict[str, Any]:
        """Convert the configuration into a JSON-serializable dictionary."""
        return {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "K": self.K,
            "inclusion_mode": self.inclusion_mode.value,
            "split_seed": self.split_seed.to_dict(),
            "lambda_ratio": self.lambda_ratio,
        }


@dataclass(slots=True)
class SilaTrace:
    """Everything the selection computed on the way to the final submodel."""

    half_indices: tuple[NDArray[np.intp], NDArray[np.intp]]
    lambda_hats: tuple[float, float]
    half_supports: tuple[tuple[int, ...], tuple[int, ...]]
    final: Submodel
    deltas: tuple[float, float]
    grids: tuple[NDArray[np.float64], NDArray[np.float64]]
    forced: tuple[int, ...]
    labels: list[str] = field(default_factory=list)
    monotone_violations: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict[str, Any]:
        """Convert the trace into a JSON-serializable dictionary."""
        return {
            "half_indices": [self.half_indices[0], self.half_indices[1]],
            "lambda_hats": list(self.lambda_hats),
            "half_supports": [list(support) for support in self.half_supports],
            "final": self.final.to_dict(),
            "labels": self.labels,
            "deltas": list(self.deltas),
            "grid_range": [[float(grid[0]), float(grid[-1])] for grid in self.grids],
            "forced": list(self.forced),
            "monotone_violations": list(self.monotone_violations),
        }


def even_split(n: int, stream: RandomStream) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """Randomly partition ``range(n)`` into halves of sizes ``ceil(n/2)`` and ``floor(n/2)``.

    Each half is returned in increasing order.
    """
    if n < MIN_SPLIT_OBSERVATIONS:
        message = f"need at least {MIN_SPLIT_OBSERVATIONS} observations to split, got {n}"
        raise ValidationError(message)
    order = stream.generator().permutation(n)
    cut = math.ceil(n / 2)
    return np.sort(order[:cut]), np.sort(order[cut:])


def auto_deltas(y: NDArray[np.float64]) -> tuple[float, float]:
    """Return default support brackets ``(n/12, n/2)``, or ``(min(cases, controls)/6, n/2)`` when unbalanced."""
    n = int(y.size)
    if n < MIN_SPLIT_OBSERVATIONS:
        message = f"need at least {MIN_SPLIT_OBSERVATIONS} observations, got {n}"
        raise ValidationError(message)
    cases = float(np.sum(y))
    if abs(cases - n / 2) <= BALANCE_FRACTION * n:
        return n / 12, n / 2
    return min(cases, n - cases) / 6, n / 2


def _normalize_forced(j0: int | Sequence[int], d: int) -> tuple[int, ...]:
    forced = (j0,) if isinstance(j0, (int, np.integer)) else tuple(j0)
    if not forced:
        raise ValidationError("at least one forced index is required")
    for index in forced:
        if not 0 <= int(index) < d:
            message = f"forced index {index} out of range for d={d}"
            raise IndexOutOfRange(message)
    return tuple(sorted({int(index) for index in forced}))


def sila_select(
    dataset: Dataset,
    j0: int | Sequence[int],
    config: SilaConfig | None = None,
) -> tuple[Submodel, SilaTrace]:
    """Select a submodel by intersecting AIC-tuned Lasso supports from two random halves.

    In ``union_j0`` mode the forced indices are appended to the intersection afterwards; in
    ``unpenalized_j0`` mode they are left unpenalized on both halves, so the plain intersection
    already holds them. The first forced index is recorded as the submodel's forced index.
    """
    config = config or SilaConfig()
    forced = _normalize_forced(j0, dataset.d)
    primary = int(j0) if isinstance(j0, (int, np.integer)) else int(next(iter(j0)))
    delta1, delta2 = config.resolve_deltas(dataset.y)
    first_rows, second_rows = even_split(dataset.n, config.split_seed)
    halves = (dataset.take_rows(first_rows), dataset.take_rows(second_rows))
    unpenalized = forced if config.inclusion_mode == InclusionMode.UNPENALIZED_J0 else ()
    logger.debug(
        "Selecting with brackets ({:.3f}, {:.3f}) on halves of {} and {} rows",
        delta1,
        delta2,
        first_rows.size,
        second_rows.size,
    )

    paths: tuple[LassoPath, LassoPath] = build_bracketed_paths(
        halves[0],
        halves[1],
        delta1,
        delta2,
        config.K,
        unpenalized=unpenalized,
        lambda_ratio=config.lambda_ratio,
    )
    with ThreadPoolExecutor(max_workers=2) as pool:
        selections: list[AicSelection] = list(
            pool.map(lambda pair: aic_select(pair[0], pair[1]), zip(paths, halves, strict=True)),
        )

    supports = (selections[0].fit.support, selections[1].fit.support)
    chosen = set(supports[0]) & set(supports[1])
    if config.inclusion_mode == InclusionMode.UNION_J0:
        chosen |= set(forced)
    final = Submodel.of(chosen, forced_index=primary)
    logger.info(
        "Selected {} covariates (half supports {} and {})",
        final.p,
        len(supports[0]),
        len(supports[1]),
    )
    trace = SilaTrace(
        half_indices=(first_rows, second_rows),
        lambda_hats=(selections[0].lam, selections[1].lam),
        half_supports=supports,
        final=final,
        deltas=(delta1, delta2),
        grids=(paths[0].grid, paths[1].grid),
        forced=forced,
        labels=final.labels(dataset),
        monotone_violations=(paths[0].monotone_violations, paths[1].monotone_violations),
    )
    return final, trace
