"""End-to-end selection plus bias-corrected estimation, with Wald intervals and tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy.special import ndtr, ndtri

from silab.bcmle import IbConfig, IbTrace, ib_fit
from silab.config import DEFAULT_ALPHA_GRID
from silab.exceptions import InvalidAlpha, SilabError, ValidationError
from silab.glm import ParameterBox, plugin_variance
from silab.models import Alternative, Side, Submodel
from silab.sila import SilaConfig, SilaTrace, sila_select

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import NDArray

    from silab.models import Dataset

MIN_FIT_OBSERVATIONS = 20
DEFAULT_LEVELS = (0.90, 0.95, 0.99)


class VarianceSource(StrEnum):
    """Coefficients at which the Fisher information behind the plug-in variance is evaluated."""

    BCMLE = "bcmle"
    MLE = "mle"


@dataclass(slots=True)
class SilabResult:
    """The estimate of one coefficient of interest on a selected submodel.

    Quantities are conditional on the selected submodel.
    """

    submodel: Submodel
    j0: int
    j0_prime: int
    beta_j0: float
    sigma2_j0: float
    full_beta: NDArray[np.float64]
    n: int
    ib_trace: IbTrace
    mle_beta_j0: float
    mle_sigma2_j0: float
    converged: bool
    sila_trace: SilaTrace | None = None
    variance_at: VarianceSource = VarianceSource.BCMLE
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check the coordinate mapping and the variance sign."""
        if self.submodel.indices[self.j0_prime] != self.j0:
            raise ValidationError("j0_prime does not point at j0 inside the submodel")
        if not self.sigma2_j0 > 0:
            message = f"plug-in variance must be positive, got {self.sigma2_j0}"
            raise ValidationError(message)

    @property
    def standard_error(self) -> float:
        """Return ``sigma_hat / sqrt(n)``."""
        return math.sqrt(self.sigma2_j0 / self.n)

    def to_dict(self) -> dict[str, Any]:
        """Convert the result into a JSON-serializable dictionary."""
        return {
            "submodel": self.submodel.to_dict(),
            "j0": self.j0,
            "j0_prime": self.j0_prime,
            "beta_j0": self.beta_j0,
            "sigma2_j0": self.sigma2_j0,
            "full_beta": self.full_beta,
            "n": self.n,
            "converged": self.converged,
            "variance_at": self.variance_at.value,
            "conditional_on_selection": self.sila_trace is not None,
            "mle": {"beta_j0": self.mle_beta_j0, "sigma2_j0": self.mle_sigma2_j0},
            "trace": {
                "sila": self.sila_trace.to_dict() if self.sila_trace is not None else None,
                "ib": self.ib_trace.to_dict(),
            },
            "config": self.config,
        }


@dataclass(slots=True)
class IntervalResult:
    """A normal-theory confidence interval for the coefficient of interest."""

    level: float
    side: Side
    lower: float
    upper: float
    center: float
    half_width: float

    def contains(self, value: float) -> bool:
        """Return whether `value` lies in the closed interval."""
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict[str, Any]:
        """Convert the interval into a JSON-serializable dictionary."""
        return {
            "level": self.level,
            "side": self.side.value,
            "bounds": [self.lower, self.upper],
            "center": self.center,
            "half_width": self.half_width,
        }


@dataclass(slots=True)
class TestResult:
    """A one-coordinate Wald test against a standard normal reference."""

    __test__ = False

    null_value: float
    alternative: Alternative
    z_stat: float
    p_value: float
    reject_at: dict[float, bool]

    def to_dict(self) -> dict[str, Any]:
        """Convert the test into a JSON-serializable dictionary."""
        return {
            "null_value": self.null_value,
            "alternative": self.alternative.value,
            "z_stat": self.z_stat,
            "p_value": self.p_value,
            "reject_at": {repr(level): decision for level, decision in sorted(self.reject_at.items())},
        }


def matching_side(alternative: Alternative) -> Side:
    """Return the interval shape dual to a test alternative."""
    return {
        Alternative.GREATER: Side.LOWER,
        Alternative.LESS: Side.UPPER,
        Alternative.TWO_SIDED: Side.TWO_SIDED,
    }[alternative]


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        message = f"alpha must lie strictly between 0 and 1, got {alpha}"
        raise InvalidAlpha(message)


def _finish(  # noqa: PLR0913
    dataset: Dataset,
    j0: int,
    submodel: Submodel,
    ib_config: IbConfig,
    box: ParameterBox,
    variance_at: VarianceSource,
    sila_trace: SilaTrace | None,
    config: dict[str, Any],
) -> SilabResult:
    try:
        beta_hat, fit, trace = ib_fit(dataset, submodel, ib_config, box)
        j0_prime = submodel.position(j0)
        direction = np.zeros(submodel.p)
        direction[j0_prime] = 1.0
        bc_variance = plugin_variance(fit, direction, dataset.n)
        mle_variance = plugin_variance(trace.initial_fit, direction, dataset.n)
    except SilabError as exc:
        exc.with_stage("estimate")
        raise
    sigma2 = bc_variance if variance_at == VarianceSource.BCMLE else mle_variance
    logger.info(
        "Estimated coefficient {} = {:.5g} (sigma^2 {:.5g}) on {} covariates",
        dataset.labels[j0],
        beta_hat[j0_prime],
        sigma2,
        submodel.p,
    )
    return SilabResult(
        submodel=submodel,
        j0=j0,
        j0_prime=j0_prime,
        beta_j0=float(beta_hat[j0_prime]),
        sigma2_j0=sigma2,
        full_beta=beta_hat,
        n=dataset.n,
        ib_trace=trace,
        mle_beta_j0=float(trace.initial_fit.beta[j0_prime]),
        mle_sigma2_j0=mle_variance,
        converged=trace.converged,
        sila_trace=sila_trace,
        variance_at=variance_at,
        config=config,
    )


def _check_inputs(dataset: Dataset, j0: int) -> None:
    if dataset.n < MIN_FIT_OBSERVATIONS:
        message = f"need at least {MIN_FIT_OBSERVATIONS} observations, got {dataset.n}"
        raise ValidationError(message)
    if not 0 <= j0 < dataset.d:
        message = f"j0={j0} out of range for d={dataset.d}"
        raise ValidationError(message)


def silab_fit(  # noqa: PLR0913
    dataset: Dataset,
    j0: int,
    sila_config: SilaConfig | None = None,
    ib_config: IbConfig | None = None,
    box: ParameterBox | None = None,
    variance_at: VarianceSource = VarianceSource.BCMLE,
    forced: Sequence[int] = (),
) -> SilabResult:
    """Select a submodel containing `j0`, then bias-correct its MLE and estimate the variance.

    Extra `forced` indices are kept in the submodel alongside `j0`. Errors from either stage
    carry a ``select`` or ``estimate`` stage label.
    """
    _check_inputs(dataset, j0)
    sila_config = sila_config or SilaConfig()
    ib_config = ib_config or IbConfig()
    box = box or ParameterBox()
    try:
        submodel, sila_trace = sila_select(dataset, [j0, *(index for index in forced if index != j0)], sila_config)
    except SilabError as exc:
        exc.with_stage("select")
        raise
    config = {"sila": sila_config.to_dict(), "ib": ib_config.to_dict(), "box_bound": box.bound}
    return _finish(dataset, j0, submodel, ib_config, box, variance_at, sila_trace, config)


def fit_full_model(
    dataset: Dataset,
    j0: int,
    ib_config: IbConfig | None = None,
    box: ParameterBox | None = None,
    variance_at: VarianceSource = VarianceSource.BCMLE,
) -> SilabResult:
    """Bias-correct the MLE of the full model without any selection; requires ``d < n``."""
    _check_inputs(dataset, j0)
    if dataset.d >= dataset.n:
        message = f"the full model needs d < n, got d={dataset.d}, n={dataset.n}"
        raise ValidationError(message)
    ib_config = ib_config or IbConfig()
    box = box or ParameterBox()
    config = {"sila": None, "ib": ib_config.to_dict(), "box_bound": box.bound}
    submodel = Submodel.full(dataset.d, forced_index=j0)
    return _finish(dataset, j0, submodel, ib_config, box, variance_at, None, config)


def interval(center: float, standard_error: float, alpha: float, side: Side = Side.TWO_SIDED) -> IntervalResult:
    """Return the level ``1 - alpha`` Wald interval around `center`."""
    _check_alpha(alpha)
    side = Side(side)
    if side == Side.TWO_SIDED:
        width = float(ndtri(1.0 - alpha / 2.0)) * standard_error
        lower, upper = center - width, center + width
    else:
        width = float(ndtri(1.0 - alpha)) * standard_error
        lower, upper = (center - width, math.inf) if side == Side.LOWER else (-math.inf, center + width)
    return IntervalResult(level=1.0 - alpha, side=side, lower=lower, upper=upper, center=center, half_width=width)


def confidence_interval(
    result: SilabResult,
    n: int | None = None,
    alpha: float = 0.05,
    side: Side = Side.TWO_SIDED,
) -> IntervalResult:
    """Return ``beta_j0 -/+ z * sigma_hat / sqrt(n)``; one-sided intervals use ``z_{1-alpha}``.

    A ``lower`` interval is unbounded above and an ``upper`` interval is unbounded below.
    """
    size = n or result.n
    return interval(result.beta_j0, math.sqrt(result.sigma2_j0 / size), alpha, side)


def confidence_intervals(
    result: SilabResult,
    n: int | None = None,
    levels: Iterable[float] = DEFAULT_LEVELS,
    side: Side = Side.TWO_SIDED,
) -> list[IntervalResult]:
    """Return one interval per confidence level."""
    return [confidence_interval(result, n, round(1.0 - level, 12), side) for level in levels]


def z_test(  # noqa: PLR0913
    estimate: float,
    sigma2: float,
    n: int,
    null_value: float,
    alternative: Alternative = Alternative.TWO_SIDED,
    levels: Iterable[float] = DEFAULT_ALPHA_GRID,
) -> TestResult:
    """Return the Wald test of ``beta = null_value`` from an estimate and its plug-in variance."""
    if not sigma2 > 0:
        message = f"plug-in variance must be positive, got {sigma2}"
        raise ValidationError(message)
    alternative = Alternative(alternative)
    z_stat = math.sqrt(n) * (estimate - null_value) / math.sqrt(sigma2)
    if alternative == Alternative.GREATER:
        p_value = float(ndtr(-z_stat))
    elif alternative == Alternative.LESS:
        p_value = float(ndtr(z_stat))
    else:
        p_value = min(1.0, 2.0 * float(ndtr(-abs(z_stat))))
    reject_at = {}
    for level in levels:
        _check_alpha(level)
        reject_at[float(level)] = p_value < level
    return TestResult(
        null_value=null_value,
        alternative=alternative,
        z_stat=z_stat,
        p_value=p_value,
        reject_at=reject_at,
    )


def hypothesis_test(
    result: SilabResult,
    n: int | None = None,
    null_value: float = 0.0,
    alternative: Alternative = Alternative.TWO_SIDED,
    levels: Iterable[float] = DEFAULT_ALPHA_GRID,
) -> TestResult:
    """Test ``beta_j0 = null_value``; rejecting at `alpha` matches `null_value` leaving the dual interval."""
    return z_test(result.beta_j0, result.sigma2_j0, n or result.n, null_value, alternative, levels)
