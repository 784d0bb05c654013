"""L1-penalized logistic regression by coordinate descent, bracketed paths and AIC tuning.

The objective is on the deviance scale, ``-2 * loglik(beta) + lam * sum_j s_j |beta_j|``, where
``s_j`` is the sample standard deviation of column ``j``. Internally the solver works on the
standardized columns ``x_j / s_j`` and reports coefficients on the original scale.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy.special import expit

from silab.exceptions import BracketingInfeasible, ValidationError
from silab.glm import log_likelihood

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray

    from silab.models import Dataset

DEFAULT_GRID_SIZE = 50
DEFAULT_CD_TOL = 1e-7
DEFAULT_KKT_TOL = 1e-5
DEFAULT_MAX_SWEEPS = 10_000
DEFAULT_LAMBDA_RATIO = 1e-3
MIN_GRID_SIZE = 2
MAX_ENDPOINT_STEPS = 60
MIN_ENDPOINT_LOG_TOL = 1e-3
ENDPOINT_SPACING_FRACTION = 0.5
MAX_OUTER_ITERATIONS = 100
MAX_HALVINGS = 30
MIN_WEIGHT = 1e-5
AIC_UNIT_PENALTY = 1.0
AIC_STANDARD_PENALTY = 2.0
TIE_RTOL = 1e-12


@dataclass(slots=True)
class LassoFit:
    """The Lasso solution at one regularization level."""

    lam: float
    beta: NDArray[np.float64]
    support: tuple[int, ...]
    penalized_objective: float
    kkt_violation: float
    converged: bool
    sweeps: int
    deviance: float

    def to_dict(self) -> dict[str, Any]:
        """Convert the fit into a JSON-serializable dictionary."""
        return {
            "lambda": self.lam,
            "support": list(self.support),
            "penalized_objective": self.penalized_objective,
            "kkt_violation": self.kkt_violation,
            "converged": self.converged,
            "sweeps": self.sweeps,
            "deviance": self.deviance,
        }


@dataclass(slots=True)
class LassoPath:
    """Lasso fits along a strictly increasing grid of regularization levels."""

    grid: NDArray[np.float64]
    fits: list[LassoFit]
    unpenalized: tuple[int, ...] = ()
    monotone_violations: int = 0

    def __post_init__(self) -> None:
        """Validate grid ordering and alignment with the fits."""
        if len(self.fits) != self.grid.size:
            raise ValidationError("a Lasso path needs exactly one fit per grid point")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValidationError("the regularization grid must be strictly increasing")

    def support_sizes(self) -> list[int]:
        """Return the support size at each grid point, in grid order."""
        return [len(fit.support) for fit in self.fits]

    def to_dict(self) -> dict[str, Any]:
        """Convert the path into a JSON-serializable dictionary."""
        return {
            "grid": self.grid,
            "support_sizes": self.support_sizes(),
            "unpenalized": list(self.unpenalized),
            "monotone_violations": self.monotone_violations,
        }


@dataclass(slots=True)
class AicSelection:
    """The grid point chosen by the information criterion."""

    index: int
    lam: float
    fit: LassoFit
    criterion: float
    criteria: NDArray[np.float64]


class _Problem:
    """Standardized design shared by every fit on one dataset."""

    def __init__(self, dataset: Dataset, unpenalized: Sequence[int] = ()) -> None:
        self.dataset = dataset
        self.y = dataset.y
        self.unpenalized = tuple(sorted(set(unpenalized)))
        for index in self.unpenalized:
            if not 0 <= index < dataset.d:
                message = f"unpenalized index {index} out of range for d={dataset.d}"
                raise ValidationError(message)
        scales = np.std(dataset.X, axis=0, ddof=1)
        free = np.zeros(dataset.d, dtype=bool)
        free[list(self.unpenalized)] = True
        degenerate = (scales <= 0.0) & ~free
        if degenerate.any():
            dropped = [dataset.labels[j] for j in np.flatnonzero(degenerate)]
            logger.warning("Dropping constant columns from selection: {}", ", ".join(dropped))
        scales = np.where(scales > 0.0, scales, 1.0)
        self.scales = scales
        self.Z = np.asfortranarray(dataset.X / scales)
        self.free = free
        self.candidates = ~degenerate
        self.penalized = self.candidates & ~free

    def to_standard(self, beta: NDArray[np.float64]) -> NDArray[np.float64]:
        return beta * self.scales

    def to_original(self, coefficients: NDArray[np.float64]) -> NDArray[np.float64]:
        return coefficients / self.scales

    def deviance(self, eta: NDArray[np.float64]) -> float:
        return float(-2.0 * np.sum(self.y * eta - np.logaddexp(0.0, eta)))

    def objective(self, eta: NDArray[np.float64], b: NDArray[np.float64], lam: float) -> float:
        penalty = lam * float(np.sum(np.abs(b[self.penalized]))) if math.isfinite(lam) else 0.0
        return self.deviance(eta) + penalty

    def gradient(self, eta: NDArray[np.float64]) -> NDArray[np.float64]:
        return -2.0 * (self.Z.T @ (self.y - expit(eta)))

    def kkt(self, b: NDArray[np.float64], gradient: NDArray[np.float64], lam: float) -> NDArray[np.float64]:
        residuals = np.zeros_like(b)
        residuals[self.free] = np.abs(gradient[self.free])
        active = self.penalized & (b != 0.0)
        residuals[active] = np.abs(gradient[active] + lam * np.sign(b[active]))
        inactive = self.penalized & (b == 0.0)
        residuals[inactive] = np.maximum(np.abs(gradient[inactive]) - lam, 0.0)
        return residuals


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _coordinate_descent(  # noqa: PLR0913
    problem: _Problem,
    lam: float,
    b: NDArray[np.float64],
    weights: NDArray[np.float64],
    residual: NDArray[np.float64],
    tol: float,
    sweep_limit: int,
) -> tuple[NDArray[np.float64], int]:
    """Minimize ``sum_i w_i (r_i - z_i'(b' - b))^2 + lam ||b'||_1`` over penalized coordinates.

    Cycles over the active set until the changes are negligible, then admits inactive
    coordinates whose zero-subgradient condition fails, and repeats. Updates run on the
    weighted Gram matrix of the active set, so one coordinate step costs O(|active|).
    """
    Z = problem.Z
    start = b.copy()
    b = b.copy()
    correlations = Z.T @ (weights * residual)
    half_lam = 0.5 * lam
    active = problem.candidates & ((b != 0.0) | problem.free)
    sweeps = 0
    while sweeps < sweep_limit:
        columns = np.flatnonzero(active)
        Z_active = Z[:, columns]
        gram = Z_active.T @ (weights[:, None] * Z_active)
        gradient = correlations[columns] - gram @ (b[columns] - start[columns])
        diagonal = gram.diagonal().tolist()
        free = problem.free[columns].tolist()
        coefficients = b[columns].tolist()
        while sweeps < sweep_limit:
            sweeps += 1
            largest = 0.0
            for position, wss in enumerate(diagonal):
                if wss <= 0.0:
                    continue
                old = coefficients[position]
                rho = float(gradient[position]) + wss * old
                new = rho / wss if free[position] else _soft_threshold(rho, half_lam) / wss
                if new != old:
                    gradient -= gram[:, position] * (new - old)
                    coefficients[position] = new
                    largest = max(largest, abs(new - old))
            if largest < tol:
                break
        b[columns] = coefficients
        current = correlations - Z.T @ (weights * (Z_active @ (b[columns] - start[columns])))
        violators = problem.penalized & ~active & (np.abs(current) > half_lam)
        if not violators.any():
            break
        active |= violators
    return b, sweeps


def _solve(  # noqa: PLR0913
    problem: _Problem,
    lam: float,
    init: NDArray[np.float64] | None,
    tol: float = DEFAULT_CD_TOL,
    kkt_tol: float = DEFAULT_KKT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> tuple[LassoFit, NDArray[np.float64]]:
    """IRLS-wrapped coordinate descent; returns the fit and its standardized coefficients."""
    b = np.zeros(problem.dataset.d) if init is None else init.copy()
    b[~problem.candidates] = 0.0
    eta = problem.Z @ b
    objective = problem.objective(eta, b, lam)
    sweeps = 0
    converged = False
    violation = math.inf
    for _ in range(MAX_OUTER_ITERATIONS):
        fitted = expit(eta)
        weights = np.maximum(fitted * (1.0 - fitted), MIN_WEIGHT)
        residual = (problem.y - fitted) / weights
        proposal, used = _coordinate_descent(problem, lam, b, weights, residual, tol, max(max_sweeps - sweeps, 1))
        sweeps += used
        step = proposal - b
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = b + scale * step
            candidate_eta = problem.Z @ candidate
            candidate_objective = problem.objective(candidate_eta, candidate, lam)
            if candidate_objective <= objective + 1e-12 * (1.0 + abs(objective)):
                break
            scale *= 0.5
        else:
            candidate, candidate_eta, candidate_objective = b, eta, objective
        change = float(np.max(np.abs(candidate - b))) if b.size else 0.0
        b, eta, objective = candidate, candidate_eta, candidate_objective
        violation = float(np.max(problem.kkt(b, problem.gradient(eta), lam), initial=0.0))
        if change < tol and violation <= kkt_tol:
            converged = True
            break
        if sweeps >= max_sweeps:
            break

    if not converged:
        logger.warning("Lasso at lambda={:.4g} stopped after {} sweeps (KKT {:.3g})", lam, sweeps, violation)
    beta = problem.to_original(b)
    support = tuple(int(j) for j in np.flatnonzero((b != 0.0) | problem.free))
    fit = LassoFit(
        lam=lam,
        beta=beta,
        support=support,
        penalized_objective=objective,
        kkt_violation=violation,
        converged=converged,
        sweeps=sweeps,
        deviance=problem.deviance(eta),
    )
    return fit, b


def lasso_fit(  # noqa: PLR0913
    dataset: Dataset,
    lam: float,
    init: ArrayLike | None = None,
    unpenalized: Sequence[int] = (),
    tol: float = DEFAULT_CD_TOL,
    kkt_tol: float = DEFAULT_KKT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> LassoFit:
    """Solve the Lasso at one regularization level by IRLS-wrapped coordinate descent.

    Coordinates listed in `unpenalized` are updated without thresholding. A fit that runs out
    of sweeps is returned with ``converged=False``.
    """
    if not lam >= 0.0:
        message = f"lambda must be non-negative, got {lam}"
        raise ValidationError(message)
    problem = _Problem(dataset, unpenalized)
    start = None if init is None else problem.to_standard(np.asarray(init, dtype=np.float64).reshape(-1))
    fit, _ = _solve(problem, lam, start, tol, kkt_tol, max_sweeps)
    return fit


def kkt_residuals(
    dataset: Dataset,
    fit: LassoFit,
    unpenalized: Sequence[int] = (),
    *,
    original_scale: bool = False,
) -> NDArray[np.float64]:
    """Return per-coordinate KKT residuals of a Lasso fit.

    By default residuals are on the standardized scale the solver works in. With
    `original_scale`, coordinate ``j`` is ``|d_j(-2 loglik) + lam * s_j * sign(beta_j)|`` for
    active coordinates and ``max(|d_j(-2 loglik)| - lam * s_j, 0)`` otherwise, with derivatives
    taken in the raw covariates; that is the standardized residual times ``s_j``.
    """
    problem = _Problem(dataset, unpenalized)
    b = problem.to_standard(fit.beta)
    residuals = problem.kkt(b, problem.gradient(problem.Z @ b), fit.lam)
    return residuals * problem.scales if original_scale else residuals


def _lambda_max(problem: _Problem) -> float:
    if problem.unpenalized:
        _, b = _solve(problem, math.inf, None)
        eta = problem.Z @ b
    else:
        eta = np.zeros(problem.dataset.n)
    gradient = problem.gradient(eta)
    penalized = np.abs(gradient[problem.penalized])
    return float(penalized.max()) if penalized.size else 0.0


def lambda_max(dataset: Dataset, unpenalized: Sequence[int] = ()) -> float:
    """Return the smallest lambda at which every penalized coefficient is zero.

    Without unpenalized coordinates this is ``max_j 2 |sum_i (y_i - 1/2) x_ij| / s_j``.
    """
    return _lambda_max(_Problem(dataset, unpenalized))


def _fit_path(
    problem: _Problem,
    grid: NDArray[np.float64],
    known: dict[float, tuple[LassoFit, NDArray[np.float64]]] | None = None,
) -> LassoPath:
    known = known or {}
    fits: list[LassoFit] = [None] * grid.size  # type: ignore[list-item]
    warm: NDArray[np.float64] | None = None
    for position in range(grid.size - 1, -1, -1):
        lam = float(grid[position])
        fit, warm = known[lam] if lam in known else _solve(problem, lam, warm)
        fits[position] = fit
    sizes = [len(fit.support) for fit in fits]
    violations = sum(1 for smaller, larger in zip(sizes, sizes[1:], strict=False) if larger > smaller)
    if violations:
        logger.warning("Lasso path has {} non-monotone support steps", violations)
    return LassoPath(grid=grid, fits=fits, unpenalized=problem.unpenalized, monotone_violations=violations)


def fit_path(dataset: Dataset, grid: ArrayLike, unpenalized: Sequence[int] = ()) -> LassoPath:
    """Fit the Lasso along an increasing grid, warm-starting from the largest lambda down."""
    return _fit_path(_Problem(dataset, unpenalized), np.asarray(grid, dtype=np.float64))


class _Bracketer:
    """Evaluates support sizes on both halves at probe lambdas, keeping warm starts."""

    def __init__(self, problems: tuple[_Problem, _Problem], log_tol: float = MIN_ENDPOINT_LOG_TOL) -> None:
        self.problems = problems
        self.log_tol = log_tol
        self.warm: list[NDArray[np.float64] | None] = [None, None]
        self.probed: list[dict[float, tuple[LassoFit, NDArray[np.float64]]]] = [{}, {}]

    def sizes(self, lam: float) -> tuple[int, int]:
        result = []
        for half, problem in enumerate(self.problems):
            fit, self.warm[half] = _solve(problem, lam, self.warm[half])
            self.probed[half][lam] = (fit, self.warm[half])
            result.append(len(fit.support))
        logger.debug("Bracketing probe lambda={:.5g}: support sizes {}", lam, result)
        return result[0], result[1]

    def bisect(self, passing: float, failing: float, condition: Callable[[int, int], bool]) -> float:
        """Shrink ``[passing, failing]`` in log space to `log_tol` and return the passing end."""
        for _ in range(MAX_ENDPOINT_STEPS):
            if abs(math.log(failing / passing)) < self.log_tol:
                break
            middle = math.sqrt(passing * failing)
            if condition(*self.sizes(middle)):
                passing = middle
            else:
                failing = middle
        return passing


def _upper_endpoint(bracketer: _Bracketer, lam_top: float, delta1: float) -> float:
    def condition(first: int, second: int) -> bool:
        return min(first, second) > delta1

    if delta1 <= 0.0 or condition(*bracketer.sizes(lam_top)):
        return lam_top
    failing = lam_top
    passing = lam_top
    for _ in range(MAX_ENDPOINT_STEPS):
        passing *= 0.5
        if condition(*bracketer.sizes(passing)):
            break
        failing = passing
    else:
        message = f"no lambda keeps both half supports above delta1={delta1}"
        raise BracketingInfeasible(message)
    return bracketer.bisect(passing, failing, condition)


def _lower_endpoint(bracketer: _Bracketer, lam_k: float, delta2: float, ratio: float) -> float:
    def condition(first: int, second: int) -> bool:
        return max(first, second) < delta2

    floor = lam_k * ratio
    if math.isinf(delta2):
        return floor
    if not condition(*bracketer.sizes(lam_k)):
        message = f"half supports already reach delta2={delta2} at the largest admissible lambda"
        raise BracketingInfeasible(message)
    if condition(*bracketer.sizes(floor)):
        return floor
    return bracketer.bisect(lam_k, floor, condition)


def build_bracketed_paths(  # noqa: PLR0913
    half1: Dataset,
    half2: Dataset,
    delta1: float,
    delta2: float,
    K: int = DEFAULT_GRID_SIZE,
    unpenalized: Sequence[int] = (),
    lambda_ratio: float = DEFAULT_LAMBDA_RATIO,
) -> tuple[LassoPath, LassoPath]:
    """Build one shared log-spaced grid whose endpoint supports respect both brackets, and fit it.

    At the largest lambda both half supports exceed `delta1`; at the smallest lambda both stay
    below `delta2`. A non-positive `delta1` is treated as no lower constraint.
    """
    if not 0.0 <= delta1 < delta2:
        message = f"brackets must satisfy 0 <= delta1 < delta2, got ({delta1}, {delta2})"
        raise ValidationError(message)
    if K < MIN_GRID_SIZE:
        message = f"grid size must be at least 2, got {K}"
        raise ValidationError(message)
    problems = (_Problem(half1, unpenalized), _Problem(half2, unpenalized))
    reachable = min(int(np.count_nonzero(problem.candidates)) for problem in problems)
    if delta1 >= reachable:
        message = f"delta1={delta1} is not below the {reachable} selectable covariates"
        raise BracketingInfeasible(message)

    lam_top = max(_lambda_max(problem) for problem in problems)
    if lam_top <= 0.0:
        raise BracketingInfeasible("the null fit already satisfies the score equations; no penalty range exists")
    # endpoints only need to be resolved to a fraction of the grid's own log spacing
    spacing = math.log(1.0 / lambda_ratio) / (K - 1) if 0.0 < lambda_ratio < 1.0 else 0.0
    bracketer = _Bracketer(problems, max(ENDPOINT_SPACING_FRACTION * spacing, MIN_ENDPOINT_LOG_TOL))
    lam_k = _upper_endpoint(bracketer, lam_top, delta1)
    lam_1 = _lower_endpoint(bracketer, lam_k, delta2, lambda_ratio)
    if not lam_1 < lam_k:
        message = f"the bracket collapses to a single lambda ({lam_k:.5g}) for delta1={delta1}, delta2={delta2}"
        raise BracketingInfeasible(message)
    grid = np.geomspace(lam_1, lam_k, K)
    grid[0], grid[-1] = lam_1, lam_k
    logger.debug("Bracketed grid [{:.5g}, {:.5g}] with {} points", lam_1, lam_k, K)

    with ThreadPoolExecutor(max_workers=2) as pool:
        first, second = pool.map(
            lambda half: _fit_path(problems[half], grid, bracketer.probed[half]),
            range(2),
        )
    return first, second


def aic_select(path: LassoPath, dataset: Dataset, penalty: float = AIC_UNIT_PENALTY) -> AicSelection:
    """Pick the grid point minimizing ``-2 loglik + penalty * ||beta||_0`` on the given half.

    Ties go to the smallest support, then the largest lambda.
    """
    if not path.fits:
        raise ValidationError("cannot select from an empty Lasso path")
    criteria = np.array(
        [-2.0 * log_likelihood(dataset, fit.beta) + penalty * len(fit.support) for fit in path.fits],
    )
    best = float(criteria.min())
    tied = [
        position
        for position, value in enumerate(criteria)
        if math.isclose(value, best, rel_tol=TIE_RTOL, abs_tol=TIE_RTOL)
    ]
    index = min(tied, key=lambda position: (len(path.fits[position].support), -path.grid[position]))
    return AicSelection(
        index=index,
        lam=float(path.grid[index]),
        fit=path.fits[index],
        criterion=float(criteria[index]),
        criteria=criteria,
    )


def single_lasso_select(
    dataset: Dataset,
    K: int = DEFAULT_GRID_SIZE,
    unpenalized: Sequence[int] = (),
    penalty: float = AIC_STANDARD_PENALTY,
    lambda_ratio: float = DEFAULT_LAMBDA_RATIO,
) -> AicSelection:
    """Run one AIC-tuned Lasso on the whole sample over ``[ratio * lambda_max, lambda_max]``."""
    problem = _Problem(dataset, unpenalized)
    top = _lambda_max(problem)
    if top <= 0.0:
        raise BracketingInfeasible("the null fit already satisfies the score equations; no penalty range exists")
    path = _fit_path(problem, np.geomspace(top * lambda_ratio, top, K))
    return aic_select(path, dataset, penalty)
