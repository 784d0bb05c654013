"""Logistic-model primitives: likelihood, score, Fisher information and the MLE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy.linalg
from loguru import logger
from scipy.special import expit

from silab.exceptions import MaxIterExceeded, SeparationDetected, SingularInformation, ValidationError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from silab.models import Dataset

DEFAULT_BOX_BOUND = 15.0
DEFAULT_SCORE_TOL = 1e-8
DEFAULT_MAX_ITER = 100
SEPARATION_ETA = 30.0
SEPARATION_MEAN_TOL = 1e-8
RIDGE_START = 1e-10
RIDGE_STOP = 1e-4
RIDGE_FACTOR = 10.0
MAX_HALVINGS = 50
UNIT_NORM_TOL = 1e-10
FOURTH_MOMENT_WARN = 25.0
DIRECTIONAL_MOMENT_WARN = 30.0
CONDITION_WARN = 1e-8


@dataclass(frozen=True, slots=True)
class ParameterBox:
    """The compact parameter space ``[-bound, bound]^p``."""

    bound: float = DEFAULT_BOX_BOUND

    def __post_init__(self) -> None:
        """Reject non-finite or non-positive bounds."""
        if not math.isfinite(self.bound) or self.bound <= 0:
            message = f"box bound must be finite and positive, got {self.bound}"
            raise ValidationError(message)

    def clamp(self, beta: NDArray[np.float64]) -> NDArray[np.float64]:
        """Project coefficients onto the box."""
        return np.clip(beta, -self.bound, self.bound)

    def contains(self, beta: NDArray[np.float64]) -> bool:
        """Return whether every coefficient lies inside the box."""
        return bool(np.all(np.abs(beta) <= self.bound))

    def at_bound(self, beta: NDArray[np.float64]) -> NDArray[np.bool_]:
        """Return which coefficients sit on the box boundary."""
        return np.abs(beta) >= self.bound * (1.0 - 1e-12)


@dataclass(slots=True)
class MleFit:
    """The MLE on a (sub)model with convergence diagnostics and Fisher information."""

    beta: NDArray[np.float64]
    converged: bool
    iterations: int
    score_norm: float
    info: NDArray[np.float64]
    loglik: float

    @property
    def p(self) -> int:
        """Return the number of coefficients."""
        return int(self.beta.size)

    def raise_if_not_converged(self) -> None:
        """Raise `MaxIterExceeded` for a flagged, non-converged fit."""
        if not self.converged:
            message = f"MLE did not converge after {self.iterations} iterations (score {self.score_norm:.3g})"
            raise MaxIterExceeded(message)

    def to_dict(self) -> dict[str, Any]:
        """Convert the fit into a JSON-serializable dictionary."""
        return {
            "beta": self.beta,
            "converged": self.converged,
            "iterations": self.iterations,
            "score_norm": self.score_norm,
            "loglik": self.loglik,
        }


class BatchStatus(IntEnum):
    """Outcome of one column of a batched MLE fit."""

    CONVERGED = 0
    SEPARATED = 1
    NOT_CONVERGED = 2
    SINGULAR = 3


@dataclass(slots=True)
class BatchFit:
    """Coefficients and per-column outcomes of a batched MLE fit."""

    betas: NDArray[np.float64]
    status: NDArray[np.int8]
    iterations: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def ok(self) -> NDArray[np.bool_]:
        """Return the mask of converged columns."""
        return self.status == BatchStatus.CONVERGED


def mean(eta: ArrayLike) -> Any:  # noqa: ANN401
    """Return the logistic mean ``exp(eta) / (1 + exp(eta))``.

    The evaluation never exponentiates a large positive argument, so it is finite for any finite
    input. Scalars in, scalar out.
    """
    result = expit(np.asarray(eta, dtype=np.float64))
    return float(result) if np.ndim(result) == 0 else result


def _loglik(X: NDArray[np.float64], y: NDArray[np.float64], beta: NDArray[np.float64]) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _score(X: NDArray[np.float64], y: NDArray[np.float64], beta: NDArray[np.float64]) -> NDArray[np.float64]:
    return X.T @ (y - expit(X @ beta))


def _information(X: NDArray[np.float64], weights: NDArray[np.float64]) -> NDArray[np.float64]:
    info = (X.T * weights) @ X
    return 0.5 * (info + info.T)


def _variance_weights(eta: NDArray[np.float64]) -> NDArray[np.float64]:
    return expit(eta) * expit(-eta)


def log_likelihood(dataset: Dataset, beta: ArrayLike) -> float:
    """Return the Bernoulli log-likelihood of `beta`, evaluated without overflow."""
    return _loglik(dataset.X, dataset.y, _as_coefficients(beta, dataset.d))


def score(dataset: Dataset, beta: ArrayLike) -> NDArray[np.float64]:
    """Return the gradient of the log-likelihood, ``sum_i (y_i - g(x_i'beta)) x_i``."""
    return _score(dataset.X, dataset.y, _as_coefficients(beta, dataset.d))


def fisher_info(dataset: Dataset, beta: ArrayLike) -> NDArray[np.float64]:
    """Return ``X' W X`` with ``W_ii = g(x_i'beta)(1 - g(x_i'beta))``; exactly symmetric."""
    coefficients = _as_coefficients(beta, dataset.d)
    return _information(dataset.X, _variance_weights(dataset.X @ coefficients))


def _as_coefficients(beta: ArrayLike, d: int) -> NDArray[np.float64]:
    coefficients = np.asarray(beta, dtype=np.float64).reshape(-1)
    if coefficients.size != d:
        message = f"coefficient vector has length {coefficients.size}, expected {d}"
        raise ValidationError(message)
    return coefficients


def cholesky_with_ridge(info: NDArray[np.float64]) -> tuple[tuple[NDArray[np.float64], bool], float]:
    """Factorize an information matrix, adding an escalating ridge when it is not positive definite.

    The ridge starts at ``1e-10 * trace / p`` and grows tenfold up to ``1e-4 * trace / p``.
    Returns the `cho_factor` pair and the ridge that was added.
    """
    try:
        return scipy.linalg.cho_factor(info, lower=True, check_finite=False), 0.0
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    p = info.shape[0]
    scale = float(np.trace(info)) / p if p else 0.0
    if not math.isfinite(scale) or scale <= 0.0:
        raise SingularInformation("Fisher information has a non-positive trace.")
    factor = RIDGE_START
    while factor <= RIDGE_STOP * (1.0 + 1e-9):
        ridge = factor * scale
        try:
            cho = scipy.linalg.cho_factor(info + ridge * np.eye(p), lower=True, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            factor *= RIDGE_FACTOR
            continue
        logger.debug("Fisher information factorized with ridge {:.3g}", ridge)
        return cho, ridge
    raise SingularInformation("Fisher information is singular even after ridge escalation.")


def _separated(
    eta: NDArray[np.float64],
    y: NDArray[np.float64],
    beta: NDArray[np.float64],
    score_norm: float,
    box: ParameterBox,
    tol: float,
) -> bool:
    """Return whether every response is reproduced exactly or the box pins an iterate with a live score."""
    if np.any(np.abs(eta) > SEPARATION_ETA) and np.all(np.abs(expit(eta) - y) < SEPARATION_MEAN_TOL):
        return True
    return bool(box.at_bound(beta).any() and score_norm > tol)


def fit_mle(
    dataset: Dataset,
    init: ArrayLike | None = None,
    box: ParameterBox | None = None,
    tol: float = DEFAULT_SCORE_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MleFit:
    """Compute the MLE by Newton steps with step-halving, clamped to the parameter box.

    Returns a flagged fit (``converged=False``) when `max_iter` is exhausted and raises
    `SeparationDetected` when the likelihood has no interior maximizer.
    """
    box = box or ParameterBox()
    X, y = dataset.X, dataset.y
    if dataset.d >= dataset.n:
        message = f"the MLE needs fewer covariates than observations, got d={dataset.d}, n={dataset.n}"
        raise ValidationError(message)
    beta = np.zeros(dataset.d) if init is None else _as_coefficients(init, dataset.d).copy()
    if not box.contains(beta):
        raise ValidationError("initial coefficients lie outside the parameter box")

    loglik = _loglik(X, y, beta)
    gradient = _score(X, y, beta)
    iterations = 0
    while float(np.max(np.abs(gradient))) > tol and iterations < max_iter:
        iterations += 1
        eta = X @ beta
        cho, _ = cholesky_with_ridge(_information(X, _variance_weights(eta)))
        step = scipy.linalg.cho_solve(cho, gradient, check_finite=False)
        accepted = False
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = box.clamp(beta + scale * step)
            candidate_loglik = _loglik(X, y, candidate)
            if candidate_loglik >= loglik - 1e-13 * (1.0 + abs(loglik)):
                accepted = True
                break
            scale *= 0.5
        if not accepted or np.array_equal(candidate, beta):
            logger.debug("MLE line search stalled after {} iterations", iterations)
            break
        beta, loglik = candidate, candidate_loglik
        gradient = _score(X, y, beta)

    score_norm = float(np.max(np.abs(gradient)))
    converged = score_norm <= tol
    if _separated(X @ beta, y, beta, score_norm, box, tol):
        message = f"separation detected after {iterations} Newton steps"
        raise SeparationDetected(message)
    return MleFit(
        beta=beta,
        converged=converged,
        iterations=iterations,
        score_norm=score_norm,
        info=_information(X, _variance_weights(X @ beta)),
        loglik=loglik,
    )


def _batch_loglik(X: NDArray[np.float64], Y: NDArray[np.float64], B: NDArray[np.float64]) -> NDArray[np.float64]:
    eta = X @ B.T
    return np.sum(Y * eta - np.logaddexp(0.0, eta), axis=0)


def _mark_separated(  # noqa: PLR0913
    X: NDArray[np.float64],
    Y: NDArray[np.float64],
    betas: NDArray[np.float64],
    status: NDArray[np.int8],
    box: ParameterBox,
    tol: float,
) -> None:
    finished = np.flatnonzero(status != BatchStatus.SINGULAR)
    if finished.size == 0:
        return
    eta = X @ betas[finished].T
    scores = np.max(np.abs(X.T @ (Y[:, finished] - expit(eta))), axis=0)
    for offset, column in enumerate(finished):
        if _separated(eta[:, offset], Y[:, column], betas[column], float(scores[offset]), box, tol):
            status[column] = BatchStatus.SEPARATED


def fit_mle_batch(
    X: NDArray[np.float64],
    Y: NDArray[np.float64],
    init: NDArray[np.float64],
    box: ParameterBox,
    tol: float = DEFAULT_SCORE_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BatchFit:
    """Fit one MLE per column of `Y` on the shared design `X`, all columns in lock-step.

    Each column follows the same Newton/step-halving/separation rules as `fit_mle`; columns
    are independent, so results do not depend on which other columns share the batch.
    """
    n, p = X.shape
    H = Y.shape[1]
    betas = np.tile(np.asarray(init, dtype=np.float64).reshape(1, p), (H, 1))
    status = np.full(H, BatchStatus.NOT_CONVERGED, dtype=np.int8)
    iterations = np.zeros(H, dtype=np.int64)
    active = np.ones(H, dtype=bool)
    logliks = _batch_loglik(X, Y, betas)

    for _ in range(max_iter + 1):
        eta = X @ betas.T
        gradients = (X.T @ (Y - expit(eta))).T
        score_norms = np.max(np.abs(gradients), axis=1)
        done = active & (score_norms <= tol)
        status[done] = BatchStatus.CONVERGED
        active &= ~done
        active &= iterations < max_iter
        if not active.any():
            break

        idx = np.flatnonzero(active)
        weights = _variance_weights(eta[:, idx])
        infos = np.einsum("ih,ij,ik->hjk", weights, X, X, optimize=True)
        steps = np.empty((idx.size, p))
        for row, column in enumerate(idx):
            try:
                cho, _ = cholesky_with_ridge(infos[row])
            except SingularInformation:
                status[column] = BatchStatus.SINGULAR
                active[column] = False
                steps[row] = 0.0
                continue
            steps[row] = scipy.linalg.cho_solve(cho, gradients[column], check_finite=False)

        scale = np.ones(idx.size)
        accepted = ~active[idx]
        candidates = betas[idx].copy()
        candidate_logliks = logliks[idx].copy()
        for _ in range(MAX_HALVINGS):
            pending = np.flatnonzero(~accepted)
            if pending.size == 0:
                break
            trial = box.clamp(betas[idx[pending]] + scale[pending, None] * steps[pending])
            trial_loglik = _batch_loglik(X, Y[:, idx[pending]], trial)
            base = logliks[idx[pending]]
            ok = trial_loglik >= base - 1e-13 * (1.0 + np.abs(base))
            candidates[pending[ok]] = trial[ok]
            candidate_logliks[pending[ok]] = trial_loglik[ok]
            accepted[pending[ok]] = True
            scale[pending[~ok]] *= 0.5

        stuck = ~accepted | np.all(candidates == betas[idx], axis=1)
        stalled = idx[stuck & active[idx]]
        active[stalled] = False
        rows = np.flatnonzero(~stuck & active[idx])
        moved = idx[rows]
        betas[moved] = candidates[rows]
        logliks[moved] = candidate_logliks[rows]
        iterations[moved] += 1

    _mark_separated(X, Y, betas, status, box, tol)

    return BatchFit(betas=betas, status=status, iterations=iterations)


def _inverse_quadratic_form(info: NDArray[np.float64], u: NDArray[np.float64]) -> float:
    cho, ridge = cholesky_with_ridge(info)
    if ridge:
        logger.warning("Plug-in variance used a ridge of {:.3g} on the Fisher information", ridge)
    return float(u @ scipy.linalg.cho_solve(cho, u, check_finite=False))


def plugin_variance(fit: MleFit, u: ArrayLike, n: int) -> float:
    """Return ``n * u' info^{-1} u`` through a Cholesky solve."""
    direction = np.asarray(u, dtype=np.float64).reshape(-1)
    if direction.size != fit.p:
        message = f"direction has length {direction.size}, expected {fit.p}"
        raise ValidationError(message)
    if abs(float(np.linalg.norm(direction)) - 1.0) > UNIT_NORM_TOL:
        raise ValidationError("direction must have unit Euclidean norm")
    return n * _inverse_quadratic_form(fit.info, direction)


def exact_variance(dataset: Dataset, beta: ArrayLike, j: int) -> float:
    """Return ``n * (info(beta)^{-1})_{jj}`` at a known coefficient vector."""
    direction = np.zeros(dataset.d)
    direction[j] = 1.0
    return dataset.n * _inverse_quadratic_form(fisher_info(dataset, beta), direction)


@dataclass(slots=True)
class ConditionCheck:
    """One empirical surrogate of a design regularity condition."""

    name: str
    value: float
    passed: bool
    detail: str

    def to_dict(self) -> dict[str, Any]:
        """Convert the check into a JSON-serializable dictionary."""
        return {"name": self.name, "value": self.value, "passed": self.passed, "detail": self.detail}


@dataclass(slots=True)
class DesignDiagnostics:
    """Advisory report on the design regularity conditions."""

    n: int
    p: int
    checks: list[ConditionCheck]

    @property
    def passed(self) -> bool:
        """Return whether every check passed."""
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict[str, Any]:
        """Convert the report into a JSON-serializable dictionary."""
        return {"n": self.n, "p": self.p, "passed": self.passed, "checks": [check.to_dict() for check in self.checks]}


def design_diagnostics(dataset: Dataset, box: ParameterBox | None = None) -> DesignDiagnostics:
    """Evaluate empirical surrogates of the five design conditions; never blocks estimation.

    The directional fourth moment is maximized over the eigenvectors of ``X'X`` and the
    coordinate axes. The minimum conditional variance is attained at the box corner aligned
    with each row, where ``|x_i'gamma| = bound * ||x_i||_1``.
    """
    box = box or ParameterBox()
    X = dataset.X
    n, p = X.shape
    row_norms = np.linalg.norm(X, axis=1)
    gram = _information(X, np.ones(n)) / n
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    min_eig, max_eig = float(eigenvalues[0]), float(eigenvalues[-1])

    fourth_moment = float(np.sum(row_norms**4)) / (n * p * p)
    directions = np.hstack([eigenvectors, np.eye(p)])
    directional = float(np.max(np.sum((X @ directions) ** 4, axis=0))) / n
    corner_eta = box.bound * np.sum(np.abs(X), axis=1)
    min_variance = float(np.min(_variance_weights(corner_eta)))

    checks = [
        ConditionCheck(
            "fourth_moment_sum",
            fourth_moment,
            fourth_moment <= FOURTH_MOMENT_WARN,
            "sum_i ||x_i||^4 / (n p^2)",
        ),
        ConditionCheck(
            "directional_fourth_moment",
            directional,
            directional <= DIRECTIONAL_MOMENT_WARN,
            "max over eigen/axis directions of sum_i (u'x_i)^4 / n",
        ),
        ConditionCheck(
            "min_eigenvalue",
            min_eig,
            min_eig > CONDITION_WARN * max(max_eig, 1.0),
            f"eigenvalues of X'X/n in [{min_eig:.4g}, {max_eig:.4g}]",
        ),
        ConditionCheck(
            "min_row_norm",
            float(np.min(row_norms)),
            float(np.min(row_norms)) > 0.0,
            "min_i ||x_i||_2",
        ),
        ConditionCheck(
            "min_conditional_variance",
            min_variance,
            min_variance > np.finfo(np.float64).tiny,
            f"min_i g(1-g) at the box corners, bound {box.bound}",
        ),
    ]
    for check in checks:
        if not check.passed:
            logger.warning("Design condition {} flagged: value {:.4g} ({})", check.name, check.value, check.detail)
    return DesignDiagnostics(n=n, p=p, checks=checks)
