"""Bias-corrected MLE on a submodel by the iterative bootstrap.

Each iteration simulates `H` response vectors from the submodel at the current iterate,
re-fits the MLE on every one of them, and moves the iterate by the gap between the observed
MLE and the mean simulated MLE.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy.special import expit

from silab.config import DEFAULT_H, DEFAULT_K_MAX
from silab.exceptions import InitialMleFailed, SilabError, TooManySkippedSamples, ValidationError
from silab.glm import MleFit, ParameterBox, fisher_info, fit_mle, fit_mle_batch, log_likelihood, score
from silab.models import RandomStream, derive_stream, restrict
from silab.utils import chunked

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from silab.glm import BatchFit
    from silab.models import Dataset, Submodel

EPSILON_SCALE = 1e-4
RESIM_FACTOR = 10
BATCH_COLUMNS = 50


@dataclass(frozen=True, slots=True)
class IbConfig:
    """Iterative bootstrap tuning; `epsilon` and `resim_limit` default from `p` and `H`."""

    H: int = DEFAULT_H
    epsilon: float | None = None
    k_max: int = DEFAULT_K_MAX
    resim_limit: int | None = None
    stream: RandomStream = field(default_factory=lambda: RandomStream(0))
    crn: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        """Validate the sample count, tolerance and caps."""
        if self.H < 1:
            message = f"H must be at least 1, got {self.H}"
            raise ValidationError(message)
        if self.epsilon is not None and not self.epsilon > 0:
            message = f"epsilon must be positive, got {self.epsilon}"
            raise ValidationError(message)
        if self.k_max < 1:
            message = f"k_max must be at least 1, got {self.k_max}"
            raise ValidationError(message)
        if self.resim_limit is not None and self.resim_limit < 0:
            raise ValidationError("resim_limit must be non-negative")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")

    def tolerance(self, p: int) -> float:
        """Return the convergence tolerance for a `p`-coefficient submodel."""
        return self.epsilon if self.epsilon is not None else EPSILON_SCALE * math.sqrt(p)

    def redraw_limit(self) -> int:
        """Return the number of redraws allowed per iteration."""
        return self.resim_limit if self.resim_limit is not None else RESIM_FACTOR * self.H

    def to_dict(self) -> dict[str, Any]:
        """Convert the configuration into a JSON-serializable dictionary."""
        return {
            "H": self.H,
            "epsilon": self.epsilon,
            "k_max": self.k_max,
            "resim_limit": self.redraw_limit(),
            "stream": self.stream.to_dict(),
            "crn": self.crn,
        }


@dataclass(slots=True)
class IbTrace:
    """Iterates, step sizes and sampling diagnostics of one iterative bootstrap run."""

    iterates: list[NDArray[np.float64]]
    epsilons: list[float]
    skipped_samples: int
    mc_standard_errors: list[NDArray[np.float64]]
    converged: bool
    tolerance: float
    initial_fit: MleFit

    @property
    def iterations(self) -> int:
        """Return the number of bias-correction steps taken."""
        return len(self.epsilons)

    def to_dict(self) -> dict[str, Any]:
        """Convert the trace into a JSON-serializable dictionary."""
        return {
            "iterates": self.iterates,
            "epsilons": self.epsilons,
            "skipped_samples": self.skipped_samples,
            "mc_standard_errors": self.mc_standard_errors,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "initial_fit": self.initial_fit.to_dict(),
        }


def simulate_responses(X_S: NDArray[np.float64], gamma: ArrayLike, stream: RandomStream) -> NDArray[np.float64]:
    """Draw independent Bernoulli responses with means ``expit(X_S @ gamma)``."""
    coefficients = np.asarray(gamma, dtype=np.float64).reshape(-1)
    if coefficients.size != X_S.shape[1]:
        message = f"gamma has length {coefficients.size}, expected {X_S.shape[1]}"
        raise ValidationError(message)
    probabilities = expit(X_S @ coefficients)
    return (stream.generator().random(X_S.shape[0]) < probabilities).astype(np.float64)


class _Sampler:
    """Draws and fits simulated samples, redrawing failed fits from derived streams."""

    def __init__(self, X: NDArray[np.float64], box: ParameterBox, threads: int) -> None:
        self.X = X
        self.box = box
        self.threads = threads

    def _fit(self, Y: NDArray[np.float64], init: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
        # Batch boundaries never depend on the thread count.
        chunks = list(chunked(range(Y.shape[1]), BATCH_COLUMNS))

        def fit_chunk(columns: list[int]) -> BatchFit:
            return fit_mle_batch(self.X, Y[:, columns], init, self.box)

        if self.threads == 1 or len(chunks) == 1:
            batches = [fit_chunk(columns) for columns in chunks]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                batches = list(pool.map(fit_chunk, chunks))
        return np.vstack([batch.betas for batch in batches]), np.concatenate([batch.ok for batch in batches])

    def mles(
        self,
        gamma: NDArray[np.float64],
        streams: list[RandomStream],
        limit: int,
    ) -> tuple[NDArray[np.float64], int]:
        """Return one converged simulated MLE per stream and the number of discarded draws."""
        Y = np.column_stack([simulate_responses(self.X, gamma, stream) for stream in streams])
        betas, ok = self._fit(Y, gamma)
        skipped = 0
        attempt = 0
        while not ok.all():
            failed = np.flatnonzero(~ok)
            skipped += failed.size
            if skipped > limit:
                message = f"{skipped} simulated samples failed to produce an MLE (limit {limit})"
                raise TooManySkippedSamples(message)
            attempt += 1
            redraws = [derive_stream(streams[h], attempt) for h in failed]
            Y_retry = np.column_stack([simulate_responses(self.X, gamma, stream) for stream in redraws])
            retry_betas, retry_ok = self._fit(Y_retry, gamma)
            betas[failed] = retry_betas
            ok[failed] = retry_ok
        if skipped:
            logger.warning("Redrew {} simulated samples whose MLE failed", skipped)
        return betas, skipped


def _iteration_streams(config: IbConfig, k: int) -> list[RandomStream]:
    base = derive_stream(config.stream, 0 if config.crn else k)
    return [derive_stream(base, h) for h in range(config.H)]


def ib_fit(
    dataset: Dataset,
    s: Submodel,
    config: IbConfig | None = None,
    box: ParameterBox | None = None,
) -> tuple[NDArray[np.float64], MleFit, IbTrace]:
    """Run the iterative bootstrap on submodel `s`, starting from the observed-data MLE.

    At least one correction step is always taken. Hitting `k_max` returns the last iterate with
    ``converged=False`` in both the fit and the trace.
    """
    config = config or IbConfig()
    box = box or ParameterBox()
    restricted = restrict(dataset, s)
    if s.p >= dataset.n:
        message = f"the submodel has {s.p} covariates but only {dataset.n} observations"
        raise ValidationError(message)
    try:
        initial = fit_mle(restricted, box=box)
        initial.raise_if_not_converged()
    except SilabError as exc:
        message = f"MLE on the observed data failed: {exc}"
        raise InitialMleFailed(message) from exc

    tolerance = config.tolerance(s.p)
    limit = config.redraw_limit()
    sampler = _Sampler(restricted.X, box, config.threads)
    start = initial.beta
    current = start
    iterates = [start]
    epsilons: list[float] = []
    standard_errors: list[NDArray[np.float64]] = []
    skipped = 0
    converged = False
    for k in range(1, config.k_max + 1):
        simulated, dropped = sampler.mles(current, _iteration_streams(config, k), limit)
        skipped += dropped
        simulated_mean = simulated.mean(axis=0)
        spread = simulated.std(axis=0, ddof=1) if config.H > 1 else np.zeros(s.p)
        standard_errors.append(spread / math.sqrt(config.H))
        updated = box.clamp(start + current - simulated_mean)
        step = float(np.linalg.norm(updated - current))
        iterates.append(updated)
        epsilons.append(step)
        current = updated
        logger.debug("Bootstrap iteration {}: step {:.3g}", k, step)
        if step < tolerance:
            converged = True
            break

    if not converged:
        logger.warning(
            "Iterative bootstrap stopped at k_max={} with step {:.3g} (tolerance {:.3g})",
            config.k_max,
            epsilons[-1],
            tolerance,
        )
    gradient = score(restricted, current)
    fit = MleFit(
        beta=current,
        converged=converged,
        iterations=len(epsilons),
        score_norm=float(np.max(np.abs(gradient))),
        info=fisher_info(restricted, current),
        loglik=log_likelihood(restricted, current),
    )
    trace = IbTrace(
        iterates=iterates,
        epsilons=epsilons,
        skipped_samples=skipped,
        mc_standard_errors=standard_errors,
        converged=converged,
        tolerance=tolerance,
        initial_fit=initial,
    )
    return current, fit, trace


def fixed_point_residual(
    dataset: Dataset,
    s: Submodel,
    beta_hat: ArrayLike,
    H_check: int,
    stream: RandomStream,
    box: ParameterBox | None = None,
) -> float:
    """Return ``||observed MLE - mean simulated MLE at beta_hat||``, near zero at the exact fixed point."""
    if H_check < 1:
        message = f"H_check must be at least 1, got {H_check}"
        raise ValidationError(message)
    box = box or ParameterBox()
    restricted = restrict(dataset, s)
    observed = fit_mle(restricted, box=box).beta
    gamma = box.clamp(np.asarray(beta_hat, dtype=np.float64).reshape(-1))
    streams = [derive_stream(stream, h) for h in range(H_check)]
    simulated, _ = _Sampler(restricted.X, box, 1).mles(gamma, streams, RESIM_FACTOR * H_check)
    return float(np.linalg.norm(observed - simulated.mean(axis=0)))
