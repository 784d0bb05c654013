"""Synthetic logistic designs and the Monte-Carlo harness for bias, size and power."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy import stats
from scipy.special import expit

from silab import __version__
from silab.bcmle import IbConfig
from silab.config import AUTO, DEFAULT_ALPHA_GRID, DEFAULT_BOX_BOUND, DEFAULT_GRID_SIZE, DEFAULT_H, DEFAULT_K_MAX, Delta
from silab.exceptions import InvalidAlpha, InvalidSparsity, SilabError, ValidationError
from silab.glm import ParameterBox, exact_variance
from silab.inference import SilabResult, fit_full_model, silab_fit, z_test
from silab.lasso import DEFAULT_LAMBDA_RATIO, single_lasso_select
from silab.models import Alternative, InclusionMode, RandomStream, RunStatus, build_dataset, derive_stream, restrict
from silab.sila import SilaConfig
from silab.utils import chunked, json_dumps, stable_hash, utcnow

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from silab.models import Dataset
    from silab.persistence import RunStore

J0_INDEX = 3
BETA_J0 = 0.25
SPARSITY_BLOCK = 5
FIRST_BLOCK = (4, 8, 12, 16, 20)
MIN_SIM_OBSERVATIONS = 20

REPLICATION_TAG = 0
FIXED_DESIGN_TAG = 1
COVARIATE_TAG = 0
RESPONSE_TAG = 1
SPLIT_TAG = 2
BOOTSTRAP_TAG = 3

ARMS = ("bcmle", "mle")
# numeric failures inside one replication are recorded rather than aborting the run
RECORDED_ERRORS = (SilabError, ArithmeticError, ValueError, np.linalg.LinAlgError)


class SelectionMode(StrEnum):
    """How the submodel is chosen inside each replication."""

    SILA = "sila"
    FULL = "full"


@dataclass(frozen=True, slots=True)
class SimSetting:
    """Sample size, dimension, sparsity and covariate correlation of a simulated design."""

    n: int
    d: int
    d0: int
    rho: float = 0.0
    replications: int = 500
    master_seed: int = 0
    fixed_design: bool = False
    name: str = "custom"

    def __post_init__(self) -> None:
        """Validate the sparsity pattern, the dimension and the correlation."""
        if self.d0 < 0 or self.d0 % SPARSITY_BLOCK or (0 < self.d0 < SPARSITY_BLOCK):
            message = f"d0 must be 0 or a positive multiple of {SPARSITY_BLOCK}, got {self.d0}"
            raise InvalidSparsity(message)
        if self.d0 > 0 and 4 * self.d0 > self.d:
            message = f"d0={self.d0} needs d >= {4 * self.d0}, got d={self.d}"
            raise InvalidSparsity(message)
        if self.d <= J0_INDEX:
            message = f"d must exceed {J0_INDEX} so the coefficient of interest exists, got {self.d}"
            raise ValidationError(message)
        if self.n < MIN_SIM_OBSERVATIONS:
            message = f"n must be at least {MIN_SIM_OBSERVATIONS}, got {self.n}"
            raise ValidationError(message)
        if not 0.0 <= self.rho < 1.0:
            message = f"rho must lie in [0, 1), got {self.rho}"
            raise ValidationError(message)
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")

    @property
    def true_support(self) -> tuple[int, ...]:
        """Return the 0-based indices of the non-zero true coefficients."""
        return tuple(int(j) for j in np.flatnonzero(gen_beta_star(self.d, self.d0)))

    def to_dict(self) -> dict[str, Any]:
        """Convert the setting into a JSON-serializable dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> SimSetting:
        """Build a setting from its dictionary form."""
        return cls(**payload)


def setting_a(  # noqa: PLR0913
    rho: float = 0.0,
    d: int = 400,
    n: int = 400,
    replications: int = 500,
    master_seed: int = 0,
    *,
    fixed_design: bool = False,
) -> SimSetting:
    """Return the varying-correlation design with 20 signals."""
    return SimSetting(
        n=n,
        d=d,
        d0=20,
        rho=rho,
        replications=replications,
        master_seed=master_seed,
        fixed_design=fixed_design,
        name="A",
    )


def setting_b(  # noqa: PLR0913
    d0: int = 20,
    d: int = 400,
    n: int = 400,
    replications: int = 500,
    master_seed: int = 0,
    *,
    fixed_design: bool = False,
) -> SimSetting:
    """Return the varying-sparsity design at correlation 0.4."""
    return SimSetting(
        n=n,
        d=d,
        d0=d0,
        rho=0.4,
        replications=replications,
        master_seed=master_seed,
        fixed_design=fixed_design,
        name="B",
    )


@dataclass(frozen=True, slots=True)
class TestSpec:
    """A named one-sided or two-sided test of the coefficient of interest."""

    __test__ = False

    name: str
    null_value: float
    alternative: Alternative = Alternative.GREATER

    def to_dict(self) -> dict[str, Any]:
        """Convert the test specification into a JSON-serializable dictionary."""
        return {"name": self.name, "null_value": self.null_value, "alternative": self.alternative.value}


SIZE_TEST = TestSpec("test1", BETA_J0, Alternative.GREATER)
POWER_TEST = TestSpec("test2", 0.0, Alternative.GREATER)
DEFAULT_TESTS = (SIZE_TEST, POWER_TEST)


@dataclass(frozen=True, slots=True)
class MethodConfig:
    """Estimation settings applied identically to every replication."""

    selection: SelectionMode = SelectionMode.SILA
    delta1: Delta = AUTO
    delta2: Delta = AUTO
    K: int = DEFAULT_GRID_SIZE
    inclusion_mode: InclusionMode = InclusionMode.UNION_J0
    lambda_ratio: float = DEFAULT_LAMBDA_RATIO
    H: int = DEFAULT_H
    epsilon: float | None = None
    k_max: int = DEFAULT_K_MAX
    box_bound: float = DEFAULT_BOX_BOUND
    crn: bool = False
    compare_single_lasso: bool = False

    def to_dict(self) -> dict[str, Any]:
        """Convert the configuration into a JSON-serializable dictionary."""
        payload = asdict(self)
        payload["selection"] = self.selection.value
        payload["inclusion_mode"] = self.inclusion_mode.value
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> MethodConfig:
        """Build a configuration from its dictionary form."""
        values = dict(payload)
        values["selection"] = SelectionMode(values.get("selection", SelectionMode.SILA))
        values["inclusion_mode"] = InclusionMode(values.get("inclusion_mode", InclusionMode.UNION_J0))
        return cls(**values)


def gen_beta_star(d: int, d0: int) -> NDArray[np.float64]:
    """Return the true coefficients: 0.25 at 1-based positions 4..20 step 4, then a shared amplitude to ``4*d0``."""
    if d0 < 0 or d0 % SPARSITY_BLOCK or (0 < d0 < SPARSITY_BLOCK):
        message = f"d0 must be 0 or a positive multiple of {SPARSITY_BLOCK}, got {d0}"
        raise InvalidSparsity(message)
    if 4 * d0 > d:
        message = f"d0={d0} needs d >= {4 * d0}, got d={d}"
        raise InvalidSparsity(message)
    beta = np.zeros(d)
    if d0 == 0:
        return beta
    beta[[position - 1 for position in FIRST_BLOCK]] = BETA_J0
    if d0 > SPARSITY_BLOCK:
        beta[np.arange(24, 4 * d0 + 1, 4) - 1] = 3.0 / (4.0 * math.sqrt(d0 / SPARSITY_BLOCK - 1))
    return beta


def gen_covariates(n: int, d: int, rho: float, stream: RandomStream) -> NDArray[np.float64]:
    """Draw `n` rows of a Gaussian AR(1) design with unit variances and lag-one correlation `rho`."""
    if not 0.0 <= rho < 1.0:
        message = f"rho must lie in [0, 1), got {rho}"
        raise ValidationError(message)
    X = np.asfortranarray(stream.generator().standard_normal((n, d)))
    if rho > 0.0:
        innovation = math.sqrt(1.0 - rho * rho)
        for k in range(1, d):
            X[:, k] = rho * X[:, k - 1] + innovation * X[:, k]
    return X


def _labels(d: int) -> list[str]:
    return [f"x{j + 1}" for j in range(d)]


def _replication_stream(setting: SimSetting, rep: int) -> RandomStream:
    return RandomStream(setting.master_seed, (REPLICATION_TAG, rep))


def fixed_covariates(setting: SimSetting) -> NDArray[np.float64]:
    """Return the design shared by every replication of a fixed-design setting."""
    stream = RandomStream(setting.master_seed, (FIXED_DESIGN_TAG,))
    return gen_covariates(setting.n, setting.d, setting.rho, stream)


def gen_dataset(
    setting: SimSetting,
    rep: int,
    design: NDArray[np.float64] | None = None,
) -> tuple[Dataset, NDArray[np.float64]]:
    """Return replication `rep` of `setting` with its true coefficients.

    Fixed-design settings reuse `design` (drawn once when omitted) and only redraw responses.
    """
    if not 0 <= rep < setting.replications:
        message = f"replication {rep} out of range for {setting.replications} replications"
        raise ValidationError(message)
    stream = _replication_stream(setting, rep)
    if setting.fixed_design:
        X = design if design is not None else fixed_covariates(setting)
    else:
        X = gen_covariates(setting.n, setting.d, setting.rho, derive_stream(stream, COVARIATE_TAG))
    beta_star = gen_beta_star(setting.d, setting.d0)
    probabilities = expit(X @ beta_star)
    uniforms = derive_stream(stream, RESPONSE_TAG).generator().random(setting.n)
    y = (uniforms < probabilities).astype(np.float64)
    return build_dataset(y, X, _labels(setting.d)), beta_star


@dataclass(slots=True)
class ReplicationRecord:
    """Outcome of one replication; aggregates are always recomputed from these."""

    rep: int
    ok: bool
    stage: str | None = None
    reason: str | None = None
    beta4_hat: float = math.nan
    sigma2_hat: float = math.nan
    mle_beta4_hat: float = math.nan
    mle_sigma2_hat: float = math.nan
    submodel_size: int = 0
    screened: bool = False
    spurious: int = 0
    single_lasso_spurious: int | None = None
    exact_sigma2: float | None = None
    ib_converged: bool = False
    ib_iterations: int = 0
    skipped_samples: int = 0

    def arm(self, name: str) -> tuple[float, float]:
        """Return ``(estimate, plug-in variance)`` for an estimator arm."""
        if name == "bcmle":
            return self.beta4_hat, self.sigma2_hat
        return self.mle_beta4_hat, self.mle_sigma2_hat

    def to_dict(self) -> dict[str, Any]:
        """Convert the record into a JSON-serializable dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> ReplicationRecord:
        """Build a record from its stored form; missing floats come back as NaN."""
        values = dict(payload)
        for key in ("beta4_hat", "sigma2_hat", "mle_beta4_hat", "mle_sigma2_hat"):
            if values.get(key) is None:
                values[key] = math.nan
        return cls(**values)


def _spurious(indices: Sequence[int], truth: set[int]) -> int:
    return sum(1 for index in indices if index not in truth)


def _estimate(dataset: Dataset, setting: SimSetting, method: MethodConfig, rep: int) -> SilabResult:
    stream = _replication_stream(setting, rep)
    box = ParameterBox(method.box_bound)
    ib_config = IbConfig(
        H=method.H,
        epsilon=method.epsilon,
        k_max=method.k_max,
        stream=derive_stream(stream, BOOTSTRAP_TAG),
        crn=method.crn,
    )
    if method.selection == SelectionMode.FULL:
        return fit_full_model(dataset, J0_INDEX, ib_config, box)
    sila_config = SilaConfig(
        delta1=method.delta1,
        delta2=method.delta2,
        K=method.K,
        inclusion_mode=method.inclusion_mode,
        split_seed=derive_stream(stream, SPLIT_TAG),
        lambda_ratio=method.lambda_ratio,
    )
    return silab_fit(dataset, J0_INDEX, sila_config, ib_config, box)


def run_replication(
    setting: SimSetting,
    method: MethodConfig,
    rep: int,
    design: NDArray[np.float64] | None = None,
) -> tuple[ReplicationRecord, float]:
    """Run one replication and return its record with the elapsed seconds.

    Estimation and numeric failures become failed records carrying the error class; anything
    else propagates.
    """
    started = time.perf_counter()
    dataset, beta_star = gen_dataset(setting, rep, design)
    truth = set(setting.true_support) | {J0_INDEX}
    single_spurious = None
    if method.compare_single_lasso:
        try:
            single = single_lasso_select(dataset, method.K, lambda_ratio=method.lambda_ratio)
            single_spurious = _spurious(single.fit.support, truth)
        except RECORDED_ERRORS as exc:
            logger.warning("Single-Lasso comparison failed in replication {}: {}", rep, exc)
    try:
        result = _estimate(dataset, setting, method, rep)
    except RECORDED_ERRORS as exc:
        if isinstance(exc, SilabError):
            logger.warning("Replication {} failed: {}", rep, exc)
        else:
            logger.opt(exception=exc).error("Replication {} failed unexpectedly: {}", rep, exc)
        record = ReplicationRecord(
            rep=rep,
            ok=False,
            stage=exc.stage if isinstance(exc, SilabError) else "internal",
            reason=f"{type(exc).__name__}: {exc}",
            single_lasso_spurious=single_spurious,
        )
        return record, time.perf_counter() - started

    indices = result.submodel.indices
    screened = set(setting.true_support).issubset(indices)
    exact = None
    if screened:
        exact = exact_variance(restrict(dataset, result.submodel), beta_star[list(indices)], result.j0_prime)
    record = ReplicationRecord(
        rep=rep,
        ok=True,
        beta4_hat=result.beta_j0,
        sigma2_hat=result.sigma2_j0,
        mle_beta4_hat=result.mle_beta_j0,
        mle_sigma2_hat=result.mle_sigma2_j0,
        submodel_size=result.submodel.p,
        screened=screened,
        spurious=_spurious(indices, truth),
        single_lasso_spurious=single_spurious,
        exact_sigma2=exact,
        ib_converged=result.converged,
        ib_iterations=result.ib_trace.iterations,
        skipped_samples=result.ib_trace.skipped_samples,
    )
    return record, time.perf_counter() - started


type ReplicationJob = tuple[SimSetting, MethodConfig, int, NDArray[np.float64] | None]


def _replication_job(payload: ReplicationJob) -> tuple[ReplicationRecord, float]:
    setting, method, rep, design = payload
    return run_replication(setting, method, rep, design)


@dataclass(slots=True)
class McReport:
    """Per-replication records of a Monte-Carlo run plus the aggregates derived from them."""

    setting: SimSetting
    method: MethodConfig
    tests: tuple[TestSpec, ...]
    alpha_grid: tuple[float, ...]
    records: list[ReplicationRecord]
    aggregates: dict[str, Any]
    run_key: str
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def failure_fraction(self) -> float:
        """Return the fraction of failed replications."""
        return self.aggregates["failures"]["fraction"]

    def size_power_rows(self, arm: str = "bcmle") -> list[dict[str, Any]]:
        """Return one row per (test, alpha) for an estimator arm."""
        return [
            {key: row[key] for key in ("test", "alpha", "rejection_rate", "mc_se", "n_effective")}
            for row in self.aggregates["arms"][arm]["size_power"]
        ]

    def estimate_rows(self) -> list[dict[str, Any]]:
        """Return one row per successful replication and estimator arm."""
        rows = []
        for record in self.records:
            if not record.ok:
                continue
            for arm in ARMS:
                estimate, sigma2 = record.arm(arm)
                rows.append(
                    {
                        "rep": record.rep,
                        "estimator_arm": arm,
                        "beta4_hat": estimate,
                        "sigma_hat": math.sqrt(sigma2),
                        "submodel_size": record.submodel_size,
                        "screened": int(record.screened),
                    },
                )
        return rows

    def to_dict(self) -> dict[str, Any]:
        """Convert the report into a JSON-serializable dictionary; timings are left out."""
        return {
            "setting": self.setting.to_dict(),
            "method": self.method.to_dict(),
            "tests": [test.to_dict() for test in self.tests],
            "alpha_grid": list(self.alpha_grid),
            "run_key": self.run_key,
            "records": [record.to_dict() for record in self.records],
            "aggregates": self.aggregates,
        }


def _mean_and_se(values: NDArray[np.float64]) -> tuple[float | None, float | None]:
    if values.size == 0:
        return None, None
    spread = float(np.std(values, ddof=1)) / math.sqrt(values.size) if values.size > 1 else None
    return float(np.mean(values)), spread


def _arm_aggregates(
    ok: list[ReplicationRecord],
    arm: str,
    setting: SimSetting,
    tests: Sequence[TestSpec],
    alpha_grid: Sequence[float],
    total: int,
) -> dict[str, Any]:
    beta_true = gen_beta_star(setting.d, setting.d0)[J0_INDEX]
    estimates = np.array([record.arm(arm)[0] for record in ok])
    variances = np.array([record.arm(arm)[1] for record in ok])
    bias, bias_se = _mean_and_se(estimates - beta_true)
    with_exact = [(record.arm(arm)[1], record.exact_sigma2) for record in ok if record.exact_sigma2 is not None]
    variance_bias, variance_bias_se = _mean_and_se(np.array([hat - exact for hat, exact in with_exact]))

    studentized = math.sqrt(setting.n) * (estimates - beta_true) / np.sqrt(variances) if ok else np.zeros(0)
    ks_pvalue = float(stats.kstest(studentized, "norm").pvalue) if studentized.size > 1 else None

    rows = []
    for test in tests:
        decisions = [
            z_test(record.arm(arm)[0], record.arm(arm)[1], setting.n, test.null_value, test.alternative, alpha_grid)
            for record in ok
        ]
        for alpha in alpha_grid:
            rejections = sum(1 for decision in decisions if decision.reject_at[float(alpha)])
            m = len(decisions)
            rate = rejections / m if m else None
            rows.append(
                {
                    "test": test.name,
                    "alpha": float(alpha),
                    "rejection_rate": rate,
                    "mc_se": math.sqrt(rate * (1.0 - rate) / m) if m else None,
                    "n_effective": m,
                    "unconditional_rate": rejections / total if total else None,
                },
            )
    return {
        "mean_bias": bias,
        "bias_mc_se": bias_se,
        "estimate_variance": float(np.var(estimates, ddof=1)) if estimates.size > 1 else None,
        "mean_sigma2": float(np.mean(variances)) if variances.size else None,
        "sigma2_bias": variance_bias,
        "sigma2_bias_mc_se": variance_bias_se,
        "studentized_ks_pvalue": ks_pvalue,
        "size_power": rows,
    }


def _sign_test(records: list[ReplicationRecord]) -> dict[str, Any] | None:
    pairs = [
        (record.spurious, record.single_lasso_spurious)
        for record in records
        if record.ok and record.single_lasso_spurious is not None
    ]
    if not pairs:
        return None
    fewer = sum(1 for sila, single in pairs if sila < single)
    more = sum(1 for sila, single in pairs if sila > single)
    pvalue = float(stats.binomtest(fewer, fewer + more, 0.5, alternative="greater").pvalue) if fewer + more else 1.0
    return {
        "pairs": len(pairs),
        "mean_spurious_sila": float(np.mean([sila for sila, _ in pairs])),
        "mean_spurious_single_lasso": float(np.mean([single for _, single in pairs])),
        "sila_fewer": fewer,
        "sila_more": more,
        "sign_test_pvalue": pvalue,
    }


def aggregate(
    records: Sequence[ReplicationRecord],
    setting: SimSetting,
    tests: Sequence[TestSpec],
    alpha_grid: Sequence[float],
) -> dict[str, Any]:
    """Recompute every aggregate from per-replication records, in replication order."""
    ordered = sorted(records, key=lambda record: record.rep)
    ok = [record for record in ordered if record.ok]
    failed = [record for record in ordered if not record.ok]
    reasons: dict[str, int] = {}
    for record in failed:
        kind = (record.reason or "unknown").split(":", 1)[0]
        reasons[kind] = reasons.get(kind, 0) + 1
    total = len(ordered)
    return {
        "replications": total,
        "succeeded": len(ok),
        "failures": {
            "count": len(failed),
            "fraction": len(failed) / total if total else 0.0,
            "by_reason": reasons,
            "records": [{"rep": record.rep, "stage": record.stage, "reason": record.reason} for record in failed],
        },
        "screening_rate": float(np.mean([record.screened for record in ok])) if ok else None,
        "mean_submodel_size": float(np.mean([record.submodel_size for record in ok])) if ok else None,
        "mean_spurious": float(np.mean([record.spurious for record in ok])) if ok else None,
        "ib_nonconverged": sum(1 for record in ok if not record.ib_converged),
        "skipped_samples": sum(record.skipped_samples for record in ok),
        "arms": {arm: _arm_aggregates(ok, arm, setting, tests, alpha_grid, total) for arm in ARMS},
        "spurious_comparison": _sign_test(ok),
    }


def run_key(setting: SimSetting, method: MethodConfig) -> str:
    """Return the stable identity of a (setting, method) pair used to resume runs."""
    return stable_hash(json_dumps({"setting": setting.to_dict(), "method": method.to_dict(), "version": __version__}))


def run_monte_carlo(  # noqa: PLR0913
    setting: SimSetting,
    method: MethodConfig | None = None,
    tests: Sequence[TestSpec] = DEFAULT_TESTS,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    *,
    workers: int = 1,
    store: RunStore | None = None,
    resume: bool = True,
    batch_size: int = 10,
) -> McReport:
    """Run every replication of `setting`, in parallel when ``workers > 1``, and aggregate.

    Records are merged by replication index, so the worker count never changes the report.
    With a `store`, finished replications are persisted batch by batch and skipped on resume.
    """
    method = method or MethodConfig()
    for alpha in alpha_grid:
        if not 0.0 < alpha < 1.0:
            message = f"alpha grid values must lie strictly between 0 and 1, got {alpha}"
            raise InvalidAlpha(message)
    if method.selection == SelectionMode.FULL and setting.d >= setting.n:
        message = f"full-model estimation needs d < n, got d={setting.d}, n={setting.n}"
        raise ValidationError(message)

    key = run_key(setting, method)
    design = fixed_covariates(setting) if setting.fixed_design else None
    records: dict[int, ReplicationRecord] = {}
    run_id = None
    if store is not None:
        run_id = store.open_run(key, {"setting": setting.to_dict(), "method": method.to_dict()})
        if resume:
            stored = store.load_replications(run_id)
            records.update({rep: ReplicationRecord.from_dict(payload) for rep, payload in stored.items()})
            if records:
                logger.info("Resuming run {} with {} stored replications", key[:12], len(records))
        else:
            store.clear_run(run_id)

    pending = [rep for rep in range(setting.replications) if rep not in records]
    timings: dict[str, float] = {}
    started = time.perf_counter()
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 and len(pending) > 1 else None
    try:
        for batch in chunked(pending, batch_size):
            payloads = [(setting, method, rep, design) for rep in batch]
            if executor is not None:
                outcomes = list(executor.map(_replication_job, payloads))
            else:
                outcomes = [_replication_job(payload) for payload in payloads]
            for record, seconds in outcomes:
                records[record.rep] = record
                timings[f"rep_{record.rep}"] = seconds
            if store is not None and run_id is not None:
                store.save_replications(run_id, [record.to_dict() for record, _ in outcomes])
            logger.info("Completed {}/{} replications", len(records), setting.replications)
    except BaseException:
        if store is not None and run_id is not None:
            store.update_run(run_id, status=RunStatus.FAILED.value)
        raise
    finally:
        if executor is not None:
            executor.shutdown()
    timings["total"] = time.perf_counter() - started

    ordered = [records[rep] for rep in range(setting.replications)]
    if store is not None and run_id is not None:
        store.update_run(run_id, status=RunStatus.COMPLETED.value, finished_at=utcnow())
    return McReport(
        setting=setting,
        method=method,
        tests=tuple(tests),
        alpha_grid=tuple(float(alpha) for alpha in alpha_grid),
        records=ordered,
        aggregates=aggregate(ordered, setting, tests, alpha_grid),
        run_key=key,
        timings=timings,
    )
