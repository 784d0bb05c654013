"""CLI entrypoints for selection, estimation, testing and simulation."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

from loguru import logger

from silab import __version__
from silab.bcmle import IbConfig
from silab.config import AUTO, DEFAULT_ALPHA_GRID, Settings, coerce_delta, load_settings
from silab.data import read_csv_dataset
from silab.exceptions import QualityGateError, SilabError, ValidationError
from silab.glm import ParameterBox, design_diagnostics
from silab.inference import (
    SilabResult,
    VarianceSource,
    confidence_interval,
    fit_full_model,
    hypothesis_test,
    matching_side,
    silab_fit,
)
from silab.models import Alternative, InclusionMode, RandomStream, Side, Submodel, restrict
from silab.persistence import RunStore
from silab.reports import envelope, write_json, write_mc_report, write_timings
from silab.sila import SilaConfig, sila_select
from silab.simulator import (
    DEFAULT_TESTS,
    MethodConfig,
    SelectionMode,
    SimSetting,
    run_monte_carlo,
    setting_a,
    setting_b,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from silab.models import Dataset

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} {level} [{name}] {message}"
SPLIT_STREAM = (2,)
BOOTSTRAP_STREAM = (3,)
EXIT_OK = 0
EXIT_INTERNAL = 5


@dataclass(frozen=True, slots=True)
class RunConfig:
    """The fully resolved echo of one command invocation."""

    command: str
    out: str
    seed: int
    threads: int
    input: str | None = None
    response: str | None = None
    j0: str | None = None
    exclude: tuple[str, ...] = ()
    interactions: int = 1
    keep_marginal: tuple[str, ...] = ()
    delta1: float | str = AUTO
    delta2: float | str = AUTO
    grid_size: int = 50
    inclusion_mode: str = InclusionMode.UNION_J0.value
    H: int = 200
    epsilon: float | None = None
    k_max: int = 50
    box_bound: float = 15.0
    crn: bool = False
    full_model: bool = False
    variance_at: str = VarianceSource.BCMLE.value
    alphas: tuple[float, ...] = (0.05,)
    nulls: tuple[float, ...] = (0.0,)
    alternatives: tuple[str, ...] = (Alternative.TWO_SIDED.value,)
    side: str = Side.TWO_SIDED.value
    columns: tuple[str, ...] = ()
    simulation: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Convert the run configuration into a JSON-serializable dictionary."""
        return asdict(self)


def configure_logging(settings: Settings) -> None:
    """Install the stderr and file sinks; calling it again replaces them."""
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level, format=LOG_FORMAT)
    settings.app_data_dir.mkdir(parents=True, exist_ok=True)
    logger.add(settings.log_path, level=settings.log_level, format=LOG_FORMAT, encoding="utf-8")


def _delta(value: str) -> float | str:
    try:
        return coerce_delta(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Alternate settings.toml path.")
    parser.add_argument("--log-level", default=None, help="Log level override.")
    parser.add_argument("--seed", type=int, default=0, help="Master seed.")
    parser.add_argument("--threads", type=int, default=None, help="Worker count (default: SILAB_THREADS or all cores).")
    parser.add_argument("--out", type=Path, default=Path("silab-out"), help="Output directory.")


def _add_data(parser: argparse.ArgumentParser, *, needs_j0: bool = True) -> None:
    parser.add_argument("--input", type=Path, required=True, help="Headed CSV file.")
    parser.add_argument("--response", required=True, help="Binary response column.")
    if needs_j0:
        parser.add_argument("--j0", required=True, help="Column whose coefficient is of interest.")
    parser.add_argument("--exclude", action="append", default=[], help="Column to ignore; repeatable.")
    parser.add_argument("--interactions", type=int, choices=(1, 2), default=1, help="Append pairwise products.")
    parser.add_argument(
        "--keep-marginal",
        action="append",
        default=[],
        help="Covariate kept out of interaction expansion; repeatable.",
    )


def _add_method(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--delta1", type=_delta, default=None, help="Lower support bracket or 'auto'.")
    parser.add_argument("--delta2", type=_delta, default=None, help="Upper support bracket or 'auto'.")
    parser.add_argument("--grid-size", type=int, default=None, help="Regularization grid size.")
    parser.add_argument(
        "--inclusion-mode",
        choices=[mode.value for mode in InclusionMode],
        default=InclusionMode.UNION_J0.value,
    )
    parser.add_argument("--H", dest="H", type=int, default=None, help="Simulated samples per bootstrap iteration.")
    parser.add_argument("--epsilon", type=float, default=None, help="Bootstrap convergence tolerance.")
    parser.add_argument("--k-max", type=int, default=None, help="Bootstrap iteration cap.")
    parser.add_argument("--box-bound", type=float, default=None, help="Parameter box half-width.")
    parser.add_argument("--crn", action="store_true", help="Reuse simulated-sample streams across iterations.")


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser."""
    parser = argparse.ArgumentParser(prog="silab", description="Selection and bias-corrected logistic inference.")
    parser.add_argument("--version", action="version", version=f"silab {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    select = commands.add_parser("select", help="Select a submodel containing the column of interest.")
    _add_common(select)
    _add_data(select)
    _add_method(select)

    summaries = {
        "fit": "Estimate the coefficient of interest.",
        "test": "Test and interval-estimate it; writes test.json plus one"
        " test_<alternative>_null<value>_alpha<level>.json per requested triple.",
    }
    for name, summary in summaries.items():
        sub = commands.add_parser(name, help=summary)
        _add_common(sub)
        _add_data(sub)
        _add_method(sub)
        sub.add_argument("--full-model", action="store_true", help="Skip selection (requires d < n).")
        sub.add_argument(
            "--variance-at",
            choices=[source.value for source in VarianceSource],
            default=VarianceSource.BCMLE.value,
        )
        if name == "test":
            sub.add_argument("--alpha", type=float, action="append", default=None, help="Level; repeatable.")
            sub.add_argument("--null", type=float, action="append", default=None, help="Null value; repeatable.")
            sub.add_argument(
                "--alternative",
                choices=[alternative.value for alternative in Alternative],
                action="append",
                default=None,
            )
            sub.add_argument("--side", choices=[side.value for side in Side], default=Side.TWO_SIDED.value)

    simulate = commands.add_parser("simulate", help="Run the Monte-Carlo harness.")
    _add_common(simulate)
    _add_method(simulate)
    simulate.add_argument("--setting", choices=("A", "B", "custom"), default="custom")
    simulate.add_argument("--n", type=int, default=400)
    simulate.add_argument("--d", type=int, default=400)
    simulate.add_argument("--d0", type=int, default=20)
    simulate.add_argument("--rho", type=float, default=0.0)
    simulate.add_argument("--replications", type=int, default=None)
    simulate.add_argument("--full-model", action="store_true", help="Estimate on the full model (d < n).")
    simulate.add_argument("--fixed-design", action="store_true", help="Draw the covariates once.")
    simulate.add_argument("--compare-single-lasso", action="store_true", help="Add the single-Lasso arm.")
    simulate.add_argument("--resume", action=argparse.BooleanOptionalAction, default=None)

    diagnose = commands.add_parser("diagnose", help="Report design regularity diagnostics.")
    _add_common(diagnose)
    _add_data(diagnose, needs_j0=False)
    diagnose.add_argument("--column", dest="columns", action="append", default=[], help="Submodel column; repeatable.")
    diagnose.add_argument("--box-bound", type=float, default=None, help="Parameter box half-width.")
    return parser


def _pick[T](value: T | None, default: T) -> T:
    return default if value is None else value


def resolve_run_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Merge CLI flags over settings; every omitted tunable takes its configured default."""
    values: dict[str, Any] = {
        "command": args.command,
        "out": str(args.out),
        "seed": args.seed,
        "threads": _pick(args.threads, settings.threads),
        "box_bound": _pick(getattr(args, "box_bound", None), settings.box_bound),
    }
    if hasattr(args, "input"):
        values.update(
            input=str(args.input),
            response=args.response,
            exclude=tuple(args.exclude),
            interactions=args.interactions,
            keep_marginal=tuple(args.keep_marginal),
        )
    if hasattr(args, "j0"):
        values["j0"] = args.j0
    if hasattr(args, "grid_size"):
        values.update(
            delta1=_pick(args.delta1, settings.delta1),
            delta2=_pick(args.delta2, settings.delta2),
            grid_size=_pick(args.grid_size, settings.grid_size),
            inclusion_mode=args.inclusion_mode,
            H=_pick(args.H, settings.h),
            epsilon=_pick(args.epsilon, settings.epsilon),
            k_max=_pick(args.k_max, settings.k_max),
            crn=args.crn,
        )
    if hasattr(args, "full_model"):
        values["full_model"] = args.full_model
    if hasattr(args, "variance_at"):
        values["variance_at"] = args.variance_at
    if args.command == "test":
        values.update(
            alphas=tuple(args.alpha or (settings.alpha,)),
            nulls=tuple(args.null or (0.0,)),
            alternatives=tuple(args.alternative or (Alternative.TWO_SIDED.value,)),
            side=args.side,
        )
    if args.command == "diagnose":
        values["columns"] = tuple(args.columns)
    if args.command == "simulate":
        values["simulation"] = {
            "setting": args.setting,
            "n": args.n,
            "d": args.d,
            "d0": args.d0,
            "rho": args.rho,
            "replications": _pick(args.replications, settings.replications),
            "fixed_design": args.fixed_design,
            "compare_single_lasso": args.compare_single_lasso,
            "resume": _pick(args.resume, settings.auto_resume),
            "failure_gate": settings.failure_gate,
        }
    return RunConfig(**values)


def _load(config: RunConfig) -> Dataset:
    return read_csv_dataset(
        Path(config.input or ""),
        config.response or "",
        exclude=config.exclude,
        interactions=config.interactions,
        keep_marginal=config.keep_marginal,
    )


def _sila_config(config: RunConfig) -> SilaConfig:
    return SilaConfig(
        delta1=config.delta1,
        delta2=config.delta2,
        K=config.grid_size,
        inclusion_mode=InclusionMode(config.inclusion_mode),
        split_seed=RandomStream(config.seed, SPLIT_STREAM),
    )


def _ib_config(config: RunConfig) -> IbConfig:
    return IbConfig(
        H=config.H,
        epsilon=config.epsilon,
        k_max=config.k_max,
        stream=RandomStream(config.seed, BOOTSTRAP_STREAM),
        crn=config.crn,
        threads=config.threads,
    )


def _estimate(config: RunConfig, dataset: Dataset) -> SilabResult:
    j0 = dataset.column(config.j0 or "")
    box = ParameterBox(config.box_bound)
    variance_at = VarianceSource(config.variance_at)
    if config.full_model:
        return fit_full_model(dataset, j0, _ib_config(config), box, variance_at)
    return silab_fit(dataset, j0, _sila_config(config), _ib_config(config), box, variance_at)


def cmd_select(config: RunConfig, timings: dict[str, float]) -> list[Path]:
    """Write the selected submodel and its selection trace."""
    dataset = _load(config)
    started = time.perf_counter()
    try:
        submodel, trace = sila_select(dataset, dataset.column(config.j0 or ""), _sila_config(config))
    except SilabError as exc:
        exc.with_stage("select")
        raise
    timings["select"] = time.perf_counter() - started
    payload = {
        "selected_indices": list(submodel.indices),
        "selected_labels": submodel.labels(dataset),
        "lambda_hats": list(trace.lambda_hats),
        "half_supports": [[dataset.labels[index] for index in support] for support in trace.half_supports],
        "trace": trace.to_dict(),
    }
    return [write_json(Path(config.out) / "selection.json", envelope("select", config.to_dict(), payload))]


def cmd_fit(config: RunConfig, timings: dict[str, float]) -> list[Path]:
    """Write the bias-corrected estimate of the coefficient of interest."""
    dataset = _load(config)
    started = time.perf_counter()
    result = _estimate(config, dataset)
    timings["fit"] = time.perf_counter() - started
    payload = {"labels": result.submodel.labels(dataset), **result.to_dict()}
    return [write_json(Path(config.out) / "fit.json", envelope("fit", config.to_dict(), payload))]


def _test_filename(null_value: float, alternative: Alternative, alpha: float) -> str:
    return f"test_{alternative.value}_null{null_value!r}_alpha{alpha!r}.json"


def cmd_test(config: RunConfig, timings: dict[str, float]) -> list[Path]:
    """Write one document per (null value, alternative, level) plus a ``test.json`` summary.

    Each per-triple document holds the fit, the test and its dual interval; the summary lists
    every decision, the requested intervals and the per-triple file names.
    """
    dataset = _load(config)
    started = time.perf_counter()
    result = _estimate(config, dataset)
    timings["fit"] = time.perf_counter() - started
    out = Path(config.out)
    fit = result.to_dict()
    entries = []
    paths = []
    for null_value in config.nulls:
        for name in config.alternatives:
            alternative = Alternative(name)
            test = hypothesis_test(result, dataset.n, null_value, alternative, config.alphas)
            for alpha in config.alphas:
                dual = confidence_interval(result, dataset.n, alpha, matching_side(alternative))
                filename = _test_filename(null_value, alternative, alpha)
                entry = {
                    "null_value": null_value,
                    "alternative": alternative.value,
                    "alpha": alpha,
                    "reject": test.reject_at[float(alpha)],
                    "test": test.to_dict(),
                    "interval": dual.to_dict(),
                    "file": filename,
                }
                entries.append(entry)
                document = envelope("test", config.to_dict(), {"fit": fit, **entry})
                paths.append(write_json(out / filename, document))
    intervals = [
        confidence_interval(result, dataset.n, alpha, side).to_dict()
        for alpha in config.alphas
        for side in (Side(config.side), Side.UPPER, Side.LOWER)
    ]
    payload = {"fit": fit, "tests": entries, "intervals": intervals}
    return [write_json(out / "test.json", envelope("test", config.to_dict(), payload)), *paths]


def _sim_setting(config: RunConfig) -> SimSetting:
    sim = config.simulation
    common = {"n": sim["n"], "d": sim["d"], "replications": sim["replications"], "master_seed": config.seed}
    if sim["setting"] == "A":
        return setting_a(rho=sim["rho"], fixed_design=sim["fixed_design"], **common)
    if sim["setting"] == "B":
        return setting_b(d0=sim["d0"], fixed_design=sim["fixed_design"], **common)
    return SimSetting(d0=sim["d0"], rho=sim["rho"], fixed_design=sim["fixed_design"], **common)


def cmd_simulate(config: RunConfig, timings: dict[str, float], settings: Settings) -> list[Path]:
    """Run the Monte-Carlo harness and write its report and CSVs."""
    setting = _sim_setting(config)
    method = MethodConfig(
        selection=SelectionMode.FULL if config.full_model else SelectionMode.SILA,
        delta1=config.delta1,
        delta2=config.delta2,
        K=config.grid_size,
        inclusion_mode=InclusionMode(config.inclusion_mode),
        H=config.H,
        epsilon=config.epsilon,
        k_max=config.k_max,
        box_bound=config.box_bound,
        crn=config.crn,
        compare_single_lasso=config.simulation["compare_single_lasso"],
    )
    store = RunStore(settings.db_path)
    store.initialize()
    report = run_monte_carlo(
        setting,
        method,
        DEFAULT_TESTS,
        DEFAULT_ALPHA_GRID,
        workers=config.threads,
        store=store,
        resume=config.simulation["resume"],
    )
    timings.update(report.timings)
    paths = write_mc_report(Path(config.out), config.to_dict(), report)
    gate = config.simulation["failure_gate"]
    if report.failure_fraction > gate:
        message = f"failure fraction {report.failure_fraction:.3f} exceeds the {gate:.3f} gate"
        raise QualityGateError(message, stage="simulate")
    return paths


def cmd_diagnose(config: RunConfig, timings: dict[str, float]) -> list[Path]:
    """Write design diagnostics for the full design or the named submodel."""
    dataset = _load(config)
    started = time.perf_counter()
    if config.columns:
        submodel = Submodel.of(dataset.column(label) for label in config.columns)
        dataset = restrict(dataset, submodel)
    report = design_diagnostics(dataset, ParameterBox(config.box_bound))
    timings["diagnose"] = time.perf_counter() - started
    payload = {"labels": list(dataset.labels), **report.to_dict()}
    return [write_json(Path(config.out) / "diagnostics.json", envelope("diagnose", config.to_dict(), payload))]


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
    except (OSError, ValueError) as exc:
        logger.error("Cannot load settings: {}", exc)
        return ValidationError.exit_code
    if args.log_level:
        settings.log_level = args.log_level.upper()
    configure_logging(settings)

    timings: dict[str, float] = {}
    started = time.perf_counter()
    handlers: dict[str, Callable[[RunConfig], list[Path]]] = {
        "select": lambda config: cmd_select(config, timings),
        "fit": lambda config: cmd_fit(config, timings),
        "test": lambda config: cmd_test(config, timings),
        "simulate": lambda config: cmd_simulate(config, timings, settings),
        "diagnose": lambda config: cmd_diagnose(config, timings),
    }
    try:
        config = resolve_run_config(args, settings)
        handlers[args.command](config)
    except SilabError as exc:
        logger.error("{} failed: {}", args.command, exc)
        return exc.exit_code
    except Exception:
        logger.exception("{} failed with an internal error", args.command)
        return EXIT_INTERNAL
    finally:
        timings["total"] = time.perf_counter() - started
        write_timings(args.out, args.command, timings)
    return EXIT_OK


def main() -> None:
    """Run the silab command-line tool."""
    sys.exit(run())


if __name__ == "__main__":
    main()
