"""Runtime configuration for the `silab` toolkit."""

from __future__ import annotations

import math
import os
import tomllib
from dataclasses import dataclass
from pathlib import Path

APP_DATA_DIRNAME = ".silab-data"
THREADS_ENV_VAR = "SILAB_THREADS"
AUTO = "auto"

DEFAULT_GRID_SIZE = 50
DEFAULT_H = 200
DEFAULT_K_MAX = 50
DEFAULT_BOX_BOUND = 15.0
DEFAULT_ALPHA = 0.05
DEFAULT_REPLICATIONS = 500
DEFAULT_FAILURE_GATE = 0.02
DEFAULT_ALPHA_GRID = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1)

type Delta = float | str


@dataclass(slots=True)
class Settings:
    """Resolved defaults for every tunable plus derived storage paths."""

    log_level: str
    app_data_dir: Path
    threads: int
    delta1: Delta = AUTO
    delta2: Delta = AUTO
    grid_size: int = DEFAULT_GRID_SIZE
    h: int = DEFAULT_H
    epsilon: float | None = None
    k_max: int = DEFAULT_K_MAX
    box_bound: float = DEFAULT_BOX_BOUND
    alpha: float = DEFAULT_ALPHA
    replications: int = DEFAULT_REPLICATIONS
    failure_gate: float = DEFAULT_FAILURE_GATE
    auto_resume: bool = True

    @property
    def db_path(self) -> Path:
        """Return the SQLite replication store path."""
        return self.app_data_dir / "runs.db"

    @property
    def log_path(self) -> Path:
        """Return the application log path."""
        return self.app_data_dir / "silab.log"

    @property
    def settings_path(self) -> Path:
        """Return the optional settings file path."""
        return self.app_data_dir / "settings.toml"


def _repo_root() -> Path:
    current = Path(__file__).resolve()
    for candidate in current.parents:
        if (candidate / "pyproject.toml").exists():
            return candidate
    return current.parents[2]


def _default_app_data_dir() -> Path:
    return _repo_root() / APP_DATA_DIRNAME


def _coerce_int(value: object, default: int) -> int:
    if isinstance(value, bool):
        return default
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return default
    return default


def _coerce_float(value: object, default: float) -> float:
    if isinstance(value, bool):
        return default
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return default
    return default


def coerce_delta(value: object) -> Delta:
    """Return `"auto"` or a non-negative float (``inf`` allowed) for a bracket value."""
    if isinstance(value, str) and value.strip().lower() == AUTO:
        return AUTO
    number = _coerce_float(value, math.nan)
    if math.isnan(number) or number < 0:
        message = f"Support-size bracket must be 'auto' or a non-negative number, got {value!r}."
        raise ValueError(message)
    return number


def default_threads() -> int:
    """Return the worker count from `SILAB_THREADS` or the machine's parallelism."""
    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        threads = _coerce_int(env_value, 0)
        if threads > 0:
            return threads
    return os.cpu_count() or 1


def load_settings(settings_path: Path | None = None) -> Settings:
    """Load settings from the repo-local app data directory or an explicit TOML file."""
    app_data_dir = _default_app_data_dir()
    config_data: dict[str, object] = {}
    path = settings_path or app_data_dir / "settings.toml"

    if path.exists():
        with path.open("rb") as handle:
            config_data = tomllib.load(handle)

    app_data_dir.mkdir(parents=True, exist_ok=True)

    epsilon = config_data.get("epsilon")
    threads = _coerce_int(config_data.get("threads", 0), 0)
    return Settings(
        log_level=str(config_data.get("log_level", "INFO")).upper(),
        app_data_dir=app_data_dir,
        threads=threads if threads > 0 and THREADS_ENV_VAR not in os.environ else default_threads(),
        delta1=coerce_delta(config_data.get("delta1", AUTO)),
        delta2=coerce_delta(config_data.get("delta2", AUTO)),
        grid_size=_coerce_int(config_data.get("grid_size", DEFAULT_GRID_SIZE), DEFAULT_GRID_SIZE),
        h=_coerce_int(config_data.get("H", DEFAULT_H), DEFAULT_H),
        epsilon=None if epsilon is None else _coerce_float(epsilon, 0.0) or None,
        k_max=_coerce_int(config_data.get("k_max", DEFAULT_K_MAX), DEFAULT_K_MAX),
        box_bound=_coerce_float(config_data.get("box_bound", DEFAULT_BOX_BOUND), DEFAULT_BOX_BOUND),
        alpha=_coerce_float(config_data.get("alpha", DEFAULT_ALPHA), DEFAULT_ALPHA),
        replications=_coerce_int(config_data.get("replications", DEFAULT_REPLICATIONS), DEFAULT_REPLICATIONS),
        failure_gate=_coerce_float(config_data.get("failure_gate", DEFAULT_FAILURE_GATE), DEFAULT_FAILURE_GATE),
        auto_resume=bool(config_data.get("auto_resume", True)),
    )
