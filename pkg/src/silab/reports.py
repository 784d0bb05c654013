"""JSON and CSV artifacts written by the command-line tool."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import pandas as pd
from loguru import logger

from silab import __version__
from silab.utils import json_dumps, utcnow

if TYPE_CHECKING:
    from pathlib import Path

    from silab.simulator import McReport

SIZE_POWER_COLUMNS = ("test", "alpha", "rejection_rate", "mc_se", "n_effective")
ESTIMATE_COLUMNS = ("rep", "estimator_arm", "beta4_hat", "sigma_hat", "submodel_size", "screened")
TIMINGS_FILENAME = "timings.json"


def envelope(command: str, config: dict[str, Any], payload: dict[str, Any]) -> dict[str, Any]:
    """Wrap a payload with the tool version, the config echo, the master seed and the timings sidecar name."""
    return {
        "tool": "silab",
        "version": __version__,
        "command": command,
        "seed": config.get("seed"),
        "config": config,
        "result": payload,
        "timings": TIMINGS_FILENAME,
    }


def write_json(path: Path, document: dict[str, Any]) -> Path:
    """Write a JSON document with sorted keys and round-trip float formatting."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_dumps(document, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote {}", path)
    return path


def write_csv(path: Path, rows: list[dict[str, Any]], columns: tuple[str, ...]) -> Path:
    """Write rows as CSV with a fixed column order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Wrote {} rows to {}", len(frame), path)
    return path


def write_timings(out_dir: Path, command: str, stages: dict[str, float]) -> Path:
    """Write wall-clock and per-stage timings to the sidecar file."""
    document = {"command": command, "finished_at": utcnow(), "stages": stages}
    return write_json(out_dir / TIMINGS_FILENAME, document)


def write_mc_report(out_dir: Path, config: dict[str, Any], report: McReport) -> list[Path]:
    """Write the Monte-Carlo report JSON plus the size/power and estimate CSVs."""
    return [
        write_json(out_dir / "mc_report.json", envelope("simulate", config, report.to_dict())),
        write_csv(out_dir / "size_power.csv", report.size_power_rows(), SIZE_POWER_COLUMNS),
        write_csv(out_dir / "estimates.csv", report.estimate_rows(), ESTIMATE_COLUMNS),
    ]
