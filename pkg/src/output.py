"""CSV and summary writers for run directories."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from src.diagnostics.models import CheckResult, Formula
from src.galerkin.models import GalerkinTrajectory
from src.scenario import ScenarioConfig, render_config

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SUMMARY_FILE = "summary.txt"


def formula_of(frame: pd.DataFrame, formula: Formula | str | None = None) -> str:
    if formula is not None:
        return formula.value if isinstance(formula, Formula) else str(formula)
    return str(frame.attrs.get("formula", "none"))


def write_csv(directory: Path, name: str, frame: pd.DataFrame, formula: Formula | str | None = None) -> Path:
    """``# formula: <id>`` line, header row, rows with full float precision, LF endings."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# formula: {formula_of(frame, formula)}\n")
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path: str | Path) -> tuple[str, pd.DataFrame]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        first = fh.readline().strip()
        frame = pd.read_csv(fh)
    return first.removeprefix("# formula:").strip(), frame


def trajectory_frame(traj: GalerkinTrajectory) -> pd.DataFrame:
    columns = {"t": traj.times}
    for k in range(traj.states.shape[1]):
        columns[f"alpha_{k + 1}"] = traj.states[:, k]
    return pd.DataFrame(columns)


def checks_frame(checks: list[CheckResult]) -> pd.DataFrame:
    columns = ["name", "formula", "value", "tolerance", "passed", "informational", "note"]
    return pd.DataFrame([c.to_dict() for c in checks], columns=columns)


def summary_table(checks: list[CheckResult]) -> list[str]:
    lines = [f"# {'status':<6} {'formula':<12} {'check':<28} {'value':>14} {'tolerance':>14}  note"]
    for c in checks:
        lines.append(
            f"# {c.status:<6} {c.formula.value:<12} {c.name:<28} {c.value:>14.6g} {c.tolerance:>14.6g}  {c.note}"
        )
    failed = [c for c in checks if not c.passed and not c.informational]
    if failed:
        lines.append("# FAILED: " + ", ".join(f"{c.formula.value} ({c.name})" for c in failed))
    else:
        lines.append(f"# all {sum(not c.informational for c in checks)} checks passed")
    return lines


def write_summary(directory: Path, subcommand: str, config: ScenarioConfig, checks: list[CheckResult]) -> Path:
    """Pass/fail table as comments, then the complete scenario so the file re-parses as a config."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / SUMMARY_FILE
    header = [f"# mopla {subcommand}", f"# p = {config.p!r}, p' = {config.dual_exponent!r}"]
    body = "\n".join(header + summary_table(checks)) + "\n\n" + render_config(config)
    path.write_text(body, encoding="utf-8", newline="\n")
    logger.info("Wrote %s", path)
    return path


def frames_equal(a: pd.DataFrame, b: pd.DataFrame) -> bool:
    if list(a.columns) != list(b.columns) or a.shape != b.shape:
        return False
    numeric = a.select_dtypes(include=[np.number]).columns
    return bool(
        np.array_equal(a[numeric].to_numpy(), b[numeric].to_numpy(), equal_nan=True)
        and a.drop(columns=numeric).equals(b.drop(columns=numeric))
    )
