"""Plot-ready CSV extracts of a run report."""

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from src.utils.file_manager import RunFileManager

from .report import RunReport

logger = logging.getLogger(__name__)


class MissingTableError(ValueError):
    """Raised when a report lacks the table a plot target needs."""


# target -> (source table, source columns, output header)
PLOT_TARGETS: Dict[str, Tuple[str, List[str], List[str]]] = {
    "fig2b": ("state_fidelities", ["state", "fidelity", "std"], ["state", "fidelity", "std"]),
    "fig2e": ("bloch_mesh", ["theta", "phi", "x", "y", "z"], ["theta", "phi", "x", "y", "z"]),
    "fig3": ("sift_report", ["window_start_s", "qber", "visibility"], ["time", "qber", "visibility"]),
    "fig4": ("skr_curve", ["attenuation_db", "bits_per_pulse", "bits_per_s"],
             ["attenuation_db", "bits_per_pulse", "bits_per_s"]),
}


def available_targets(report: RunReport) -> List[str]:
    return [target for target, (table, _, _) in PLOT_TARGETS.items() if table in report.tables]


def plot_rows(report: RunReport, target: str):
    """Header and rows of ``target`` extracted from the report tables."""
    if target not in PLOT_TARGETS:
        raise ValueError(f"Unknown plot target '{target}', expected one of {sorted(PLOT_TARGETS)}")
    source, columns, header = PLOT_TARGETS[target]
    table = report.table(source)
    if table is None:
        raise MissingTableError(
            f"Plot target {target} needs the '{source}' table, which a {report.scenario} run does not produce"
        )
    indices = [table.columns.index(column) for column in columns]
    return header, [[row[i] for i in indices] for row in table.rows]


def emit_plot_data(report: RunReport, target: str, out: Union[str, Path, RunFileManager]) -> Path:
    """Write `<target>.csv` through a run's file manager, or into a plain directory."""
    header, rows = plot_rows(report, target)
    file_manager = out if isinstance(out, RunFileManager) else RunFileManager(str(out))
    path = file_manager.save_table(f"{target}.csv", header, rows)
    logger.info(f"Wrote {target} plot data: {len(rows)} rows")
    return path
