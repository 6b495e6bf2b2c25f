"""Run one experiment end to end: stage, report, tables, plot data and manifest."""

import logging
from pathlib import Path
from typing import Optional, Union

from src.config import ExperimentConfig
from src.utils.file_manager import RunFileManager
from src.utils.random_streams import RandomStreams

from .plot_data import available_targets, emit_plot_data
from .report import RunReport, library_versions
from .stages import get_stage

logger = logging.getLogger(__name__)


def run_experiment(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> RunReport:
    """Dispatch ``config`` to its stage and write every output file of the run."""
    stage = get_stage(config.scenario)
    config_hash = config.config_hash()
    run_id = RunFileManager.generate_run_id(config_hash, config.scenario)
    file_manager = RunFileManager(str(out_dir) if out_dir is not None else None)

    result = stage.run(config, RandomStreams(config.seed))
    report = RunReport(
        scenario=config.scenario,
        run_id=run_id,
        config_hash=config_hash,
        config=config.model_dump(mode="json"),
        versions=library_versions(),
        metrics={name: (None if value is None else float(value)) for name, value in result.metrics.items()},
        tables=result.tables,
    )

    file_manager.save_report(report.model_dump_json(indent=2))
    for name, table in report.tables.items():
        file_manager.save_table(f"{name}.csv", table.columns, table.rows)
    for filename, (header, rows) in result.files.items():
        file_manager.save_table(filename, header, rows)
    for target in available_targets(report):
        emit_plot_data(report, target, file_manager)
    file_manager.save_manifest(run_id, config.scenario, config_hash, stage="complete")

    logger.info(f"Run {run_id} complete")
    return report
