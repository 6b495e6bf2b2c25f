"""
File Manager for experiment runs

Handles the run directory, the report and CSV tables of each run, and the
run manifest that lists them. Run ids come from the config hash so a rerun of
the same config writes to the same place with the same bytes.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from src.config import Config
from src.utils.data_files import render_csv

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
REPORT_NAME = "report.json"


class RunFileManager:
    """Manages file output for one experiment run."""

    def __init__(self, out_dir: Optional[str] = None):
        self.run_dir = Path(out_dir or Config.OUTPUT_DIR)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._files: List[str] = []
        logger.info(f"RunFileManager initialized with run_dir: {self.run_dir}")

    @staticmethod
    def generate_run_id(config_hash: str, scenario: str) -> str:
        """Deterministic run id: scenario plus the first 12 hex digits of the config hash."""
        return f"{scenario}_{config_hash[:12]}"

    def path(self, filename: str) -> Path:
        return self.run_dir / filename

    def _write_text(self, filename: str, text: str) -> Path:
        target = self.path(filename)
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        if filename not in self._files:
            self._files.append(filename)
        logger.debug(f"Wrote {target}")
        return target

    def save_table(self, filename: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """Write a CSV table with numbers in Config.FLOAT_FORMAT."""
        return self._write_text(filename, render_csv(header, rows))

    def save_json(self, filename: str, data: Dict[str, Any]) -> Path:
        return self._write_text(filename, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def save_report(self, report_json: str) -> Path:
        """Write the already serialized run report."""
        return self._write_text(REPORT_NAME, report_json + "\n")

    @property
    def files(self) -> List[str]:
        return list(self._files)

    def save_manifest(self, run_id: str, scenario: str, config_hash: str, stage: str) -> Path:
        """Write run_manifest.json listing every file of the run (itself excluded)."""
        manifest = {
            "run_id": run_id,
            "scenario": scenario,
            "config_hash": config_hash,
            "stage": stage,
            "files": sorted(f for f in self._files if f != MANIFEST_NAME),
        }
        target = self.save_json(MANIFEST_NAME, manifest)
        logger.info(f"Run {run_id} saved to {self.run_dir}: {len(manifest['files'])} files")
        return target
