"""Run report model."""

import logging
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel, Field

import src

logger = logging.getLogger(__name__)

Cell = Union[str, int, float, None]


class ReportTable(BaseModel):
    """Column names and rows of one result table; written as `<name>.csv`."""

    columns: List[str]
    rows: List[List[Cell]] = Field(default_factory=list)


class RunReport(BaseModel):
    scenario: str = Field(description="Scenario that produced the report")
    run_id: str
    config_hash: str
    config: Dict[str, Any] = Field(description="Echo of the validated config; re-validates to the same run")
    versions: Dict[str, str]
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)
    tables: Dict[str, ReportTable] = Field(default_factory=dict)

    def table(self, name: str) -> Optional[ReportTable]:
        return self.tables.get(name)


def library_versions() -> Dict[str, str]:
    return {
        "linklab": src.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def to_cell(value) -> Cell:
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def make_table(columns: List[str], rows) -> ReportTable:
    return ReportTable(columns=list(columns), rows=[[to_cell(v) for v in row] for row in rows])
