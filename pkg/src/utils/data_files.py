"""CSV formats exchanged with the lab: measured counts, chi blocks, meshes, detections, sift and key-rate tables."""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from src.config import Config
from src.quantum.qmath import PAULI_LABELS, STATE_LABELS
from src.quantum.tomography import BASES, MeasurementRecord, TomographyError

logger = logging.getLogger(__name__)

COUNTS_HEADER = ["input_state", "basis", "outcome", "count"]
CHI_HEADER = ["part", "row"] + list(PAULI_LABELS)
MESH_HEADER = ["theta", "phi", "x", "y", "z"]
DETECTIONS_HEADER = ["slot", "detector", "bin"]
SIFT_HEADER = ["window_start_s", "qber", "visibility", "n_sifted"]
SKR_HEADER = ["attenuation_db", "bits_per_pulse", "bits_per_s"]


def format_value(value) -> str:
    """CSV cell text; floats use Config.FLOAT_FORMAT, None is an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), Config.FLOAT_FORMAT)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(value) for value in row])
    return buffer.getvalue()


def _read_rows(path: Union[str, Path], header: Sequence[str]) -> List[Dict[str, str]]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or [name.strip() for name in reader.fieldnames] != list(header):
                raise TomographyError(f"{path}: expected columns {','.join(header)}, got {reader.fieldnames}")
            return [{k.strip(): (v or "").strip() for k, v in row.items()} for row in reader]
    except OSError as e:
        raise TomographyError(f"Cannot read {path}: {e.strerror}") from e


# --------------------------------------------------------------------------
# Counts
# --------------------------------------------------------------------------

def read_counts_csv(path: Union[str, Path]) -> Dict[str, Dict[str, MeasurementRecord]]:
    """Counts table ``{input_state: {basis: MeasurementRecord}}`` from `input_state,basis,outcome,count`."""
    raw: Dict[str, Dict[str, Dict[str, int]]] = {}
    for line, row in enumerate(_read_rows(path, COUNTS_HEADER), start=2):
        state, basis, outcome = row["input_state"], row["basis"], row["outcome"]
        if state not in STATE_LABELS:
            raise TomographyError(f"{path}:{line}: unknown input_state '{state}'")
        if basis not in BASES:
            raise TomographyError(f"{path}:{line}: unknown basis '{basis}'")
        if outcome not in ("+", "-"):
            raise TomographyError(f"{path}:{line}: outcome must be + or -, got '{outcome}'")
        try:
            count = int(row["count"])
        except ValueError:
            raise TomographyError(f"{path}:{line}: count '{row['count']}' is not an integer") from None
        if count < 0:
            raise TomographyError(f"{path}:{line}: negative count {count}")
        cell = raw.setdefault(state, {}).setdefault(basis, {})
        if outcome in cell:
            raise TomographyError(f"{path}:{line}: duplicate row for ({state}, {basis}, {outcome})")
        cell[outcome] = count

    table = {}
    for state, bases in raw.items():
        table[state] = {
            basis: MeasurementRecord(basis=basis, n_plus=outcomes.get("+", 0), n_minus=outcomes.get("-", 0))
            for basis, outcomes in bases.items()
        }
    logger.info(f"Read counts for {len(table)} input states from {path}")
    return table


def counts_rows(table: Dict[str, Dict[str, MeasurementRecord]]):
    for state in STATE_LABELS:
        if state not in table:
            continue
        for basis in BASES:
            record = table[state].get(basis)
            if record is None:
                continue
            yield state, basis, "+", record.n_plus
            yield state, basis, "-", record.n_minus


# --------------------------------------------------------------------------
# Process matrix
# --------------------------------------------------------------------------

def chi_rows(chi: np.ndarray):
    """Real block then imaginary block, each row labelled by its Pauli index."""
    chi = np.asarray(chi, dtype=complex)
    for part, block in (("real", chi.real), ("imag", chi.imag)):
        for label, values in zip(PAULI_LABELS, block):
            # -0.0 would print as "-0"
            yield [part, label] + [float(v) + 0.0 for v in values]


# --------------------------------------------------------------------------
# Tables written by the protocol scenarios
# --------------------------------------------------------------------------

def sift_rows(windows) -> Iterable[List[Optional[float]]]:
    for window in windows:
        yield [window.start, window.qber, window.visibility, window.n_sifted]


def skr_rows(curve) -> Iterable[List[float]]:
    for point in curve:
        yield [point.attenuation_db, point.bits_per_pulse, point.bits_per_s]
