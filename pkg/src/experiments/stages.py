"""Experiment stages, one per scenario.

Each stage takes a validated ExperimentConfig and the run's random streams and
returns headline metrics, report tables and any extra files.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import ChannelSettings, ExperimentConfig
from src.photonics.interferometer import expected_record, measure_in_basis
from src.protocol.cow import (
    ProtocolError,
    decode_and_sift,
    phase_error_rate,
    random_slots,
    run_field_trial,
    transmit,
)
from src.protocol.key_rate import (
    SKRParams,
    calibrate_excess_loss,
    get_key_rate_model,
    key_rate_cutoff,
    secret_key_rate,
    skr_sweep,
)
from src.quantum.qmath import STATE_LABELS, DensityMatrix, pure_state
from src.quantum.tomography import (
    BASES,
    PROCESS_INPUT_LABELS,
    ChannelModel,
    CountTable,
    TomographyError,
    bloch_ellipsoid,
    calibrate_channel,
    ellipsoid_axes,
    fidelity_report,
    process_from_counts,
    reconstruct_state,
)
from src.utils.data_files import (
    CHI_HEADER,
    COUNTS_HEADER,
    DETECTIONS_HEADER,
    MESH_HEADER,
    SIFT_HEADER,
    SKR_HEADER,
    chi_rows,
    counts_rows,
    read_counts_csv,
    sift_rows,
    skr_rows,
)
from src.utils.random_streams import RandomStreams

from .report import ReportTable, make_table

logger = logging.getLogger(__name__)


@dataclass
class StageResult:
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    tables: Dict[str, ReportTable] = field(default_factory=dict)
    # extra CSV files kept out of the report: filename -> (header, rows)
    files: Dict[str, Tuple[Sequence[str], List[Sequence]]] = field(default_factory=dict)


class ExperimentStage:
    """Base class: ``run`` wraps the scenario's ``_run`` with logging."""

    name: str = ""
    description: str = ""

    def run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        logger.info(f"Starting {self.name} stage (seed {config.seed})")
        result = self._run(config, streams)
        logger.info(f"Finished {self.name} stage: {len(result.metrics)} metrics, {len(result.tables)} tables")
        return result

    def _run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        raise NotImplementedError


def build_channel(settings: ChannelSettings) -> ChannelModel:
    if settings.kind == "identity":
        return ChannelModel.identity()
    if settings.kind == "depolarizing":
        return ChannelModel.depolarizing(settings.strength)
    if settings.kind == "pauli":
        return ChannelModel.pauli(settings.shrink, settings.offset)
    return calibrate_channel(settings.target_fidelities)


def simulate_counts(config: ExperimentConfig, channel: ChannelModel, labels: Sequence[str],
                    rng: np.random.Generator) -> CountTable:
    """Send each prepared state through ``channel`` and measure it in the three bases."""
    settings = config.tomography
    link = config.effective_link
    table = {}
    for label in labels:
        output = channel.apply(DensityMatrix.from_label(label))
        records = {}
        for basis in BASES:
            if settings.exact:
                records[basis] = expected_record(output, basis, settings.shots_per_basis,
                                                 settings.interferometer_phase_offset)
            else:
                records[basis] = measure_in_basis(output, basis, settings.shots_per_basis, link, rng,
                                                  settings.interferometer_phase_offset)
        table[label] = records
    return table


def _load_counts(path: str, labels: Sequence[str]) -> CountTable:
    table = read_counts_csv(Path(path))
    missing = [label for label in labels if label not in table]
    if missing:
        raise TomographyError(f"Counts file {path} has no rows for input states {missing}")
    return {label: table[label] for label in labels}


class StateTomographyStage(ExperimentStage):
    name: str = "qst"
    description: str = "Six-state tomography of the link output with Monte-Carlo fidelity uncertainties"

    def _run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        settings = config.tomography
        if settings.counts_file:
            table = _load_counts(settings.counts_file, STATE_LABELS)
        else:
            channel = build_channel(settings.channel)
            table = simulate_counts(config, channel, STATE_LABELS, streams["measurement"])

        fidelity_rows, density_rows = [], []
        result = StageResult()
        for label in STATE_LABELS:
            estimate = reconstruct_state(table[label], pure_state(label), settings.mc_samples,
                                         streams.sub_seed(f"mc/{label}"))
            result.metrics[f"fidelity[{label}]"] = estimate.fidelity_to_ideal
            result.metrics[f"fidelity_std[{label}]"] = estimate.fidelity_std
            fidelity_rows.append([label, estimate.fidelity_to_ideal, estimate.fidelity_std])
            rho = np.asarray(estimate.rho)
            for (i, j) in ((0, 0), (0, 1), (1, 0), (1, 1)):
                density_rows.append([label, f"{i}{j}", float(rho[i, j].real) + 0.0, float(rho[i, j].imag) + 0.0])
            logger.info(f"State {label}: fidelity {estimate.fidelity_to_ideal:.6f} +- {estimate.fidelity_std:.6f}")

        fidelities = [row[1] for row in fidelity_rows]
        result.metrics["mean_fidelity"] = float(np.mean(fidelities))
        result.tables["state_fidelities"] = make_table(["state", "fidelity", "std"], fidelity_rows)
        result.tables["density_matrices"] = make_table(["state", "element", "real", "imag"], density_rows)
        result.tables["counts"] = make_table(COUNTS_HEADER, counts_rows(table))
        return result


class ProcessTomographyStage(ExperimentStage):
    name: str = "qpt"
    description: str = "Process tomography of the link with F0/F1/F2 and the Bloch-ellipsoid image"

    def _run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        settings = config.tomography
        if settings.counts_file:
            channel_counts = _load_counts(settings.counts_file, PROCESS_INPUT_LABELS)
        else:
            channel_counts = simulate_counts(config, build_channel(settings.channel), PROCESS_INPUT_LABELS,
                                             streams["measurement"])
        if settings.back_to_back_counts_file:
            b2b_counts = _load_counts(settings.back_to_back_counts_file, PROCESS_INPUT_LABELS)
        else:
            reference = ChannelModel.depolarizing(settings.back_to_back_shrink)
            b2b_counts = simulate_counts(config, reference, PROCESS_INPUT_LABELS, streams["back_to_back"])

        estimate = process_from_counts(channel_counts)
        fidelities = fidelity_report(channel_counts, b2b_counts, settings.mc_samples, streams.sub_seed("mc/process"))
        mesh = bloch_ellipsoid(estimate.chi, settings.mesh.n_theta, settings.mesh.n_phi)
        axes = ellipsoid_axes(estimate.affine_map[0])

        result = StageResult()
        result.metrics.update({
            "f_proc": estimate.f_proc,
            "f0": fidelities.f0,
            "f1": fidelities.f1,
            "f2": fidelities.f2,
            "f0_std": fidelities.uncertainties[0],
            "f1_std": fidelities.uncertainties[1],
            "f2_std": fidelities.uncertainties[2],
            "trace_deviation": estimate.chi.trace_deviation(),
        })
        for index, axis in enumerate(axes):
            result.metrics[f"ellipsoid_axis[{index}]"] = float(axis)
        logger.info(
            f"F0 {fidelities.f0:.4f} +- {fidelities.uncertainties[0]:.4f}, "
            f"F1 {fidelities.f1:.4f}, F2 {fidelities.f2:.4f}"
        )
        result.tables["chi"] = make_table(CHI_HEADER, chi_rows(estimate.chi.chi))
        result.tables["bloch_mesh"] = make_table(MESH_HEADER, mesh.rows())
        result.tables["counts"] = make_table(COUNTS_HEADER, counts_rows(channel_counts))
        return result


class FieldTrialStage(ExperimentStage):
    name: str = "cow"
    description: str = "COW key distribution over the drifting link with PID phase stabilization"

    def _run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        link = config.effective_link
        trial = run_field_trial(link, config.protocol, config.drift, config.feedback,
                                config.field_trial.duration, streams)
        result = StageResult()
        result.metrics.update({
            "mean_qber": trial.mean_qber,
            "mean_visibility": trial.mean_visibility,
            "min_visibility": trial.min_visibility,
            "residual_phase_std": trial.residual_phase_std,
            "total_sifted": float(trial.total_sifted),
            "windows": float(len(trial.windows)),
        })
        if trial.mean_visibility is not None:
            result.metrics["phase_error_rate"] = phase_error_rate(trial.mean_visibility)
        result.tables["sift_report"] = make_table(SIFT_HEADER, sift_rows(trial.windows))

        n_slots = config.field_trial.record_slots
        if n_slots:
            sequence = random_slots(n_slots, config.protocol, streams["encoding"])
            detections = transmit(sequence, link, config.protocol, streams["transmission"],
                                  phase_error=trial.windows[0].residual_phase)
            sample = decode_and_sift(sequence, detections)
            result.metrics.update({
                "sample_n_sifted": float(sample.n_sifted),
                "sample_qber": sample.qber,
                "sample_visibility": sample.visibility,
            })
            result.files["detections.csv"] = (DETECTIONS_HEADER, list(detections.rows()))
        return result


class KeyRateSweepStage(ExperimentStage):
    name: str = "skr_sweep"
    description: str = "Secret key rate versus channel attenuation with a calibrated excess loss"

    def _run(self, config: ExperimentConfig, streams: RandomStreams) -> StageResult:
        sweep = config.sweep
        params = SKRParams(config.protocol, config.effective_link, sweep.qber, sweep.visibility)
        result = StageResult()
        points = sweep.calibration_points
        if sweep.calibrate and points:
            excess = calibrate_excess_loss(params, points[0].attenuation_db, points[0].bits_per_pulse)
            params = params.with_excess_loss(excess)
            result.metrics["system_excess_loss"] = excess

        grid = np.round(np.arange(sweep.start_db, sweep.stop_db + sweep.step_db / 2, sweep.step_db), 9)
        attenuations = list(grid) + [p.attenuation_db for p in points]
        curve = skr_sweep(params, attenuations)

        for index, point in enumerate(points):
            bits_per_pulse, bits_per_s = secret_key_rate(params.at_channel_loss(point.attenuation_db))
            result.metrics[f"bits_per_pulse[{index}]"] = bits_per_pulse
            result.metrics[f"bits_per_s[{index}]"] = bits_per_s
            result.metrics[f"relative_deviation[{index}]"] = bits_per_pulse / point.bits_per_pulse - 1.0

        try:
            result.metrics["cutoff_db"] = key_rate_cutoff(params, sweep.start_db, sweep.stop_db)
        except ProtocolError as e:
            logger.warning(f"No key-rate cutoff inside the sweep: {e}")
            result.metrics["cutoff_db"] = None
        model = get_key_rate_model(config.protocol.key_rate_model)
        logger.info(f"Swept {len(curve)} attenuations with the '{model.name}' key-rate model")
        result.tables["skr_curve"] = make_table(SKR_HEADER, skr_rows(curve))
        return result


EXPERIMENT_STAGES: Dict[str, ExperimentStage] = {
    stage.name: stage
    for stage in (StateTomographyStage(), ProcessTomographyStage(), FieldTrialStage(), KeyRateSweepStage())
}


def get_stage(scenario: str) -> ExperimentStage:
    try:
        return EXPERIMENT_STAGES[scenario]
    except KeyError:
        raise ValueError(f"Unknown scenario '{scenario}', available: {sorted(EXPERIMENT_STAGES)}") from None
