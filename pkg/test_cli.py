"""Tests for the command line, run outputs and plot-data extraction."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from src.cli import EXIT_CONFIG_ERROR, EXIT_MODULE_ERROR, EXIT_OK, main
from src.config import Config, ExperimentConfig, load_experiment_config
from src.experiments import MissingTableError, emit_plot_data, run_experiment
from src.experiments.report import RunReport
from src.quantum.qmath import PAULI_LABELS
from src.utils.file_manager import RunFileManager

EXACT_QST = {
    "scenario": "qst",
    "seed": 1,
    "tomography": {"exact": True, "shots_per_basis": 10000, "mc_samples": 100, "channel": {"kind": "identity"}},
}

SAMPLED_QST = {
    "scenario": "qst",
    "seed": 2,
    "link": {"detector_efficiency": 1.0, "dark_count_rate": 0.0},
    "tomography": {"shots_per_basis": 20000, "mc_samples": 100, "channel": {"kind": "depolarizing", "strength": 0.95}},
}

SHORT_COW = {
    "scenario": "cow",
    "seed": 3,
    "link_preset": "loopback_61km",
    "link": {"dark_count_rate": 0.0, "optical_error": 0.0, "gate_window": 1.5},
    "field_trial": {"duration": 5.0, "record_slots": 1000},
}


def write_config(tmp_path: Path, data, name="config.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def load_report(out_dir: Path) -> RunReport:
    return RunReport.model_validate(json.loads((out_dir / "report.json").read_text(encoding="utf-8")))


def read_chi(path: Path) -> np.ndarray:
    chi = np.zeros((4, 4), dtype=complex)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 8
    for i, row in enumerate(rows):
        values = np.array([float(row[label]) for label in PAULI_LABELS])
        chi[i % 4] += values if row["part"] == "real" else 1j * values
    return chi


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------

def test_validate_prints_the_config_hash(tmp_path, capsys):
    path = write_config(tmp_path, EXACT_QST)
    assert main(["validate", "--config", str(path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == load_experiment_config(path).config_hash()


def test_shipped_configs_validate():
    for path in sorted(Path(__file__).parent.joinpath("configs").glob("*.json")):
        assert main(["validate", "--config", str(path)]) == EXIT_OK


def test_malformed_json_reports_line_and_column(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "scenario": "qst",\n  "seed": 1,\n}\n', encoding="utf-8")
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "line 4, column 1" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG_ERROR
    assert "Cannot read config file" in capsys.readouterr().err


def test_schema_errors_name_the_offending_field(tmp_path, capsys):
    data = dict(EXACT_QST, link={"bogus": 1}, protocol={"p_signal": 0.5})
    path = write_config(tmp_path, data)
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    err = capsys.readouterr().err
    assert "link.bogus: Extra inputs are not permitted" in err
    assert "protocol: Value error, p_signal + p_decoy + p_empty must be 1" in err


def test_missing_seed_is_a_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {"scenario": "qst"})
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "seed: Field required" in capsys.readouterr().err


def test_unknown_link_preset(tmp_path, capsys):
    path = write_config(tmp_path, dict(SHORT_COW, link_preset="moon_link"))
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "link_preset" in capsys.readouterr().err


def test_gate_shorter_than_the_pulse_is_rejected(tmp_path, capsys):
    data = json.loads(json.dumps(SHORT_COW))
    data["link"]["gate_window"] = 1.0
    path = write_config(tmp_path, data)
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "link.gate_window" in capsys.readouterr().err


def test_calibrated_channel_needs_all_six_fidelities(tmp_path, capsys):
    fidelities = {"0": 0.99, "1": 0.99, "+": 0.98, "-": 0.98, "+i": 0.97}
    data = json.loads(json.dumps(EXACT_QST))
    data["tomography"]["channel"] = {"kind": "calibrated", "target_fidelities": fidelities}
    path = write_config(tmp_path, data)
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    err = capsys.readouterr().err
    assert "tomography.channel.target_fidelities" in err
    assert "'-i'" in err


@pytest.mark.parametrize("setting, value", [("LOG_LEVEL", "LOUD"), ("MC_SAMPLES", 5)])
def test_bad_environment_settings_exit_before_running(tmp_path, monkeypatch, capsys, setting, value):
    monkeypatch.setattr(Config, setting, value)
    path = write_config(tmp_path, EXACT_QST)
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG_ERROR
    assert "LINKLAB_" in capsys.readouterr().err


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------

def test_run_writes_report_tables_and_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_config(tmp_path, EXACT_QST)), "--out-dir", str(out)]) == EXIT_OK

    manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["stage"] == "complete"
    assert manifest["run_id"].startswith("qst_")
    for name in ("report.json", "state_fidelities.csv", "density_matrices.csv", "counts.csv", "fig2b.csv"):
        assert name in manifest["files"]
        assert (out / name).exists()

    report = load_report(out)
    for label in ("0", "1", "+", "-", "+i", "-i"):
        assert report.metrics[f"fidelity[{label}]"] == pytest.approx(1.0, abs=1e-12)
    assert read_csv(out / "fig2b.csv")[0] == ["state", "fidelity", "std"]


def test_identical_configs_give_byte_identical_runs(tmp_path):
    path = write_config(tmp_path, SAMPLED_QST)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(path), "--out-dir", str(first)]) == EXIT_OK
    assert main(["run", "--config", str(path), "--out-dir", str(second)]) == EXIT_OK
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_seed_override_changes_the_run(tmp_path):
    path = write_config(tmp_path, SAMPLED_QST)
    assert main(["run", "--config", str(path), "--out-dir", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "--config", str(path), "--out-dir", str(tmp_path / "b"), "--seed", "7"]) == EXIT_OK
    base, override = load_report(tmp_path / "a"), load_report(tmp_path / "b")
    assert override.config["seed"] == 7
    assert override.run_id != base.run_id
    assert (tmp_path / "a" / "counts.csv").read_bytes() != (tmp_path / "b" / "counts.csv").read_bytes()


def test_report_config_revalidates_to_the_same_hash(tmp_path):
    report = run_experiment(ExperimentConfig.model_validate(EXACT_QST), tmp_path)
    assert ExperimentConfig.model_validate(report.config).config_hash() == report.config_hash


def test_counts_file_replaces_simulation(tmp_path):
    simulated = run_experiment(ExperimentConfig.model_validate(SAMPLED_QST), tmp_path / "sim")
    measured_config = json.loads(json.dumps(SAMPLED_QST))
    measured_config["tomography"]["counts_file"] = str(tmp_path / "sim" / "counts.csv")
    measured = run_experiment(ExperimentConfig.model_validate(measured_config), tmp_path / "measured")
    for label in ("0", "1", "+", "-", "+i", "-i"):
        assert measured.metrics[f"fidelity[{label}]"] == simulated.metrics[f"fidelity[{label}]"]


def test_incomplete_counts_file_is_a_module_error(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    counts.write_text("input_state,basis,outcome,count\n0,Z,+,100\n0,Z,-,0\n", encoding="utf-8")
    data = json.loads(json.dumps(EXACT_QST))
    data["tomography"]["counts_file"] = str(counts)
    path = write_config(tmp_path, data)
    assert main(["run", "--config", str(path), "--out-dir", str(tmp_path / "out")]) == EXIT_MODULE_ERROR
    assert "error:" in capsys.readouterr().err


def test_process_run_writes_chi_and_mesh(tmp_path):
    config = {
        "scenario": "qpt",
        "seed": 4,
        "tomography": {"exact": True, "shots_per_basis": 100000, "mc_samples": 100,
                       "channel": {"kind": "identity"}, "mesh": {"n_theta": 5, "n_phi": 9}},
    }
    report = run_experiment(ExperimentConfig.model_validate(config), tmp_path)
    chi = read_chi(tmp_path / "chi.csv")
    assert chi[0, 0].real == pytest.approx(1.0, abs=1e-9)
    assert report.metrics["f0"] == pytest.approx(1.0, abs=1e-9)
    mesh = read_csv(tmp_path / "fig2e.csv")
    assert len(mesh) == 1 + 5 * 9
    for row in mesh[1:]:
        x, y, z = (float(v) for v in row[2:])
        assert x * x + y * y + z * z == pytest.approx(1.0, abs=1e-9)


def test_noiseless_field_trial_plot_has_zero_qber(tmp_path):
    report = run_experiment(ExperimentConfig.model_validate(SHORT_COW), tmp_path)
    rows = read_csv(tmp_path / "fig3.csv")
    assert rows[0] == ["time", "qber", "visibility"]
    assert all(float(row[1]) == 0.0 for row in rows[1:])
    assert report.metrics["windows"] == len(rows) - 1
    assert read_csv(tmp_path / "detections.csv")[0] == ["slot", "detector", "bin"]


def test_sweep_plot_contains_the_calibration_points(tmp_path):
    config = ExperimentConfig.model_validate({"scenario": "skr_sweep", "seed": 0})
    report = run_experiment(config, tmp_path)
    attenuations = [float(row[0]) for row in read_csv(tmp_path / "fig4.csv")[1:]]
    assert 12.95 in attenuations
    assert 28.02 in attenuations
    assert report.metrics["relative_deviation[0]"] == pytest.approx(0.0, abs=1e-6)
    assert abs(report.metrics["relative_deviation[1]"]) <= 0.15


def test_plot_target_needs_its_table(tmp_path):
    report = run_experiment(ExperimentConfig.model_validate(EXACT_QST), tmp_path / "run")
    with pytest.raises(MissingTableError):
        emit_plot_data(report, "fig4", tmp_path)
    with pytest.raises(ValueError):
        emit_plot_data(report, "fig9", tmp_path)
    path = emit_plot_data(report, "fig2b", tmp_path)
    assert len(read_csv(path)) == 7


def test_plot_data_through_a_run_file_manager(tmp_path):
    report = run_experiment(ExperimentConfig.model_validate(EXACT_QST), tmp_path / "run")
    manager = RunFileManager(str(tmp_path / "plots"))
    path = emit_plot_data(report, "fig2b", manager)
    assert path == tmp_path / "plots" / "fig2b.csv"
    assert manager.files == ["fig2b.csv"]
