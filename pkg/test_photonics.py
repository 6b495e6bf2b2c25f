"""Tests for the link budget, detectors, FMI readout, phase drift and the PID lock."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.photonics.feedback import FeedbackConfig, PhaseLock, PIDState, error_fraction, pid_step
from src.photonics.interferometer import PhaseDriftModel, evolve_phase, fmi_measure, measure_in_basis
from src.photonics.link import (
    DetectionRecord,
    LinkBudget,
    PulseTiming,
    channel_transmission,
    click_probability,
    detect,
    transmission_from_db,
)

LOSSLESS = LinkBudget(detector_efficiency=1.0, dark_count_rate=0.0)


# --------------------------------------------------------------------------
# Timing and link budget
# --------------------------------------------------------------------------

def test_default_pulse_timing_is_consistent():
    timing = PulseTiming()
    assert timing.pulse_rate == pytest.approx(1e9 / timing.pulse_separation)
    assert timing.slot_rate == pytest.approx(1e8)


def test_pulse_width_must_fit_the_separation():
    with pytest.raises(ValidationError, match="pulse_width"):
        PulseTiming(pulse_width=5.0, pulse_separation=5.0)


def test_pulse_rate_must_match_the_separation():
    with pytest.raises(ValidationError, match="pulse_rate"):
        PulseTiming(pulse_rate=1.0e9)


@pytest.mark.parametrize("field,value", [
    ("channel_loss", -1.0),
    ("detector_efficiency", 1.2),
    ("optical_error", 0.6),
    ("gate_window", 0.0),
])
def test_link_budget_rejects_out_of_range_fields(field, value):
    with pytest.raises(ValidationError):
        LinkBudget(**{field: value})


def test_channel_transmission_examples():
    assert channel_transmission(LinkBudget(channel_loss=0.0)) == 1.0
    assert channel_transmission(LinkBudget(channel_loss=10.0)) == pytest.approx(0.1)
    assert channel_transmission(LinkBudget(channel_loss=12.95)) == pytest.approx(0.0507, abs=1e-4)


def test_channel_losses_compose():
    for a, b in [(1.0, 2.0), (12.95, 15.07), (0.5, 30.0)]:
        split = channel_transmission(LinkBudget(channel_loss=a)) * channel_transmission(LinkBudget(channel_loss=b))
        assert split == pytest.approx(channel_transmission(LinkBudget(channel_loss=a + b)), rel=1e-12)
    link = LinkBudget(channel_loss=20.0, system_excess_loss=3.0)
    assert channel_transmission(link) == pytest.approx(transmission_from_db(23.0))


def test_click_probability_of_a_weak_coherent_pulse():
    link = LinkBudget(detector_efficiency=0.1, dark_count_rate=1e-7, gate_window=2.5)
    expected = 1.0 - np.exp(-0.1 * 0.29) * (1.0 - 2.5e-7)
    assert click_probability(0.29, link) == pytest.approx(expected)


# --------------------------------------------------------------------------
# Detection
# --------------------------------------------------------------------------

def test_detect_edge_cases():
    rng = np.random.default_rng(0)
    assert detect(1.0, LOSSLESS, rng, size=1000).all()
    assert not detect(0.0, LOSSLESS, rng, size=1000).any()


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_detect_rejects_non_probabilities(p):
    with pytest.raises(ValueError):
        detect(p, LOSSLESS, np.random.default_rng(0))


def test_dark_clicks_over_a_billion_gates():
    link = LinkBudget(dark_count_rate=1e-7, gate_window=2.5)
    rng = np.random.default_rng(1)
    # 50 blocks of 2e7 gates keep memory bounded
    clicks = sum(int(np.count_nonzero(detect(0.0, link, rng, size=20_000_000))) for _ in range(50))
    assert abs(clicks - 250) <= 3 * np.sqrt(250)


def test_detection_record_is_ordered_by_slot():
    record = DetectionRecord.from_events(10, [(7, "D1", "interference"), (2, "Ds", "early"), (5, "Ds", "late")])
    assert list(record.slots) == [2, 5, 7]
    assert [e.detector for e in record] == ["Ds", "Ds", "D1"]
    assert list(record.select("Ds")) == [2, 5]
    assert list(record.select("Ds", "late")) == [5]


def test_detection_record_rejects_slots_outside_the_run():
    with pytest.raises(ValueError):
        DetectionRecord.from_events(3, [(3, "Ds", "early")])


# --------------------------------------------------------------------------
# Phase drift
# --------------------------------------------------------------------------

def test_phase_drift_variance_grows_linearly():
    drift = PhaseDriftModel(sigma=0.1)
    rng = np.random.default_rng(3)
    phases = np.zeros(10_000)
    for _ in range(100):
        phases = evolve_phase(drift, 1.0, rng, phases)
    assert np.var(phases) == pytest.approx(1.0, rel=0.05)


def test_phase_is_constant_without_drift_or_time():
    rng = np.random.default_rng(3)
    assert evolve_phase(PhaseDriftModel(sigma=0.0), 10.0, rng, 0.4) == 0.4
    assert evolve_phase(PhaseDriftModel(sigma=0.1), 0.0, rng, 0.4) == 0.4
    assert evolve_phase(PhaseDriftModel(sigma=0.1, initial_phase=1.5), 0.0, rng) == 1.5


def test_phase_drift_rejects_negative_time():
    with pytest.raises(ValueError):
        evolve_phase(PhaseDriftModel(), -1.0, np.random.default_rng(0), 0.0)


# --------------------------------------------------------------------------
# FMI readout
# --------------------------------------------------------------------------

def test_fmi_phase_matched_pulses_go_to_d1():
    out = fmi_measure((0.2, 0.2, 0.3), 0.3, "X")
    assert out.p_d2 == pytest.approx(0.0, abs=1e-15)
    assert out.p_d1 == pytest.approx(0.5)


def test_fmi_phase_opposed_pulses_go_to_d2():
    out = fmi_measure((0.2, 0.2, np.pi), 0.0, "X")
    assert out.p_d1 == pytest.approx(0.0, abs=1e-15)


def test_fmi_quarter_phase_splits_evenly():
    out = fmi_measure((0.2, 0.2, np.pi / 2), 0.0, "X")
    assert out.p_d1 == pytest.approx(out.p_d2)


def test_fmi_y_basis_adds_a_quarter_phase():
    out = fmi_measure((0.2, 0.2, np.pi / 2), 0.0, "Y")
    assert out.p_d2 == pytest.approx(0.0, abs=1e-15)


def test_fmi_d1_fraction_follows_cosine():
    for delta in np.linspace(0.0, 2 * np.pi, 13):
        out = fmi_measure((1.0, 1.0, delta), 0.0, "X")
        assert out.p_d1 == pytest.approx(0.5 * (1.0 + np.cos(delta)) / 2.0, abs=1e-12)


def test_fmi_conserves_photon_number():
    rng = np.random.default_rng(9)
    for _ in range(100):
        mu_early, mu_late = rng.random(2)
        out = fmi_measure((mu_early, mu_late, rng.uniform(0, 2 * np.pi)), rng.uniform(0, 2 * np.pi), "X")
        assert out.total == pytest.approx(mu_early + mu_late, abs=1e-12)
        assert sum(out.timing_bins.values()) == pytest.approx(1.0)


def test_fmi_rejects_bad_input():
    with pytest.raises(ValueError):
        fmi_measure((-0.1, 0.2, 0.0), 0.0, "X")
    with pytest.raises(ValueError):
        fmi_measure((0.1, 0.2, 0.0), 0.0, "Z")


# --------------------------------------------------------------------------
# Basis measurements
# --------------------------------------------------------------------------

def test_zero_state_in_z_basis_is_deterministic():
    record = measure_in_basis("0", "Z", 1000, LOSSLESS, np.random.default_rng(0))
    assert (record.n_plus, record.n_minus) == (1000, 0)


def test_plus_state_in_x_basis_never_reads_minus():
    record = measure_in_basis("+", "X", 1000, LOSSLESS, np.random.default_rng(0))
    assert record.n_minus == 0
    assert record.n_plus > 0


def test_dark_counts_limit_x_visibility_on_a_lossy_link():
    clean = measure_in_basis("+", "X", 1_000_000, LinkBudget(channel_loss=30.0, dark_count_rate=0.0),
                             np.random.default_rng(3))
    assert clean.n_minus == 0
    assert clean.n_plus > 0

    noisy = measure_in_basis("+", "X", 1_000_000, LinkBudget(channel_loss=30.0, dark_count_rate=1e-4),
                             np.random.default_rng(3))
    assert noisy.n_minus > 0
    assert (noisy.n_plus - noisy.n_minus) / noisy.total < 0.9


def test_plus_state_in_z_basis_is_balanced():
    record = measure_in_basis("+", "Z", 1000, LOSSLESS, np.random.default_rng(5))
    assert record.total == 1000
    assert abs(record.n_plus - 500) <= 3 * np.sqrt(250)


def test_fully_lost_link_is_flagged(caplog):
    link = LinkBudget(channel_loss=400.0, dark_count_rate=0.0)
    record = measure_in_basis("0", "Z", 1000, link, np.random.default_rng(0))
    assert record.flagged
    assert "No counts" in caplog.text


def test_measurement_is_reproducible_for_a_seed():
    link = LinkBudget(channel_loss=5.0)
    a = measure_in_basis("+i", "Y", 10_000, link, np.random.default_rng(77))
    b = measure_in_basis("+i", "Y", 10_000, link, np.random.default_rng(77))
    assert (a.n_plus, a.n_minus) == (b.n_plus, b.n_minus)


def test_measure_rejects_unknown_state():
    with pytest.raises(ValueError):
        measure_in_basis("2", "Z", 10, LOSSLESS, np.random.default_rng(0))


# --------------------------------------------------------------------------
# PID and phase lock
# --------------------------------------------------------------------------

def test_pid_zero_error_gives_zero_actuation():
    state, actuation = pid_step(PIDState(FeedbackConfig()), 0.0, 0.47)
    assert actuation == 0.0


def test_pid_proportional_only():
    gains = FeedbackConfig(kp=1.0, ki=0.0, kd=0.0)
    _, actuation = pid_step(PIDState(gains), 0.3, 0.47)
    assert actuation == pytest.approx(0.3)


def test_pid_integral_and_derivative_terms():
    gains = FeedbackConfig(kp=0.0, ki=2.0, kd=0.5)
    state, first = pid_step(PIDState(gains), 0.1, 0.5)
    assert first == pytest.approx(2.0 * 0.05)
    state, second = pid_step(state, 0.3, 0.5)
    assert second == pytest.approx(2.0 * (0.05 + 0.15) + 0.5 * (0.3 - 0.1) / 0.5)


def test_pid_integral_is_clamped():
    gains = FeedbackConfig(kp=0.0, ki=1.0, integral_limit=1.0)
    state = PIDState(gains)
    for _ in range(10):
        state, actuation = pid_step(state, 1.0, 1.0)
    assert state.integral == 1.0
    assert actuation == 1.0


def test_pid_rejects_non_positive_step():
    with pytest.raises(ValueError):
        pid_step(PIDState(FeedbackConfig()), 0.1, 0.0)


def test_error_fraction():
    assert error_fraction(90, 10) == pytest.approx(0.1)
    assert error_fraction(0, 0) is None


def _ideal_monitor(rate=1e6):
    def measure(phase, duration):
        n = rate * duration
        return round(n * (1 + np.cos(phase)) / 2), round(n * (1 - np.cos(phase)) / 2)
    return measure


def test_phase_lock_holds_residual_phase():
    lock = PhaseLock(FeedbackConfig(), PhaseDriftModel(sigma=0.05))
    windows = lock.run(600.0, _ideal_monitor(), np.random.default_rng(12))
    residuals = np.array([w.residual_phase for w in windows])
    assert len(windows) == int(600.0 / 0.47)
    assert np.std(residuals) < 0.1


def test_phase_lock_pulls_in_a_static_offset():
    lock = PhaseLock(FeedbackConfig(), PhaseDriftModel(sigma=0.0, initial_phase=0.5))
    windows = lock.run(60.0, _ideal_monitor(), np.random.default_rng(0))
    assert abs(windows[-1].residual_phase) < 0.01


def test_open_loop_never_actuates():
    lock = PhaseLock(FeedbackConfig(enabled=False), PhaseDriftModel(sigma=0.05))
    windows = lock.run(30.0, _ideal_monitor(), np.random.default_rng(1))
    assert all(w.actuation == 0.0 for w in windows)


def test_phase_lock_needs_one_full_window():
    lock = PhaseLock(FeedbackConfig(), PhaseDriftModel())
    with pytest.raises(ValueError):
        lock.run(0.1, _ideal_monitor(), np.random.default_rng(0))
