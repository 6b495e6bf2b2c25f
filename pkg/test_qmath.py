"""Tests for the qubit matrix kernel."""

import logging

import numpy as np
import pytest

from src.config import NetworkPresets
from src.quantum.qmath import (
    PAULI,
    DensityMatrix,
    InvalidStateError,
    ProcessMatrix,
    apply_process,
    binary_entropy,
    bloch_vector,
    process_fidelity,
    pure_state,
    purity,
    state_fidelity,
    trace_distance,
)
from src.quantum.tomography import calibrate_channel, ideal_fidelities


def random_bloch(rng, size=None):
    direction = rng.normal(size=(size or 1, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(size or 1) ** (1 / 3)
    points = direction * radius[:, None]
    return points if size else points[0]


def test_pauli_orthogonality_is_exact():
    for j in range(4):
        for k in range(4):
            assert np.trace(PAULI[j] @ PAULI[k]) == (2 if j == k else 0)
    for k in range(1, 4):
        assert np.array_equal(PAULI[k] @ PAULI[k], np.eye(2))


def test_density_matrix_rejects_invalid_elements():
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.array([[1, 0.1], [0, 0]], dtype=complex))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.eye(2, dtype=complex))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([1.2, -0.2]).astype(complex))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.eye(3, dtype=complex) / 3)


def test_density_matrix_is_read_only():
    rho = DensityMatrix.from_label("+")
    with pytest.raises(ValueError):
        rho.elements[0, 0] = 0


def test_state_fidelity_examples():
    assert state_fidelity(DensityMatrix.from_label("0"), pure_state("0")) == pytest.approx(1.0)
    assert state_fidelity(DensityMatrix.maximally_mixed(), pure_state("0")) == pytest.approx(0.5)


def test_state_fidelity_rejects_unnormalized_reference():
    with pytest.raises(InvalidStateError):
        state_fidelity(DensityMatrix.from_label("0"), np.array([1.0, 1.0]))


def test_state_fidelity_is_one_only_for_the_same_pure_state():
    for label in ("0", "1", "+", "-", "+i", "-i"):
        psi = pure_state(label)
        assert state_fidelity(DensityMatrix.from_label(label), psi) == pytest.approx(1.0, abs=1e-12)
        r = np.array(bloch_vector(DensityMatrix.from_label(label)))
        assert state_fidelity(DensityMatrix.from_bloch(0.999 * r), psi) < 1.0 - 1e-4


def test_calibrated_channel_output_fidelity_of_zero_state():
    channel = calibrate_channel(NetworkPresets.STATE_FIDELITIES)
    out = channel.apply(DensityMatrix.from_label("0"))
    assert state_fidelity(out, pure_state("0")) == pytest.approx(0.997429, abs=6e-6)


def test_calibrated_channel_reproduces_all_six_fidelities():
    channel = calibrate_channel(NetworkPresets.STATE_FIDELITIES)
    for label, fidelity in ideal_fidelities(channel).items():
        assert fidelity == pytest.approx(NetworkPresets.STATE_FIDELITIES[label], abs=1e-9)


def test_apply_identity_process_returns_input():
    rho = DensityMatrix.from_bloch([0.3, -0.2, 0.5])
    out = apply_process(ProcessMatrix.identity(), rho)
    assert np.allclose(np.asarray(out), np.asarray(rho), atol=1e-15)


def test_apply_bit_flip_maps_zero_to_one():
    chi = np.zeros((4, 4), dtype=complex)
    chi[1, 1] = 1.0
    out = apply_process(ProcessMatrix(chi), DensityMatrix.from_label("0"))
    assert np.allclose(np.asarray(out), np.asarray(DensityMatrix.from_label("1")))


def test_half_phase_flip_dephases_plus_state():
    chi = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    out = apply_process(ProcessMatrix(chi), DensityMatrix.from_label("+"))
    assert np.allclose(np.asarray(out), np.eye(2) / 2, atol=1e-15)


def test_apply_process_is_linear():
    rng = np.random.default_rng(7)
    chi = ProcessMatrix.pauli_channel([0.7, 0.1, 0.15, 0.05])
    for _ in range(20):
        r1, r2 = random_bloch(rng), random_bloch(rng)
        a = rng.random()
        rho1, rho2 = DensityMatrix.from_bloch(r1), DensityMatrix.from_bloch(r2)
        mixed = DensityMatrix(a * np.asarray(rho1) + (1 - a) * np.asarray(rho2))
        lhs = np.asarray(apply_process(chi, mixed))
        rhs = a * np.asarray(apply_process(chi, rho1)) + (1 - a) * np.asarray(apply_process(chi, rho2))
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_apply_process_flags_non_trace_preserving_chi(caplog):
    chi = ProcessMatrix(np.diag([0.5, 0, 0, 0]).astype(complex))
    with caplog.at_level(logging.WARNING):
        out = apply_process(chi, DensityMatrix.from_label("+"))
    assert "not trace preserving" in caplog.text
    assert np.trace(np.asarray(out)).real == pytest.approx(1.0)


def test_process_fidelity_examples():
    identity = ProcessMatrix.identity()
    assert process_fidelity(identity, identity) == pytest.approx(1.0)
    depolarized = ProcessMatrix(np.eye(4, dtype=complex) / 4)
    assert process_fidelity(depolarized, identity) == pytest.approx(0.25)


def test_depolarizing_process_shrinks_bloch_vector():
    out = apply_process(ProcessMatrix.depolarizing(0.9), DensityMatrix.from_label("+i"))
    assert bloch_vector(out) == pytest.approx((0.0, 0.9, 0.0), abs=1e-12)


def test_bloch_vector_examples():
    assert bloch_vector(DensityMatrix.from_label("0")) == pytest.approx((0.0, 0.0, 1.0))
    assert bloch_vector(DensityMatrix.from_label("+i")) == pytest.approx((0.0, 1.0, 0.0))
    assert bloch_vector(DensityMatrix.maximally_mixed()) == pytest.approx((0.0, 0.0, 0.0))


def test_purity_and_trace_distance():
    assert purity(DensityMatrix.from_label("-")) == pytest.approx(1.0)
    assert purity(DensityMatrix.maximally_mixed()) == pytest.approx(0.5)
    assert trace_distance(DensityMatrix.from_label("0"), DensityMatrix.from_label("1")) == pytest.approx(1.0)


def test_binary_entropy_examples():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0025) == pytest.approx(0.02521, abs=1e-5)


def test_binary_entropy_is_symmetric():
    for x in np.linspace(0.0, 1.0, 101):
        assert abs(binary_entropy(x) - binary_entropy(1.0 - x)) < 1e-12


@pytest.mark.parametrize("x", [-0.01, 1.01])
def test_binary_entropy_rejects_out_of_range(x):
    with pytest.raises(InvalidStateError):
        binary_entropy(x)


def test_pauli_channel_rejects_bad_probabilities():
    with pytest.raises(InvalidStateError):
        ProcessMatrix.pauli_channel([0.5, 0.5, 0.5, -0.5])
