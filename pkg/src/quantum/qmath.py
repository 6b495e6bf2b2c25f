"""Complex matrix kernel for time-bin qubits.

Pauli algebra, density and process matrices, process application, fidelities
and the binary entropy used by the key-rate model. Basis convention shared by
every module: |0> = early time bin, |1> = late time bin, Pauli order (I, X, Y, Z).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
TP_TOL = 1e-6

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_LABELS = ("I", "X", "Y", "Z")

_SQRT_HALF = 1.0 / np.sqrt(2.0)

# The six canonical time-bin states
STATE_VECTORS: Dict[str, np.ndarray] = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    "-": np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
    "+i": np.array([_SQRT_HALF, 1j * _SQRT_HALF], dtype=complex),
    "-i": np.array([_SQRT_HALF, -1j * _SQRT_HALF], dtype=complex),
}
STATE_LABELS = tuple(STATE_VECTORS)


class InvalidStateError(ValueError):
    """Raised when a state, vector or probability violates its invariants."""


def pure_state(label: str) -> np.ndarray:
    """Return the normalized ket for one of the six canonical labels."""
    try:
        return STATE_VECTORS[label].copy()
    except KeyError:
        raise InvalidStateError(
            f"Unknown state label '{label}', expected one of {list(STATE_LABELS)}"
        ) from None


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """2x2 Hermitian, unit-trace, positive semi-definite qubit state."""

    elements: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidStateError(f"Density matrix must be 2x2, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("Density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"Density matrix trace is {trace:.12f}, expected 1")
        if np.min(np.linalg.eigvalsh(rho)) < -PSD_TOL:
            raise InvalidStateError("Density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "elements", rho)

    @classmethod
    def from_vector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        """Projector onto the normalized state vector ``psi``."""
        psi = _normalized(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def from_label(cls, label: str) -> "DensityMatrix":
        return cls.from_vector(pure_state(label))

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(np.eye(2, dtype=complex) / 2)

    @classmethod
    def from_bloch(cls, r: Sequence[float]) -> "DensityMatrix":
        return cls(density_from_bloch(r))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.elements, dtype=dtype)


@dataclass(frozen=True, eq=False)
class ProcessMatrix:
    """4x4 chi matrix of a single-qubit channel in the (I, X, Y, Z) basis.

    Hermiticity and complete positivity are checked on construction; trace
    preservation is reported by ``trace_deviation`` since raw reconstructions
    are allowed to miss it before physical projection.
    """

    chi: np.ndarray

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        if chi.shape != (4, 4):
            raise InvalidStateError(f"Process matrix must be 4x4, got shape {chi.shape}")
        if np.max(np.abs(chi - chi.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("Process matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(chi)) < -PSD_TOL:
            raise InvalidStateError("Process matrix is not completely positive")
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)

    @property
    def basis(self) -> np.ndarray:
        return PAULI

    @classmethod
    def identity(cls) -> "ProcessMatrix":
        chi = np.zeros((4, 4), dtype=complex)
        chi[0, 0] = 1.0
        return cls(chi)

    @classmethod
    def pauli_channel(cls, probabilities: Sequence[float]) -> "ProcessMatrix":
        """Diagonal chi: apply sigma_k with probability p_k."""
        p = np.asarray(probabilities, dtype=float)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"Pauli channel needs 4 probabilities summing to 1, got {p}")
        return cls(np.diag(p).astype(complex))

    @classmethod
    def depolarizing(cls, shrink: float) -> "ProcessMatrix":
        """Channel r -> shrink * r."""
        p_error = (1.0 - shrink) / 4.0
        return cls.pauli_channel([1.0 - 3 * p_error, p_error, p_error, p_error])

    def trace_condition(self) -> np.ndarray:
        """sum_lk chi_lk sigma_k sigma_l, equal to I for a trace-preserving map."""
        return np.einsum("lk,kab,lbc->ac", self.chi, PAULI, PAULI)

    def trace_deviation(self) -> float:
        return float(np.max(np.abs(self.trace_condition() - np.eye(2))))


def _normalized(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (2,):
        raise InvalidStateError(f"State vector must have 2 components, got {psi.shape[0]}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"State vector is not normalized (norm^2 = {norm:.12f})")
    return psi


def density_from_bloch(r: Sequence[float]) -> np.ndarray:
    """(I + r . sigma) / 2 as a raw matrix; no physicality check."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (PAULI[0] + np.einsum("k,kab->ab", r, PAULI[1:]))


def state_fidelity(rho: DensityMatrix, ideal: Sequence[complex]) -> float:
    """Overlap <ideal|rho|ideal> with a pure reference state."""
    psi = _normalized(ideal)
    value = np.vdot(psi, np.asarray(rho) @ psi)
    return float(np.clip(value.real, 0.0, 1.0))


def apply_process(chi: ProcessMatrix, rho: DensityMatrix) -> DensityMatrix:
    """rho_out = sum_lk chi_lk sigma_l rho sigma_k."""
    deviation = chi.trace_deviation()
    if deviation > TP_TOL:
        logger.warning(f"Process is not trace preserving (deviation {deviation:.3e})")
    out = np.einsum("lk,lab,bc,kcd->ad", chi.chi, PAULI, np.asarray(rho), PAULI)
    out = 0.5 * (out + out.conj().T)
    if deviation > TP_TOL:
        # the flagged result is still returned, renormalized to a valid state
        out = out / np.trace(out).real
    return DensityMatrix(out)


def apply_process_raw(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Unchecked process application, used inside reconstructions."""
    return np.einsum("lk,lab,bc,kcd->ad", chi, PAULI, rho, PAULI)


def process_fidelity(chi: ProcessMatrix, chi_ideal: ProcessMatrix) -> float:
    """F_proc = Tr(chi_ideal chi)."""
    return process_overlap(chi_ideal, chi)


def process_overlap(chi_a: ProcessMatrix, chi_b: ProcessMatrix) -> float:
    """Tr(chi_a chi_b); the process fidelity when one of them is a unitary process."""
    return float(np.real(np.trace(chi_a.chi @ chi_b.chi)))


def bloch_vector(rho: DensityMatrix) -> Tuple[float, float, float]:
    """r_k = Tr(rho sigma_k) for k = X, Y, Z."""
    r = np.real(np.einsum("ab,kba->k", np.asarray(rho), PAULI[1:]))
    return float(r[0]), float(r[1]), float(r[2])


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2)."""
    m = np.asarray(rho)
    return float(np.real(np.trace(m @ m)))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of a - b."""
    diff = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def binary_entropy(x: float) -> float:
    """h2(x) in bits, with h2(0) = h2(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise InvalidStateError(f"binary_entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def affine_map(chi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bloch-vector action r -> M r + c of the channel with process matrix chi.

    M_jk = 1/2 Tr(sigma_j E(sigma_k)), c_j = 1/2 Tr(sigma_j E(I)).
    """
    chi = np.asarray(chi, dtype=complex)
    images = np.stack([apply_process_raw(chi, PAULI[k]) for k in range(4)])
    projections = 0.5 * np.real(np.einsum("jab,kba->jk", PAULI[1:], images))
    return projections[:, 1:], projections[:, 0]
