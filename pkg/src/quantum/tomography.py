"""State and process tomography for time-bin qubits.

Linear inversion followed by projection onto physical states/processes,
Poissonian Monte-Carlo uncertainties, the Bloch-ellipsoid image of a channel
and the closed-form calibration of a channel model against target fidelities.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .qmath import (
    PAULI,
    STATE_LABELS,
    DensityMatrix,
    ProcessMatrix,
    affine_map,
    bloch_vector,
    density_from_bloch,
    process_overlap,
    pure_state,
)

logger = logging.getLogger(__name__)

BASES = ("Z", "X", "Y")
BASIS_AXIS = {"X": 0, "Y": 1, "Z": 2}
# |0>,|1>,|+>,|+i> span all 2x2 matrices
PROCESS_INPUT_LABELS = ("0", "1", "+", "+i")
# eigenstate pairs (+1, -1) of each Pauli axis
AXIS_STATES = {"X": ("+", "-"), "Y": ("+i", "-i"), "Z": ("0", "1")}
MIN_MC_SAMPLES = 100

CountTable = Dict[str, Dict[str, "MeasurementRecord"]]


class TomographyError(ValueError):
    """Raised for incomplete or unusable tomographic data."""


@dataclass(frozen=True)
class MeasurementRecord:
    """Counts for the two eigenstate outcomes of one Pauli basis."""

    basis: str
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.basis not in BASES:
            raise TomographyError(f"Unknown basis '{self.basis}', expected one of {BASES}")
        for name in ("n_plus", "n_minus"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise TomographyError(f"{name} must be a non-negative integer, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def flagged(self) -> bool:
        """True when no event survived; reconstruction rejects such records."""
        return self.total == 0


@dataclass(frozen=True, eq=False)
class StateEstimate:
    rho: DensityMatrix
    fidelity_to_ideal: float
    fidelity_std: float
    raw: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ProcessEstimate:
    chi: ProcessMatrix
    f_proc: float
    f_proc_std: float
    affine_map: Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class FidelityReport:
    """F0: output vs ideal, F1: input vs ideal, F2: output vs input."""

    f0: float
    f1: float
    f2: float
    uncertainties: Tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class BlochMesh:
    """Bloch-sphere mesh mapped through a channel, indexed [theta, phi]."""

    theta: np.ndarray
    phi: np.ndarray
    points: np.ndarray  # (n_theta, n_phi, 3)

    def rows(self) -> List[Tuple[float, float, float, float, float]]:
        rows = []
        for i, theta in enumerate(self.theta):
            for j, phi in enumerate(self.phi):
                x, y, z = self.points[i, j]
                rows.append((float(theta), float(phi), float(x), float(y), float(z)))
        return rows

    def radii(self) -> np.ndarray:
        """Distance of each mesh point from the origin."""
        return np.linalg.norm(self.points, axis=-1)


# --------------------------------------------------------------------------
# State tomography
# --------------------------------------------------------------------------

def _records_by_basis(records) -> Dict[str, MeasurementRecord]:
    if isinstance(records, Mapping):
        records = list(records.values())
    by_basis = {}
    for record in records:
        by_basis[record.basis] = record
    missing = [b for b in BASES if b not in by_basis]
    if missing:
        raise TomographyError(f"Missing measurement basis: {', '.join(missing)}")
    for basis, record in by_basis.items():
        if record.flagged:
            raise TomographyError(f"Zero total counts in basis {basis}")
    return by_basis


def _bloch_from_counts(counts: np.ndarray) -> np.ndarray:
    """Bloch vectors from counts shaped (..., 3, 2) in (X, Y, Z) order."""
    counts = np.asarray(counts, dtype=float)
    plus, minus = counts[..., 0], counts[..., 1]
    total = plus + minus
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(total > 0, (plus - minus) / np.where(total > 0, total, 1.0), 0.0)
    return r


def _counts_array(by_basis: Mapping[str, MeasurementRecord]) -> np.ndarray:
    return np.array(
        [[by_basis[b].n_plus, by_basis[b].n_minus] for b in ("X", "Y", "Z")], dtype=float
    )


def _project_bloch(r: np.ndarray) -> np.ndarray:
    """Closed-form 2x2 spectrum clipping: vectors outside the ball go to its surface."""
    r = np.asarray(r, dtype=float)
    norm = np.linalg.norm(r, axis=-1, keepdims=True)
    scale = np.where(norm > 1.0, 1.0 / np.where(norm > 0, norm, 1.0), 1.0)
    return r * scale


def qst_linear(records) -> np.ndarray:
    """Linear-inversion estimate (I + sum_k r_k sigma_k) / 2; may be non-PSD."""
    by_basis = _records_by_basis(records)
    r = _bloch_from_counts(_counts_array(by_basis))
    return density_from_bloch(r)


def project_physical_state(raw: np.ndarray) -> DensityMatrix:
    """Closest trace-1 PSD matrix, by clipping the 2x2 spectrum and renormalizing."""
    raw = np.asarray(raw, dtype=complex)
    raw = 0.5 * (raw + raw.conj().T)
    raw = raw / np.trace(raw).real
    r = np.real(np.einsum("ab,kba->k", raw, PAULI[1:]))
    projected = _project_bloch(r)
    if not np.allclose(projected, r, atol=0.0, rtol=0.0):
        logger.debug(f"Clipped state spectrum, Bloch radius {np.linalg.norm(r):.6f} -> 1")
    return DensityMatrix(density_from_bloch(projected))


def _fidelity_to_bloch(r: np.ndarray, ideal_r: np.ndarray) -> np.ndarray:
    # <psi|rho|psi> = (1 + n . r) / 2 for a pure state with Bloch vector n
    return np.clip(0.5 * (1.0 + r @ ideal_r), 0.0, 1.0)


def _resample_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _check_mc_samples(mc_samples: int):
    if mc_samples < MIN_MC_SAMPLES:
        raise TomographyError(f"mc_samples must be at least {MIN_MC_SAMPLES}, got {mc_samples}")


def reconstruct_state(records, ideal: Sequence[complex], mc_samples: int, seed: int) -> StateEstimate:
    """QST with a Poissonian parametric bootstrap on the fidelity to ``ideal``.

    Each resample redraws every count from Poisson(mean = observed count) with
    the generator of sub-seed (seed, index); its fidelity is taken on the
    linear estimate so the spread reflects count noise only.
    """
    _check_mc_samples(mc_samples)
    by_basis = _records_by_basis(records)
    counts = _counts_array(by_basis)
    raw = density_from_bloch(_bloch_from_counts(counts))
    rho = project_physical_state(raw)
    ideal_rho = DensityMatrix.from_vector(ideal)
    ideal_r = np.array(bloch_vector(ideal_rho))
    fidelity = float(_fidelity_to_bloch(np.array(bloch_vector(rho)), ideal_r))

    samples = np.empty(mc_samples)
    for index in range(mc_samples):
        resampled = _resample_generator(seed, index).poisson(counts)
        samples[index] = _fidelity_to_bloch(_bloch_from_counts(resampled), ideal_r)
    return StateEstimate(rho=rho, fidelity_to_ideal=fidelity, fidelity_std=float(samples.std()), raw=raw)


# --------------------------------------------------------------------------
# Process tomography
# --------------------------------------------------------------------------

def _process_design_matrix(inputs: Sequence[np.ndarray]) -> np.ndarray:
    # rows: (input j, a, b); columns: (l, k); entry (sigma_l rho_j sigma_k)_ab
    blocks = np.einsum("lab,jbc,kcd->jadlk", PAULI, np.asarray(inputs), PAULI)
    return blocks.reshape(len(inputs) * 4, 16)


def solve_process_linear(inputs: Sequence[np.ndarray], outputs: Sequence[np.ndarray]) -> np.ndarray:
    """Solve rho_out = sum chi_lk sigma_l rho_in sigma_k for the 16 entries of chi."""
    inputs = [np.asarray(rho, dtype=complex) for rho in inputs]
    outputs = [np.asarray(rho, dtype=complex) for rho in outputs]
    if len(inputs) != 4 or len(outputs) != 4:
        raise TomographyError(f"Process tomography needs 4 input/output pairs, got {len(inputs)}")
    if np.linalg.matrix_rank(np.stack([rho.reshape(-1) for rho in inputs]), tol=1e-9) < 4:
        raise TomographyError("Input states are not informationally complete")
    design = _process_design_matrix(inputs)
    target = np.stack(outputs).reshape(-1)
    return np.linalg.solve(design, target).reshape(4, 4)


def _clip_spectrum(matrix: np.ndarray, trace: float) -> Tuple[np.ndarray, float]:
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    clipped = np.clip(eigenvalues, 0.0, None)
    removed = float(np.sum(clipped - eigenvalues))
    if clipped.sum() <= 0.0:
        raise TomographyError("Raw chi has no positive eigenvalue, cannot project it onto a physical process")
    clipped *= trace / clipped.sum()
    return (eigenvectors * clipped) @ eigenvectors.conj().T, removed


def _inverse_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    eigenvalues = np.clip(eigenvalues, 1e-15, None)
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.conj().T


def project_physical_process(raw_chi: np.ndarray) -> ProcessMatrix:
    """Hermitize, clip the chi spectrum, then restore trace preservation.

    Trace preservation is restored by precomposing with rho -> S rho S,
    S = T^(-1/2), T = sum chi_lk sigma_k sigma_l, which keeps complete positivity.
    """
    raw_chi = np.asarray(raw_chi, dtype=complex)
    chi = 0.5 * (raw_chi + raw_chi.conj().T)
    logger.debug(f"chi Hermitian correction {np.max(np.abs(chi - raw_chi)):.3e}")

    chi, removed = _clip_spectrum(chi, 1.0)
    logger.debug(f"chi PSD clipping removed {removed:.3e} of negative weight")

    condition = np.einsum("lk,kab,lbc->ac", chi, PAULI, PAULI)
    deviation = float(np.max(np.abs(condition - np.eye(2))))
    if deviation > 0.0:
        s = _inverse_sqrt(0.5 * (condition + condition.conj().T))
        expansion = 0.5 * np.einsum("mab,lbc,ca->lm", PAULI, PAULI, s)
        chi = expansion.T @ chi @ expansion.conj()
        chi = 0.5 * (chi + chi.conj().T)
    logger.debug(f"chi trace-preservation deviation before rescale {deviation:.3e}")
    return ProcessMatrix(chi)


def reconstruct_process(pairs: Sequence[Tuple[DensityMatrix, DensityMatrix]],
                        chi_ideal: Optional[ProcessMatrix] = None) -> ProcessEstimate:
    """QPT from four (input, output) pairs with an informationally complete input set."""
    if len(pairs) != 4:
        raise TomographyError(f"Process tomography needs 4 input/output pairs, got {len(pairs)}")
    raw = solve_process_linear([np.asarray(i) for i, _ in pairs], [np.asarray(o) for _, o in pairs])
    chi = project_physical_process(raw)
    chi_ideal = chi_ideal or ProcessMatrix.identity()
    return ProcessEstimate(
        chi=chi,
        f_proc=process_overlap(chi_ideal, chi),
        f_proc_std=0.0,
        affine_map=affine_map(chi.chi),
    )


def _ideal_inputs() -> List[np.ndarray]:
    return [np.asarray(DensityMatrix.from_label(label)) for label in PROCESS_INPUT_LABELS]


def process_from_counts(count_table: CountTable, chi_ideal: Optional[ProcessMatrix] = None) -> ProcessEstimate:
    """Reconstruct each output by QST, then chi from the four ideal inputs."""
    pairs = []
    for label in PROCESS_INPUT_LABELS:
        if label not in count_table:
            raise TomographyError(f"Missing counts for process input state '{label}'")
        output = project_physical_state(qst_linear(count_table[label]))
        pairs.append((DensityMatrix.from_label(label), output))
    return reconstruct_process(pairs, chi_ideal)


def _count_block(count_table: CountTable) -> np.ndarray:
    block = []
    for label in PROCESS_INPUT_LABELS:
        if label not in count_table:
            raise TomographyError(f"Missing counts for process input state '{label}'")
        block.append(_counts_array(_records_by_basis(count_table[label])))
    return np.stack(block)  # (4 inputs, 3 bases, 2 outcomes)


def resampled_processes(count_table: CountTable, mc_samples: int, seed: int) -> List[np.ndarray]:
    """Poisson-resampled chi reconstructions, one per sub-seed (seed, index)."""
    _check_mc_samples(mc_samples)
    counts = _count_block(count_table)
    inputs = _ideal_inputs()
    chis = []
    for index in range(mc_samples):
        resampled = _resample_generator(seed, index).poisson(counts)
        outputs = [density_from_bloch(r) for r in _project_bloch(_bloch_from_counts(resampled))]
        chis.append(project_physical_process(solve_process_linear(inputs, outputs)).chi)
    return chis


def monte_carlo_process_uncertainty(count_table: CountTable, mc_samples: int, seed: int,
                                    chi_ideal: Optional[ProcessMatrix] = None) -> float:
    """Standard deviation of F_proc over Poisson-resampled reconstructions."""
    ideal = (chi_ideal or ProcessMatrix.identity()).chi
    values = [np.real(np.trace(ideal @ chi)) for chi in resampled_processes(count_table, mc_samples, seed)]
    return float(np.std(values))


def fidelity_report(channel_counts: CountTable, back_to_back_counts: CountTable,
                    mc_samples: int, seed: int) -> FidelityReport:
    """F0, F1, F2 with uncertainties from resamples sharing the same index."""
    ideal = ProcessMatrix.identity()
    channel = process_from_counts(channel_counts).chi
    back_to_back = process_from_counts(back_to_back_counts).chi

    channel_samples = resampled_processes(channel_counts, mc_samples, seed)
    b2b_samples = resampled_processes(back_to_back_counts, mc_samples, seed + 1)
    f0 = [np.real(c[0, 0]) for c in channel_samples]
    f1 = [np.real(b[0, 0]) for b in b2b_samples]
    f2 = [np.real(np.trace(b @ c)) for b, c in zip(b2b_samples, channel_samples)]
    return FidelityReport(
        f0=process_overlap(ideal, channel),
        f1=process_overlap(ideal, back_to_back),
        f2=process_overlap(back_to_back, channel),
        uncertainties=(float(np.std(f0)), float(np.std(f1)), float(np.std(f2))),
    )


# --------------------------------------------------------------------------
# Bloch ellipsoid
# --------------------------------------------------------------------------

def bloch_ellipsoid(chi: ProcessMatrix, n_theta: int, n_phi: int) -> BlochMesh:
    """Image of a latitude/longitude mesh of the unit sphere under the channel."""
    if n_theta < 2 or n_phi < 2:
        raise TomographyError(f"Mesh needs n_theta, n_phi >= 2, got {n_theta} x {n_phi}")
    matrix, offset = affine_map(chi.chi)
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    directions = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    points = directions @ matrix.T + offset
    return BlochMesh(theta=theta, phi=phi, points=points)


def ellipsoid_axes(matrix: np.ndarray) -> np.ndarray:
    """Semi-axes of the deformed Bloch sphere, largest first."""
    return np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)


# --------------------------------------------------------------------------
# Channel models
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Single-qubit channel described by its Bloch action r -> matrix @ r + offset."""

    kind: str
    matrix: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def identity(cls) -> "ChannelModel":
        return cls("identity", np.eye(3))

    @classmethod
    def depolarizing(cls, shrink: float) -> "ChannelModel":
        return cls("depolarizing", shrink * np.eye(3))

    @classmethod
    def pauli(cls, shrink: Sequence[float], offset: Sequence[float] = (0.0, 0.0, 0.0)) -> "ChannelModel":
        return cls("pauli", np.diag(np.asarray(shrink, dtype=float)), np.asarray(offset, dtype=float))

    def affine(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.matrix, dtype=float), np.asarray(self.offset, dtype=float)

    def chi(self) -> ProcessMatrix:
        return project_physical_process(chi_from_affine(*self.affine()))

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        matrix, offset = self.affine()
        r = matrix @ np.array(bloch_vector(rho)) + offset
        return DensityMatrix(density_from_bloch(_project_bloch(r)))


def chi_from_affine(matrix: np.ndarray, offset: Sequence[float]) -> np.ndarray:
    """Raw chi of the channel r -> matrix @ r + offset, from its exact outputs."""
    matrix = np.asarray(matrix, dtype=float)
    offset = np.asarray(offset, dtype=float)
    inputs = _ideal_inputs()
    outputs = []
    for rho in inputs:
        r = np.real(np.einsum("ab,kba->k", rho, PAULI[1:]))
        outputs.append(density_from_bloch(matrix @ r + offset))
    return solve_process_linear(inputs, outputs)


def calibrate_channel(target_fidelities: Mapping[str, float]) -> ChannelModel:
    """Channel whose six canonical output fidelities equal the targets.

    For the eigenstates (+k, -k) of each axis, F(+-k) = (1 + lambda_k +- c_k) / 2,
    so lambda_k = F(+k) + F(-k) - 1 and c_k = F(+k) - F(-k).
    """
    missing = [label for label in STATE_LABELS if label not in target_fidelities]
    if missing:
        raise TomographyError(f"Channel calibration needs fidelities for {missing}")
    shrink = np.zeros(3)
    offset = np.zeros(3)
    for axis, (plus, minus) in AXIS_STATES.items():
        f_plus, f_minus = float(target_fidelities[plus]), float(target_fidelities[minus])
        shrink[BASIS_AXIS[axis]] = f_plus + f_minus - 1.0
        offset[BASIS_AXIS[axis]] = f_plus - f_minus
    logger.info(f"Calibrated channel shrink={np.round(shrink, 6).tolist()} offset={np.round(offset, 6).tolist()}")
    return ChannelModel("calibrated", np.diag(shrink), offset)


def ideal_fidelities(channel: ChannelModel) -> Dict[str, float]:
    """Exact output fidelity of each canonical state through ``channel``."""
    fidelities = {}
    for label in STATE_LABELS:
        out = channel.apply(DensityMatrix.from_label(label))
        psi = pure_state(label)
        fidelities[label] = float(np.real(np.vdot(psi, np.asarray(out) @ psi)))
    return fidelities
