"""Faraday-Michelson interferometer readout, basis measurements and phase drift."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.quantum.qmath import DensityMatrix, STATE_LABELS
from src.quantum.tomography import BASES, MeasurementRecord

from .link import LinkBudget, channel_transmission, dark_click_probability

logger = logging.getLogger(__name__)

# interferometer phase per measurement basis; Y is X shifted by pi/2
BASIS_PHASE = {"X": 0.0, "Y": np.pi / 2}
# a photon reaching the FMI interferes only in the central bin half of the time
CENTRAL_BIN_FRACTION = 0.5


class PhaseDriftModel(BaseModel):
    """Wiener-process drift of the interferometer phase."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sigma: float = Field(default=0.05, ge=0, description="Drift strength in rad/sqrt(s)")
    initial_phase: float = Field(default=0.0, description="Phase at t = 0 in rad")


def evolve_phase(drift: PhaseDriftModel, dt: float, rng: np.random.Generator,
                 phase: Union[float, np.ndarray, None] = None):
    """Advance the phase (or an array of independent phases) by one Wiener increment."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if phase is None:
        phase = drift.initial_phase
    if drift.sigma == 0.0 or dt == 0.0:
        return phase
    step = rng.normal(0.0, drift.sigma * np.sqrt(dt), size=np.shape(phase))
    if np.ndim(phase) == 0:
        return float(phase + step)
    return np.asarray(phase) + step


@dataclass(frozen=True)
class FMIOutput:
    """Mean photon numbers per (time bin, detector) behind the FMI."""

    bins: Dict[Tuple[str, str], float]

    @property
    def total(self) -> float:
        return float(sum(self.bins.values()))

    def _fraction(self, value: float) -> float:
        total = self.total
        return value / total if total > 0 else 0.0

    @property
    def p_d1(self) -> float:
        """Fraction of the input intensity reaching D1 in the interference bin."""
        return self._fraction(self.bins[("interference", "D1")])

    @property
    def p_d2(self) -> float:
        return self._fraction(self.bins[("interference", "D2")])

    @property
    def timing_bins(self) -> Dict[str, float]:
        fractions = {}
        for (time_bin, _), value in self.bins.items():
            fractions[time_bin] = fractions.get(time_bin, 0.0) + self._fraction(value)
        return fractions


def fmi_measure(pulse_pair: Tuple[float, float, float], interferometer_phase: float, which_basis: str) -> FMIOutput:
    """Split a pulse pair (mu_early, mu_late, relative phase) over the FMI output bins.

    The early pulse through the long arm meets the late pulse through the short
    arm in the interference bin; the other two paths land in the side bins.
    """
    mu_early, mu_late, phase = pulse_pair
    if mu_early < 0 or mu_late < 0:
        raise ValueError(f"Mean photon numbers must be non-negative, got ({mu_early}, {mu_late})")
    if which_basis not in BASIS_PHASE:
        raise ValueError(f"FMI measures the X or Y basis, got '{which_basis}'")
    delta = phase - (interferometer_phase + BASIS_PHASE[which_basis])
    central_d1, central_d2 = central_bin(mu_early, mu_late, delta)
    return FMIOutput(
        bins={
            ("early", "D1"): mu_early / 4.0,
            ("early", "D2"): mu_early / 4.0,
            ("interference", "D1"): float(central_d1),
            ("interference", "D2"): float(central_d2),
            ("late", "D1"): mu_late / 4.0,
            ("late", "D2"): mu_late / 4.0,
        }
    )


def _as_density(state: Union[str, DensityMatrix]) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if state not in STATE_LABELS:
        raise ValueError(f"Unknown state preparation '{state}', expected one of {list(STATE_LABELS)}")
    return DensityMatrix.from_label(state)


def outcome_probability(rho: DensityMatrix, basis: str, link: LinkBudget,
                        interferometer_phase_offset: float = 0.0) -> float:
    """Probability that a detected photon registers as the + outcome of ``basis``."""
    m = np.asarray(rho)
    if basis == "Z":
        # early bin; optical_error moves photons into the wrong bin
        p_early = float(np.real(m[0, 0]))
        return (1.0 - link.optical_error) * p_early + link.optical_error * (1.0 - p_early)
    phi = BASIS_PHASE[basis] + interferometer_phase_offset
    projector = np.array([1.0, np.exp(1j * phi)]) / np.sqrt(2.0)
    return float(np.clip(np.real(np.vdot(projector, m @ projector)), 0.0, 1.0))


def measure_in_basis(state: Union[str, DensityMatrix], basis: str, shots: int, link: LinkBudget,
                     rng: np.random.Generator, interferometer_phase_offset: float = 0.0) -> MeasurementRecord:
    """Single-photon projection onto a Pauli basis with losses and dark counts.

    Z is read out by arrival time on the data line, X and Y by the FMI central
    bin. Each shot ends in exactly one of: + only, - only, double click
    (discarded), no click.
    """
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    if basis not in BASES:
        raise ValueError(f"Unknown basis '{basis}', expected one of {BASES}")
    rho = _as_density(state)
    p_det = channel_transmission(link) * link.detector_efficiency
    if basis != "Z":
        p_det *= CENTRAL_BIN_FRACTION
    p_dc = dark_click_probability(link)
    p_plus = outcome_probability(rho, basis, link, interferometer_phase_offset)

    dark_only = (1.0 - p_det) * p_dc * (1.0 - p_dc)
    probabilities = np.array([
        p_det * p_plus * (1.0 - p_dc) + dark_only,
        p_det * (1.0 - p_plus) * (1.0 - p_dc) + dark_only,
        p_det * p_dc + (1.0 - p_det) * p_dc ** 2,
        (1.0 - p_det) * (1.0 - p_dc) ** 2,
    ])
    probabilities = np.clip(probabilities, 0.0, None)
    n_plus, n_minus, _, _ = rng.multinomial(shots, probabilities / probabilities.sum())
    record = MeasurementRecord(basis=basis, n_plus=int(n_plus), n_minus=int(n_minus))
    if record.flagged:
        logger.warning(f"No counts survived in basis {basis} after {shots} shots")
    return record


def expected_record(state: Union[str, DensityMatrix], basis: str, shots: int,
                    interferometer_phase_offset: float = 0.0,
                    link: Optional[LinkBudget] = None) -> MeasurementRecord:
    """Noiseless counts: ``shots`` detected photons split by the exact outcome probability."""
    link = link or LinkBudget(detector_efficiency=1.0, dark_count_rate=0.0)
    p_plus = outcome_probability(_as_density(state), basis, link, interferometer_phase_offset)
    n_plus = int(round(shots * p_plus))
    return MeasurementRecord(basis=basis, n_plus=n_plus, n_minus=shots - n_plus)


def central_bin(mu_early, mu_late, delta):
    """Mean photons on (D1, D2) in the interference bin; accepts arrays."""
    mu_early = np.asarray(mu_early, dtype=float)
    mu_late = np.asarray(mu_late, dtype=float)
    cross = 2.0 * np.sqrt(mu_early * mu_late) * np.cos(delta)
    return (mu_early + mu_late + cross) / 4.0, (mu_early + mu_late - cross) / 4.0
