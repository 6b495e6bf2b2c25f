"""Coherent-one-way QKD: slot encoding, transmission, sifting and the field trial."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.photonics.feedback import FeedbackConfig, LockWindow, PhaseLock
from src.photonics.interferometer import PhaseDriftModel, central_bin
from src.photonics.link import (
    DETECTORS,
    TIME_BINS,
    DetectionRecord,
    LinkBudget,
    PulseTiming,
    channel_transmission,
    click_probability,
    gate_covers_pulse,
)

logger = logging.getLogger(__name__)

SLOT_KINDS = ("signal0", "signal1", "decoy", "empty")
SIGNAL0, SIGNAL1, DECOY, EMPTY = range(4)
# pulses present in the (early, late) position of each kind
EARLY_FILLED = np.array([True, False, True, False])
LATE_FILLED = np.array([False, True, True, False])


class ProtocolError(ValueError):
    """Raised for inconsistent protocol inputs such as mismatched slot clocks."""


class ProtocolConfig(BaseModel):
    """COW source settings: intensity, sequence mix, receiver routing, error correction."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mu: float = Field(default=0.29, gt=0, description="Mean photon number per non-empty pulse")
    p_signal: float = Field(default=0.90, gt=0, le=1, description="Probability of a data (signal) slot")
    p_decoy: float = Field(default=0.07, ge=0, le=1, description="Probability of a decoy slot")
    p_empty: float = Field(default=0.03, ge=0, le=1, description="Probability of an empty slot")
    bs_data_fraction: float = Field(default=0.9, gt=0, lt=1, description="Share of light routed to the data line")
    f_ec: float = Field(default=1.16, ge=1, description="Error-correction efficiency")
    timing: PulseTiming = Field(default_factory=PulseTiming)
    key_rate_model: str = Field(default="collective", description="Name of the key-rate model")

    @model_validator(mode="after")
    def _check_mix(self):
        total = self.p_signal + self.p_decoy + self.p_empty
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"p_signal + p_decoy + p_empty must be 1, got {total:.15g}")
        return self

    @property
    def kind_probabilities(self) -> np.ndarray:
        half = self.p_signal / 2.0
        return np.array([half, half, self.p_decoy, self.p_empty])


@dataclass(frozen=True, eq=False)
class SlotSequence:
    """Time-ordered slots; all pulses are cut from one coherent laser, so relative phase is 0."""

    kinds: np.ndarray
    mu: float

    def __post_init__(self):
        kinds = np.asarray(self.kinds, dtype=np.int8)
        if kinds.size and (kinds.min() < 0 or kinds.max() >= len(SLOT_KINDS)):
            raise ProtocolError("Slot kind codes must index SLOT_KINDS")
        kinds.setflags(write=False)
        object.__setattr__(self, "kinds", kinds)

    def __len__(self) -> int:
        return int(self.kinds.size)

    @property
    def mu_early(self) -> np.ndarray:
        return np.where(EARLY_FILLED[self.kinds], self.mu, 0.0)

    @property
    def mu_late(self) -> np.ndarray:
        return np.where(LATE_FILLED[self.kinds], self.mu, 0.0)

    @property
    def signal_mask(self) -> np.ndarray:
        return self.kinds <= SIGNAL1

    @property
    def bits(self) -> np.ndarray:
        """Data bits in slot order."""
        return (self.kinds[self.signal_mask] == SIGNAL1).astype(np.int8)

    @property
    def slots(self):
        return [
            (SLOT_KINDS[k], (float(e), float(l), 0.0))
            for k, e, l in zip(self.kinds, self.mu_early, self.mu_late)
        ]

    def kind_counts(self) -> np.ndarray:
        return np.bincount(self.kinds, minlength=len(SLOT_KINDS))


def _draw_filler(config: ProtocolConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """True where a slot carries data, otherwise the decoy/empty kind code."""
    return rng.choice(
        np.array([-1, DECOY, EMPTY], dtype=np.int8),
        size=size,
        p=[config.p_signal, config.p_decoy, config.p_empty],
    )


def encode(bits: Sequence[int], config: ProtocolConfig, rng: np.random.Generator) -> SlotSequence:
    """Place each bit in a signal slot; decoy and empty slots are drawn in between.

    The sequence ends with the slot carrying the last bit.
    """
    bits = np.asarray(bits, dtype=np.int8).reshape(-1)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ProtocolError("Bits must be 0 or 1")
    chunks = []
    n_signal = 0
    while n_signal < bits.size:
        size = max(64, int(1.1 * (bits.size - n_signal) / config.p_signal))
        chunk = _draw_filler(config, size, rng)
        chunks.append(chunk)
        n_signal += int(np.count_nonzero(chunk < 0))
    if not chunks:
        return SlotSequence(np.zeros(0, dtype=np.int8), config.mu)
    kinds = np.concatenate(chunks)
    signal_positions = np.flatnonzero(kinds < 0)[: bits.size]
    kinds = kinds[: signal_positions[-1] + 1].copy()
    kinds[signal_positions] = np.where(bits == 1, SIGNAL1, SIGNAL0)
    return SlotSequence(kinds, config.mu)


def check_gate(link: LinkBudget, protocol: ProtocolConfig):
    """Raise ProtocolError when the detector gate is narrower than the pulses it collects."""
    if not gate_covers_pulse(link, protocol.timing):
        raise ProtocolError(
            f"gate_window ({link.gate_window} ns) is shorter than the {protocol.timing.pulse_width} ns pulse width"
        )


def random_slots(n_slots: int, config: ProtocolConfig, rng: np.random.Generator) -> SlotSequence:
    """``n_slots`` slots with kinds drawn at the configured mix (random data bits)."""
    kinds = rng.choice(len(SLOT_KINDS), size=n_slots, p=config.kind_probabilities)
    return SlotSequence(kinds.astype(np.int8), config.mu)


def transmit(sequence: SlotSequence, link: LinkBudget, protocol: ProtocolConfig,
             rng: np.random.Generator, phase_error=0.0) -> DetectionRecord:
    """Per-slot simulation of the data line (Ds) and the monitor interferometer (D1, D2).

    ``phase_error`` is the monitor interferometer misalignment, a scalar or one
    value per slot. Monitor gates cover the interference bin inside each slot
    and the boundary bin between the late pulse of slot k-1 and the early pulse of slot k.
    """
    check_gate(link, protocol)
    n = len(sequence)
    t = channel_transmission(link)
    f_data = protocol.bs_data_fraction
    mu_e = sequence.mu_early * t
    mu_l = sequence.mu_late * t

    error = link.optical_error
    data_early = f_data * ((1.0 - error) * mu_e + error * mu_l)
    data_late = f_data * ((1.0 - error) * mu_l + error * mu_e)
    click_early = rng.random(n) < click_probability(data_early, link)
    click_late = rng.random(n) < click_probability(data_late, link)

    monitor_e = (1.0 - f_data) * mu_e
    monitor_l = (1.0 - f_data) * mu_l
    delta = np.broadcast_to(np.asarray(phase_error, dtype=float), (n,))
    inner_d1, inner_d2 = central_bin(monitor_e, monitor_l, delta)
    previous_late = np.concatenate([[0.0], monitor_l[:-1]])
    boundary_d1, boundary_d2 = central_bin(previous_late, monitor_e, delta)

    slots, detectors, time_bins = [], [], []

    def add(mask, detector, time_bin):
        index = np.flatnonzero(mask)
        slots.append(index)
        detectors.append(np.full(index.size, DETECTORS.index(detector)))
        time_bins.append(np.full(index.size, TIME_BINS.index(time_bin)))

    add(click_early, "Ds", "early")
    add(click_late, "Ds", "late")
    add(rng.random(n) < click_probability(inner_d1, link), "D1", "interference")
    add(rng.random(n) < click_probability(inner_d2, link), "D2", "interference")
    add(rng.random(n) < click_probability(boundary_d1, link), "D1", "boundary")
    add(rng.random(n) < click_probability(boundary_d2, link), "D2", "boundary")

    record = DetectionRecord(n, np.concatenate(slots), np.concatenate(detectors), np.concatenate(time_bins))
    logger.debug(f"Transmitted {n} slots, {len(record)} detection events")
    return record


@dataclass(frozen=True, eq=False)
class SiftStats:
    n_sifted: int
    n_errors: int
    qber: Optional[float]
    visibility: Optional[float]
    c_d1: int
    c_d2: int
    sifted_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    reference_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))


def visibility(c_d1: int, c_d2: int) -> Optional[float]:
    """(c_d1 - c_d2) / (c_d1 + c_d2); None when there are no counts."""
    total = c_d1 + c_d2
    if total <= 0:
        return None
    return (c_d1 - c_d2) / total


def phase_error_rate(v: float) -> float:
    """Phase error rate implied by monitor visibility ``v``."""
    return (1.0 - v) / 2.0


def _slot_mask(n: int, slots: np.ndarray) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[slots] = True
    return mask


def decode_and_sift(sent: SlotSequence, detections: DetectionRecord) -> SiftStats:
    """Raw key from data-line arrival times, coherence counts from the monitor line."""
    n = len(sent)
    if detections.n_slots != n:
        raise ProtocolError(f"Slot clock mismatch: {n} slots sent, detections cover {detections.n_slots}")
    early = _slot_mask(n, detections.select("Ds", "early"))
    late = _slot_mask(n, detections.select("Ds", "late"))
    kinds = sent.kinds

    signal = sent.signal_mask
    single = signal & (early ^ late)
    sifted_bits = late[single].astype(np.int8)
    reference_bits = (kinds[single] == SIGNAL1).astype(np.int8)
    n_sifted = int(sifted_bits.size)
    n_errors = int(np.count_nonzero(sifted_bits != reference_bits))
    double = int(np.count_nonzero(signal & early & late))
    if double:
        logger.debug(f"Discarded {double} double-click signal slots")

    # coherent pairs: both pulses of a decoy, or a filled late pulse followed by a filled early pulse
    inner_pair = kinds == DECOY
    boundary_pair = np.zeros(n, dtype=bool)
    boundary_pair[1:] = LATE_FILLED[kinds[:-1]] & EARLY_FILLED[kinds[1:]]
    c_d1 = int(np.count_nonzero(inner_pair[detections.select("D1", "interference")]))
    c_d1 += int(np.count_nonzero(boundary_pair[detections.select("D1", "boundary")]))
    c_d2 = int(np.count_nonzero(inner_pair[detections.select("D2", "interference")]))
    c_d2 += int(np.count_nonzero(boundary_pair[detections.select("D2", "boundary")]))

    return SiftStats(
        n_sifted=n_sifted,
        n_errors=n_errors,
        qber=n_errors / n_sifted if n_sifted else None,
        visibility=visibility(c_d1, c_d2),
        c_d1=c_d1,
        c_d2=c_d2,
        sifted_bits=sifted_bits,
        reference_bits=reference_bits,
    )


# --------------------------------------------------------------------------
# Field trial
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialWindow:
    start: float
    qber: Optional[float]
    visibility: Optional[float]
    n_sifted: int
    n_errors: int
    c_d1: int
    c_d2: int
    residual_phase: float
    actuation: float


@dataclass(frozen=True)
class FieldTrialResult:
    windows: List[TrialWindow]

    def _values(self, name: str) -> np.ndarray:
        values = [getattr(w, name) for w in self.windows if getattr(w, name) is not None]
        return np.asarray(values, dtype=float)

    @property
    def mean_qber(self) -> Optional[float]:
        values = self._values("qber")
        return float(values.mean()) if values.size else None

    @property
    def mean_visibility(self) -> Optional[float]:
        values = self._values("visibility")
        return float(values.mean()) if values.size else None

    @property
    def min_visibility(self) -> Optional[float]:
        values = self._values("visibility")
        return float(values.min()) if values.size else None

    @property
    def residual_phase_std(self) -> float:
        return float(np.std(self._values("residual_phase")))

    @property
    def total_sifted(self) -> int:
        return int(sum(w.n_sifted for w in self.windows))


class MonitorLine:
    """Window-aggregated monitor counts of coherent pulse pairs at a given phase error."""

    def __init__(self, link: LinkBudget, protocol: ProtocolConfig, rng: np.random.Generator):
        t = channel_transmission(link)
        self.link = link
        self.slot_rate = protocol.timing.slot_rate
        self.pulse_mean = protocol.mu * t * (1.0 - protocol.bs_data_fraction)
        # a decoy, or a (late-filled, early-filled) neighbour pair
        p_late = protocol.p_signal / 2.0 + protocol.p_decoy
        self.pair_probability = protocol.p_decoy + p_late ** 2
        self.rng = rng

    def __call__(self, phase_error: float, duration: float):
        """Draw (c_d1, c_d2) monitor counts for one window of ``duration`` seconds."""
        n_slots = int(round(self.slot_rate * duration))
        n_pairs = self.rng.binomial(n_slots, self.pair_probability)
        mean_d1, mean_d2 = central_bin(self.pulse_mean, self.pulse_mean, phase_error)
        c_d1 = self.rng.binomial(n_pairs, float(click_probability(mean_d1, self.link)))
        c_d2 = self.rng.binomial(n_pairs, float(click_probability(mean_d2, self.link)))
        return int(c_d1), int(c_d2)


class DataLine:
    """Window-aggregated sifting of the data line."""

    def __init__(self, link: LinkBudget, protocol: ProtocolConfig, rng: np.random.Generator):
        t = channel_transmission(link)
        mean = protocol.mu * t * protocol.bs_data_fraction
        p_right = float(click_probability(mean * (1.0 - link.optical_error), link))
        p_wrong = float(click_probability(mean * link.optical_error, link))
        self.probabilities = np.array([
            p_right * (1.0 - p_wrong),
            p_wrong * (1.0 - p_right),
            p_right * p_wrong,
            (1.0 - p_right) * (1.0 - p_wrong),
        ])
        self.slot_rate = protocol.timing.slot_rate
        self.p_signal = protocol.p_signal
        self.rng = rng

    def __call__(self, duration: float):
        """Draw (sifted, errors) data-line counts for one window of ``duration`` seconds."""
        n_signal = self.rng.binomial(int(round(self.slot_rate * duration)), self.p_signal)
        right, wrong, _, _ = self.rng.multinomial(n_signal, self.probabilities)
        return int(right + wrong), int(wrong)


def run_field_trial(link: LinkBudget, protocol: ProtocolConfig, drift: PhaseDriftModel,
                    feedback: FeedbackConfig, duration: float, streams) -> FieldTrialResult:
    """Long-run COW operation with drifting, optionally PID-locked, monitor phase.

    ``streams`` maps the names ``drift``, ``monitor`` and ``sifting`` to
    independent generators.
    """
    check_gate(link, protocol)
    monitor = MonitorLine(link, protocol, streams["monitor"])
    data_line = DataLine(link, protocol, streams["sifting"])
    lock_windows: List[LockWindow] = PhaseLock(feedback, drift).run(duration, monitor, streams["drift"])

    windows = []
    for lock in lock_windows:
        n_sifted, n_errors = data_line(feedback.period)
        windows.append(TrialWindow(
            start=lock.start,
            qber=n_errors / n_sifted if n_sifted else None,
            visibility=visibility(lock.c_d1, lock.c_d2),
            n_sifted=n_sifted,
            n_errors=n_errors,
            c_d1=lock.c_d1,
            c_d2=lock.c_d2,
            residual_phase=lock.residual_phase,
            actuation=lock.actuation,
        ))
    missing = sum(1 for w in windows if w.visibility is None)
    if missing:
        logger.warning(f"Visibility undefined in {missing} of {len(windows)} windows")
    result = FieldTrialResult(windows)
    logger.info(
        f"Field trial: {len(windows)} windows, mean QBER {result.mean_qber}, "
        f"mean visibility {result.mean_visibility}"
    )
    return result
