"""Pulse timing, fiber link budget and gated single-photon detection."""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

DETECTORS = ("Ds", "D1", "D2")
# interference: both pulses of a decoy slot; boundary: late pulse k-1 with early pulse k
TIME_BINS = ("early", "late", "interference", "boundary")


class PulseTiming(BaseModel):
    """Two-pulse slot timing of the transmitter."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    pulse_width: float = Field(default=1.5, gt=0, description="Pulse width in ns")
    pulse_separation: float = Field(default=5.0, gt=0, description="Early/late pulse separation in ns")
    pulse_rate: float = Field(default=2.0e8, gt=0, description="Pulse repetition rate in Hz")

    @model_validator(mode="after")
    def _check_timing(self):
        if self.pulse_width >= self.pulse_separation:
            raise ValueError(
                f"pulse_width ({self.pulse_width} ns) must be shorter than pulse_separation ({self.pulse_separation} ns)"
            )
        implied_rate = 1.0e9 / self.pulse_separation
        if abs(self.pulse_rate - implied_rate) > 0.01 * implied_rate:
            raise ValueError(
                f"pulse_rate {self.pulse_rate:g} Hz is not 1/pulse_separation ({implied_rate:g} Hz) within 1%"
            )
        return self

    @property
    def slot_rate(self) -> float:
        """Two-pulse slots per second."""
        return self.pulse_rate / 2.0


class LinkBudget(BaseModel):
    """Attenuation and detector parameters of one fiber link."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    channel_loss: float = Field(default=0.0, ge=0, description="Fiber channel loss in dB")
    system_excess_loss: float = Field(default=0.0, ge=0, description="Receiver-side excess loss in dB")
    detector_efficiency: float = Field(default=0.8, ge=0, le=1, description="Single-photon detection efficiency")
    dark_count_rate: float = Field(default=1e-7, ge=0, description="Dark counts per ns")
    gate_window: float = Field(default=2.5, gt=0, description="Detector gate in ns")
    optical_error: float = Field(default=0.0, ge=0, le=0.5, description="Probability a photon lands in the wrong time bin")
    background_rate: float = Field(default=0.0, ge=0, description="Flat extra background in counts per ns")

    @property
    def total_loss(self) -> float:
        return self.channel_loss + self.system_excess_loss

    def with_channel_loss(self, channel_loss: float) -> "LinkBudget":
        return self.model_copy(update={"channel_loss": float(channel_loss)})


@dataclass(frozen=True)
class DetectionEvent:
    slot: int
    detector: str
    time_bin: str


class DetectionRecord:
    """Click events of one run, ordered by slot index.

    Events are held as parallel integer arrays; detector and time bin are
    indices into ``DETECTORS`` and ``TIME_BINS``.
    """

    def __init__(self, n_slots: int, slots: Sequence[int], detectors: Sequence[int], time_bins: Sequence[int]):
        slots = np.asarray(slots, dtype=np.int64)
        detectors = np.asarray(detectors, dtype=np.int8)
        time_bins = np.asarray(time_bins, dtype=np.int8)
        if not (slots.shape == detectors.shape == time_bins.shape):
            raise ValueError("Detection event arrays must have equal length")
        if slots.size and (slots.min() < 0 or slots.max() >= n_slots):
            raise ValueError(f"Detection slot index outside [0, {n_slots})")
        order = np.lexsort((detectors, time_bins, slots))
        self.n_slots = int(n_slots)
        self.slots = slots[order]
        self.detectors = detectors[order]
        self.time_bins = time_bins[order]

    @classmethod
    def from_events(cls, n_slots: int, events: Sequence[Tuple[int, str, str]]) -> "DetectionRecord":
        if not events:
            return cls(n_slots, [], [], [])
        slots, detectors, time_bins = zip(*events)
        return cls(
            n_slots,
            slots,
            [DETECTORS.index(d) for d in detectors],
            [TIME_BINS.index(b) for b in time_bins],
        )

    def __len__(self) -> int:
        return int(self.slots.size)

    def __iter__(self) -> Iterator[DetectionEvent]:
        for slot, detector, time_bin in zip(self.slots, self.detectors, self.time_bins):
            yield DetectionEvent(int(slot), DETECTORS[detector], TIME_BINS[time_bin])

    @property
    def events(self):
        return list(self)

    def select(self, detector: str, time_bin: Optional[str] = None) -> np.ndarray:
        """Slot indices of the events on ``detector`` (and ``time_bin``)."""
        mask = self.detectors == DETECTORS.index(detector)
        if time_bin is not None:
            mask &= self.time_bins == TIME_BINS.index(time_bin)
        return self.slots[mask]

    def rows(self):
        for event in self:
            yield event.slot, event.detector, event.time_bin


def channel_transmission(link: LinkBudget) -> float:
    """Power transmission of channel plus excess loss."""
    return transmission_from_db(link.total_loss)


def transmission_from_db(loss_db: float) -> float:
    """Power transmission of ``loss_db`` decibels."""
    return float(10.0 ** (-loss_db / 10.0))


def gate_covers_pulse(link: LinkBudget, timing: PulseTiming) -> bool:
    """True when the gate is at least one (flat-top) pulse wide, so it collects the whole pulse."""
    return link.gate_window >= timing.pulse_width


def dark_click_probability(link: LinkBudget) -> float:
    """Per-gate probability of a click with no signal (dark counts plus background)."""
    return float(min(1.0, (link.dark_count_rate + link.background_rate) * link.gate_window))


def click_probability(mean_photons: Union[float, np.ndarray], link: LinkBudget):
    """Gated click probability for a weak coherent pulse of ``mean_photons`` at the detector."""
    p_dc = dark_click_probability(link)
    return 1.0 - np.exp(-link.detector_efficiency * np.asarray(mean_photons)) * (1.0 - p_dc)


def detection_probability(p_signal, link: LinkBudget):
    """1 - (1 - p_signal * eta)(1 - p_dc) for a single-photon arrival probability."""
    p_dc = dark_click_probability(link)
    return 1.0 - (1.0 - np.asarray(p_signal) * link.detector_efficiency) * (1.0 - p_dc)


def detect(p_signal: float, link: LinkBudget, rng: np.random.Generator, size: Optional[int] = None):
    """Draw click outcomes of a gated detector; one bool, or an array of ``size``."""
    if not 0.0 <= p_signal <= 1.0:
        raise ValueError(f"p_signal must be a probability, got {p_signal}")
    p_click = float(detection_probability(p_signal, link))
    draws = rng.random(size)
    return draws < p_click

