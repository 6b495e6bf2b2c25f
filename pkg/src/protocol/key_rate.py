"""Infinite-key secret key rate of the COW link, attenuation sweeps and loss calibration.

Typical usage::

    params = SKRParams(ProtocolConfig(), LinkBudget(channel_loss=12.95), qber=0.0025, visibility=0.992)
    excess = calibrate_excess_loss(params, at_db=12.95, target=5.78e-4)
    curve = skr_sweep(params.with_excess_loss(excess), np.arange(0.0, 60.5, 0.5))
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List

import numpy as np
from scipy.optimize import brentq

from src.photonics.link import LinkBudget, channel_transmission, dark_click_probability
from src.quantum.qmath import binary_entropy

from .cow import ProtocolConfig, ProtocolError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SKRParams:
    config: ProtocolConfig
    link: LinkBudget
    qber: float
    visibility: float

    def __post_init__(self):
        if not 0.0 <= self.qber <= 0.5:
            raise ProtocolError(f"qber must lie in [0, 0.5], got {self.qber}")
        if not -1.0 <= self.visibility <= 1.0:
            raise ProtocolError(f"visibility must lie in [-1, 1], got {self.visibility}")

    def at_channel_loss(self, channel_loss: float) -> "SKRParams":
        return replace(self, link=self.link.with_channel_loss(channel_loss))

    def with_excess_loss(self, excess_loss: float) -> "SKRParams":
        return replace(self, link=self.link.model_copy(update={"system_excess_loss": float(excess_loss)}))


@dataclass(frozen=True)
class KeyRateBreakdown:
    r_optical: float
    r_dark: float
    r_sift: float
    q_total: float
    epsilon: float
    secret_fraction: float
    bits_per_pulse: float
    bits_per_s: float


@dataclass(frozen=True)
class SKRPoint:
    attenuation_db: float
    bits_per_pulse: float
    bits_per_s: float


class CollectiveAttackModel:
    """Stand-in privacy bound: Eve's information driven by the monitor coherence.

    r = 1 - f_ec h2(Q) - (1 - Q) h2((1 + eps) / 2), eps = clamp(2V - 1, 0, 1),
    applied to the sifted rate per pulse. Implementations exposing ``name``,
    ``description`` and ``breakdown(params)`` can be registered in
    ``KEY_RATE_MODELS`` and selected by ``ProtocolConfig.key_rate_model``.
    """

    name: str = "collective"
    description: str = "Infinite-key collective-attack stand-in driven by QBER and visibility"

    def sifted_rates(self, params: SKRParams):
        config = params.config
        t = channel_transmission(params.link)
        eta = params.link.detector_efficiency
        r_optical = 0.5 * config.p_signal * config.bs_data_fraction * (1.0 - np.exp(-config.mu * t * eta))
        # two gated bins per signal slot
        r_dark = 0.5 * config.p_signal * 2.0 * dark_click_probability(params.link)
        return float(r_optical), float(r_dark)

    def raw_secret_fraction(self, params: SKRParams, q_total: float) -> float:
        """Secret fraction before clamping at zero; its sign change marks the cutoff."""
        epsilon = float(np.clip(2.0 * params.visibility - 1.0, 0.0, 1.0))
        eve_information = (1.0 - q_total) * binary_entropy((1.0 + epsilon) / 2.0)
        return 1.0 - params.config.f_ec * binary_entropy(q_total) - eve_information

    def total_qber(self, params: SKRParams) -> float:
        r_optical, r_dark = self.sifted_rates(params)
        r_sift = r_optical + r_dark
        if r_sift <= 0.0:
            return 0.5
        # dark clicks land in the wrong bin half of the time
        return (params.qber * r_optical + 0.5 * r_dark) / r_sift

    def breakdown(self, params: SKRParams) -> KeyRateBreakdown:
        r_optical, r_dark = self.sifted_rates(params)
        r_sift = r_optical + r_dark
        q_total = self.total_qber(params)
        fraction = max(0.0, self.raw_secret_fraction(params, q_total))
        bits_per_pulse = r_sift * fraction
        return KeyRateBreakdown(
            r_optical=r_optical,
            r_dark=r_dark,
            r_sift=r_sift,
            q_total=q_total,
            epsilon=float(np.clip(2.0 * params.visibility - 1.0, 0.0, 1.0)),
            secret_fraction=fraction,
            bits_per_pulse=bits_per_pulse,
            bits_per_s=bits_per_pulse * params.config.timing.pulse_rate,
        )


KEY_RATE_MODELS: Dict[str, CollectiveAttackModel] = {
    CollectiveAttackModel.name: CollectiveAttackModel(),
}


def get_key_rate_model(name: str):
    try:
        return KEY_RATE_MODELS[name]
    except KeyError:
        raise ProtocolError(f"Unknown key-rate model '{name}', available: {sorted(KEY_RATE_MODELS)}") from None


def secret_key_rate(params: SKRParams):
    """(bits per pulse, bits per second) under the configured key-rate model."""
    result = get_key_rate_model(params.config.key_rate_model).breakdown(params)
    return result.bits_per_pulse, result.bits_per_s


def skr_sweep(base: SKRParams, attenuations: Iterable[float]) -> List[SKRPoint]:
    attenuations = sorted({float(a) for a in attenuations})
    if not attenuations:
        raise ProtocolError("SKR sweep needs at least one attenuation point")
    curve = []
    for attenuation in attenuations:
        bits_per_pulse, bits_per_s = secret_key_rate(base.at_channel_loss(attenuation))
        curve.append(SKRPoint(attenuation, bits_per_pulse, bits_per_s))
    return curve


def calibrate_excess_loss(params: SKRParams, at_db: float, target: float,
                          max_excess_db: float = 40.0) -> float:
    """System excess loss (dB) at which the key rate at ``at_db`` equals ``target`` bits/pulse."""
    base = params.at_channel_loss(at_db)

    def mismatch(excess: float) -> float:
        return secret_key_rate(base.with_excess_loss(excess))[0] - target

    low, high = mismatch(0.0), mismatch(max_excess_db)
    if low < 0.0:
        raise ProtocolError(
            f"Target {target:g} bit/pulse is above the lossless-receiver rate {low + target:g} at {at_db} dB"
        )
    if high > 0.0:
        raise ProtocolError(f"Target {target:g} bit/pulse needs more than {max_excess_db} dB excess loss")
    excess = float(brentq(mismatch, 0.0, max_excess_db, xtol=1e-10))
    logger.info(f"Calibrated system excess loss {excess:.4f} dB at {at_db} dB channel loss")
    return excess


def key_rate_cutoff(params: SKRParams, lo_db: float, hi_db: float) -> float:
    """Channel loss at which the secret fraction crosses zero."""
    model = get_key_rate_model(params.config.key_rate_model)

    def fraction(loss_db: float) -> float:
        shifted = params.at_channel_loss(loss_db)
        return model.raw_secret_fraction(shifted, model.total_qber(shifted))

    if fraction(lo_db) <= 0.0 or fraction(hi_db) >= 0.0:
        raise ProtocolError(f"Secret fraction does not change sign between {lo_db} and {hi_db} dB")
    return float(brentq(fraction, lo_db, hi_db, xtol=1e-9))
