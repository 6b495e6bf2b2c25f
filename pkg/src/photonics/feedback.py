"""PID phase stabilization of the monitor-line interferometer."""

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .interferometer import PhaseDriftModel, evolve_phase

logger = logging.getLogger(__name__)

# (phase error in rad, duration in s) -> (counts on D1, counts on D2)
MonitorMeasurement = Callable[[float, float], Tuple[int, int]]


class FeedbackConfig(BaseModel):
    """PID gains and timing of the phase lock."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = Field(default=True, description="Close the loop; when false the phase drifts freely")
    kp: float = Field(default=0.05, description="Proportional gain")
    ki: float = Field(default=0.45, description="Integral gain in 1/s")
    kd: float = Field(default=0.0, description="Derivative gain in s")
    period: float = Field(default=0.47, gt=0, description="Feedback window in s")
    setpoint: float = Field(default=0.0, description="Target of the demodulated error signal")
    integral_limit: float = Field(default=100.0, gt=0, description="Anti-windup bound on the integral term")
    dither: float = Field(default=0.045, gt=0, lt=np.pi / 2, description="Dither amplitude in rad")
    substeps: int = Field(default=4, ge=1, description="Drift sub-steps per half window")


@dataclass(frozen=True)
class PIDState:
    config: FeedbackConfig
    integral: float = 0.0
    previous_error: Optional[float] = None


def pid_step(state: PIDState, error: float, dt: float) -> Tuple[PIDState, float]:
    """One discrete PID update; the derivative term is zero on the first step."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    gains = state.config
    limit = gains.integral_limit
    integral = float(np.clip(state.integral + error * dt, -limit, limit))
    derivative = 0.0 if state.previous_error is None else (error - state.previous_error) / dt
    actuation = gains.kp * error + gains.ki * integral + gains.kd * derivative
    return replace(state, integral=integral, previous_error=error), float(actuation)


@dataclass(frozen=True)
class LockWindow:
    """Monitor counts and controller output of one feedback period."""

    start: float
    residual_phase: float
    c_d1: int
    c_d2: int
    error_fraction: Optional[float]
    actuation: float


def error_fraction(c_d1: int, c_d2: int) -> Optional[float]:
    """Monitor error signal c(D2) / (c(D1) + c(D2)); None when no counts."""
    total = c_d1 + c_d2
    return c_d2 / total if total else None


class PhaseLock:
    """Closed loop of drift, dithered actuator and PID on the monitor error fraction.

    Each window is split into a +dither and a -dither half. The difference of
    the two error fractions divided by sin(dither) is V sin(delta) for residual
    phase delta, a signed error signal the PID drives to ``setpoint``.
    """

    def __init__(self, feedback: FeedbackConfig, drift: PhaseDriftModel):
        self.feedback = feedback
        self.drift = drift

    def run(self, duration: float, measure: MonitorMeasurement, rng: np.random.Generator) -> List[LockWindow]:
        period = self.feedback.period
        n_windows = int(np.floor(duration / period + 1e-9))
        if n_windows < 1:
            raise ValueError(f"Run duration {duration} s is shorter than one feedback window ({period} s)")
        substeps = self.feedback.substeps
        dt = period / (2 * substeps)
        dither = self.feedback.dither if self.feedback.enabled else 0.0

        state = PIDState(self.feedback)
        phase = float(self.drift.initial_phase)
        actuation = 0.0
        windows = []
        for index in range(n_windows):
            halves = []
            residuals = []
            for sign in (1.0, -1.0):
                c_d1 = c_d2 = 0
                for _ in range(substeps):
                    phase = evolve_phase(self.drift, dt, rng, phase)
                    residual = phase + actuation
                    residuals.append(residual)
                    d1, d2 = measure(residual + sign * dither, dt)
                    c_d1 += int(d1)
                    c_d2 += int(d2)
                halves.append((c_d1, c_d2))

            total_d1 = halves[0][0] + halves[1][0]
            total_d2 = halves[0][1] + halves[1][1]
            q_plus = error_fraction(*halves[0])
            q_minus = error_fraction(*halves[1])
            windows.append(LockWindow(
                start=index * period,
                residual_phase=float(np.mean(residuals)),
                c_d1=total_d1,
                c_d2=total_d2,
                error_fraction=error_fraction(total_d1, total_d2),
                actuation=actuation,
            ))

            if not self.feedback.enabled:
                continue
            if q_plus is None or q_minus is None:
                logger.warning(f"Feedback window {index} has no monitor counts, holding actuator")
                continue
            signal = (q_plus - q_minus) / np.sin(dither)
            state, correction = pid_step(state, self.feedback.setpoint - signal, period)
            actuation = correction
            logger.debug(f"window {index}: signal={signal:.4f} actuation={actuation:.4f}")

        return windows
