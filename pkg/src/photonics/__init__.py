# Optical chain simulation
from .feedback import FeedbackConfig, PhaseLock
from .interferometer import PhaseDriftModel, fmi_measure, measure_in_basis
from .link import DetectionRecord, LinkBudget, PulseTiming

__all__ = [
    'PulseTiming',
    'LinkBudget',
    'DetectionRecord',
    'PhaseDriftModel',
    'FeedbackConfig',
    'PhaseLock',
    'fmi_measure',
    'measure_in_basis'
]
