# Experiment pipeline: one stage per scenario
from .plot_data import MissingTableError, emit_plot_data
from .report import RunReport
from .runner import run_experiment
from .stages import EXPERIMENT_STAGES

__all__ = ['RunReport', 'run_experiment', 'emit_plot_data', 'MissingTableError', 'EXPERIMENT_STAGES']
