"""Energy-efficient precoding and antenna placement for motor-driven movable arrays."""

from .channel import Scenario, candidate_grid, channel_vector, sample_channel
from .harness import ExperimentConfig, ResultRow, emit_results, reproduce_figure, run_experiment
from .metrics import EEBreakdown, energy_efficiency
from .motor import MotorParams, motor_power, pull_out_torque
from .mu import dinkelbach_precoding, mu_solve
from .su import su_solve

__version__ = "0.1.0"

__all__ = [
    "EEBreakdown", "ExperimentConfig", "MotorParams", "ResultRow", "Scenario",
    "candidate_grid", "channel_vector", "dinkelbach_precoding", "emit_results",
    "energy_efficiency", "motor_power", "mu_solve", "pull_out_torque", "reproduce_figure",
    "run_experiment", "sample_channel", "su_solve",
]
