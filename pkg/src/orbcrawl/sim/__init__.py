"""Full-dynamics simulation and classical trajectory trackers."""

from .control import dls_step, pd_joint_controller, solve_ik
from .simulator import SimState, SimulationError, Simulator
from .tracking import CONTROLLERS, ErrorLog, PlanTargets, Tracker, TrackerConfig, TrackingReport, initial_state, track

__all__ = [
    "CONTROLLERS", "ErrorLog", "PlanTargets", "SimState", "SimulationError", "Simulator", "Tracker", "TrackerConfig",
    "TrackingReport", "dls_step", "initial_state", "pd_joint_controller", "solve_ik", "track",
]
