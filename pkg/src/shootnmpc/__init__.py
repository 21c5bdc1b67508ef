"""Single-shooting NMPC for differential-drive vehicles."""

from .controller import (
    ControllerState,
    RunStatus,
    Terminated,
    TerminationCriteria,
    WaypointPlan,
    step,
)
from .metrics import RunMetrics, run_metrics
from .model import Control, ControlBounds, ModelParams, Pose, euler_step, wrap_angle
from .ocp import ControlSequence, Obstacle, OcpSpec, Reference, Weights, rollout
from .scenario_io import ConfigError, load_scenario, load_sweep
from .sim import NoiseModel, Outcome, Scenario, TrajectoryLog, run_scenario
from .solver import SolveResult, SolveStatus, SolverConfig, solve

__all__ = [
    "ConfigError", "Control", "ControlBounds", "ControlSequence", "ControllerState",
    "ModelParams", "NoiseModel", "Obstacle", "OcpSpec", "Outcome", "Pose", "Reference",
    "RunMetrics", "RunStatus", "Scenario", "SolveResult", "SolveStatus", "SolverConfig",
    "Terminated", "TerminationCriteria", "TrajectoryLog", "WaypointPlan", "Weights",
    "euler_step", "load_scenario", "load_sweep", "rollout", "run_metrics", "run_scenario",
    "solve", "step", "wrap_angle",
]
