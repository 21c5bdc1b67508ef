"""Receding-horizon loop: solve, apply the first control, shift, repeat."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .model import Control, Pose, clamp_control, wrap_angle
from .ocp import ControlSequence, OcpSpec
from .solver import SolveResult, SolverConfig, solve


class Terminated(RuntimeError):
    """Raised when the controller is stepped after reaching a terminal state."""


class RunStatus(str, Enum):
    RUNNING = "running"
    SUCCESS = "success"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TerminationCriteria:
    pos_tol: float = 0.4
    rot_tol: float = 0.4
    max_wall_time: float = 10.0

    def __post_init__(self) -> None:
        for name in ("pos_tol", "rot_tol", "max_wall_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class WaypointPlan:
    waypoints: tuple[Pose, ...]

    def __post_init__(self) -> None:
        wps = tuple(Pose(*map(float, wp)) for wp in self.waypoints)
        if not wps:
            raise ValueError("a waypoint plan needs at least one waypoint")
        if not all(math.isfinite(c) for wp in wps for c in wp):
            raise ValueError("waypoints must be finite")
        object.__setattr__(self, "waypoints", wps)

    @property
    def final(self) -> Pose:
        return self.waypoints[-1]

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass(frozen=True)
class ControllerState:
    current_waypoint_index: int
    last_solution: ControlSequence
    elapsed: float = 0.0
    steps: int = 0

    @classmethod
    def initial(cls, horizon: int) -> "ControllerState":
        return cls(0, ControlSequence.zeros(horizon))


def pose_errors(measured: Pose, target: Pose) -> tuple[float, float]:
    """Euclidean position error and absolute wrapped heading error."""
    dist = math.hypot(measured[0] - target[0], measured[1] - target[1])
    return dist, abs(wrap_angle(measured[2] - target[2]))


def within_tolerance(measured: Pose, target: Pose, criteria: TerminationCriteria) -> bool:
    dist, rot = pose_errors(measured, target)
    return dist <= criteria.pos_tol and rot <= criteria.rot_tol


def advance_waypoint(
    ctrl: ControllerState, plan: WaypointPlan, measured: Pose, criteria: TerminationCriteria
) -> ControllerState:
    i = ctrl.current_waypoint_index
    if i < len(plan) - 1 and within_tolerance(measured, plan.waypoints[i], criteria):
        return replace(ctrl, current_waypoint_index=i + 1)
    return ctrl


def is_done(
    ctrl: ControllerState, plan: WaypointPlan, measured: Pose, criteria: TerminationCriteria
) -> RunStatus:
    if ctrl.current_waypoint_index == len(plan) - 1 and within_tolerance(
        measured, plan.final, criteria
    ):
        return RunStatus.SUCCESS
    if ctrl.elapsed >= criteria.max_wall_time:
        return RunStatus.TIMEOUT
    return RunStatus.RUNNING


def step(
    ctrl: ControllerState,
    spec: OcpSpec,
    measured: Pose,
    plan: WaypointPlan,
    config: SolverConfig | None = None,
    criteria: TerminationCriteria | None = None,
) -> tuple[Control, SolveResult, ControllerState]:
    """One sampling instant: re-solve from ``measured`` and return u_0.

    The warm start is the previous solution shifted left by one with its last
    control repeated. Passing ``criteria`` makes the call refuse to run once
    the plan is finished.
    """
    if criteria is not None and is_done(ctrl, plan, measured, criteria) is not RunStatus.RUNNING:
        raise Terminated("controller has already reached a terminal state")
    if len(ctrl.last_solution) != spec.horizon:
        raise ValueError("warm start length does not match the horizon")
    config = config or SolverConfig.for_sampling_time(spec.params.dt)
    target = plan.waypoints[ctrl.current_waypoint_index]
    active = spec.with_reference(target)
    result = solve(active, Pose(*measured), ctrl.last_solution.shifted(), config)
    u0 = clamp_control(result.w_opt[0], spec.bounds)
    steps = ctrl.steps + 1
    new_state = replace(
        ctrl,
        last_solution=result.w_opt,
        steps=steps,
        elapsed=steps * spec.params.dt,
    )
    return u0, result, new_state
