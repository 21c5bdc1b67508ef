"""Closed-loop plant simulation with control and localization noise."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import controller
from .controller import ControllerState, RunStatus, TerminationCriteria, WaypointPlan
from .model import Control, ControlBounds, ModelParams, Pose, clamp_control, euler_step
from .ocp import Obstacle, OcpSpec, Reference, Weights
from .solver import InfeasibleStart, SolverConfig

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"
    COLLISION = "collision"


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative Gaussian control noise and additive Gaussian pose noise."""

    control_noise_frac: float = 0.0
    localization_sigma: float = 0.0
    heading_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("control_noise_frac", "localization_sigma", "heading_sigma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and nonnegative")

    @classmethod
    def with_default_heading(cls, control_noise_frac: float, localization_sigma: float, seed: int = 0) -> "NoiseModel":
        # 0.02 m of position noise goes with 0.04 rad of heading noise.
        return cls(control_noise_frac, localization_sigma, 2.0 * localization_sigma, seed)

    def streams(self) -> tuple[np.random.Generator, np.random.Generator]:
        """Independent (control, localization) generators derived from the seed."""
        control_ss, loc_ss = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(control_ss), np.random.default_rng(loc_ss)


@dataclass(frozen=True)
class Scenario:
    name: str
    start: Pose
    plan: WaypointPlan
    obstacles: tuple[Obstacle, ...] = ()
    robot_radius: float = 0.15
    safety_margin: float = 0.05
    dt: float = 0.5
    horizon: int = 20
    weights: Weights = field(default_factory=Weights)
    bounds: ControlBounds = field(default_factory=ControlBounds)
    noise: NoiseModel = field(default_factory=NoiseModel)
    criteria: TerminationCriteria = field(default_factory=TerminationCriteria)

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", Pose(*map(float, self.start)))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not all(math.isfinite(c) for c in self.start):
            raise ValueError("start pose must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.robot_radius < 0 or self.safety_margin < 0:
            raise ValueError("robot_radius and safety_margin must be nonnegative")

    def ocp_spec(self) -> OcpSpec:
        return OcpSpec(
            horizon=self.horizon,
            params=ModelParams(self.dt),
            bounds=self.bounds,
            weights=self.weights,
            reference=Reference(self.plan.waypoints[0]),
            obstacles=self.obstacles,
            robot_radius=self.robot_radius,
            safety_margin=self.safety_margin,
        )


@dataclass(frozen=True)
class LogRow:
    """One sampling instant. Control fields are None on the terminal row."""

    t: float
    commanded: Control | None
    applied: Control | None
    true_pose: Pose
    measured_pose: Pose
    solve_time: float
    status: str
    waypoint_index: int


@dataclass(frozen=True)
class TrajectoryLog:
    scenario: str
    dt: float
    rows: tuple[LogRow, ...]
    outcome: Outcome

    def true_positions(self) -> np.ndarray:
        return np.array([r.true_pose[:2] for r in self.rows], dtype=float).reshape(-1, 2)

    @property
    def final_pose(self) -> Pose:
        return self.rows[-1].true_pose

    @property
    def n_controls(self) -> int:
        return sum(r.applied is not None for r in self.rows)


def apply_control_noise(
    u: Control, noise: NoiseModel, rng: np.random.Generator, bounds: ControlBounds | None = None
) -> Control:
    if noise.control_noise_frac == 0:
        noisy = Control(*u)
    else:
        eps = rng.normal(0.0, noise.control_noise_frac, 2).tolist()
        noisy = Control(u[0] * (1.0 + eps[0]), u[1] * (1.0 + eps[1]))
    return clamp_control(noisy, bounds) if bounds is not None else noisy


def apply_localization_noise(true_pose: Pose, noise: NoiseModel, rng: np.random.Generator) -> Pose:
    if noise.localization_sigma == 0 and noise.heading_sigma == 0:
        return Pose(*true_pose)
    d = rng.normal(0.0, 1.0, 3).tolist()
    return Pose(
        true_pose[0] + noise.localization_sigma * d[0],
        true_pose[1] + noise.localization_sigma * d[1],
        true_pose[2] + noise.heading_sigma * d[2],
    )


def collides(pose: Pose, obstacles, robot_radius: float) -> bool:
    """Hard contact test; the safety margin is deliberately not included."""
    return any(
        math.hypot(pose[0] - ob.center[0], pose[1] - ob.center[1]) < robot_radius + ob.radius
        for ob in obstacles
    )


def run_scenario(scn: Scenario, config: SolverConfig | None = None) -> TrajectoryLog:
    """Simulate the closed loop until success, timeout or collision."""
    config = config or SolverConfig.for_sampling_time(scn.dt)
    spec = scn.ocp_spec()
    params = spec.params
    control_rng, loc_rng = scn.noise.streams()
    state = ControllerState.initial(scn.horizon)
    true_pose = scn.start
    rows: list[LogRow] = []
    k = 0
    outcome: Outcome | None = Outcome.COLLISION if collides(true_pose, scn.obstacles, scn.robot_radius) else None

    while True:
        measured = apply_localization_noise(true_pose, scn.noise, loc_rng)
        t = k * scn.dt
        if outcome is None:
            state = controller.advance_waypoint(state, scn.plan, measured, scn.criteria)
            done = controller.is_done(state, scn.plan, measured, scn.criteria)
            if done is RunStatus.SUCCESS:
                outcome = Outcome.SUCCESS
            elif done is RunStatus.TIMEOUT:
                outcome = Outcome.TIMEOUT
        if outcome is not None:
            rows.append(LogRow(t, None, None, true_pose, measured, 0.0, outcome.value, state.current_waypoint_index))
            break

        index = state.current_waypoint_index
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", InfeasibleStart)
                u, result, state = controller.step(state, spec, measured, scn.plan, config)
            status, solve_time = result.status.value, result.solve_time
        except (ValueError, ArithmeticError) as exc:
            logger.warning("solver failed at t=%.3f: %s", t, exc)
            u, status, solve_time = Control(0.0, 0.0), f"error: {exc}", 0.0
            state = ControllerState(index, state.last_solution, (k + 1) * scn.dt, state.steps + 1)
        applied = apply_control_noise(u, scn.noise, control_rng, scn.bounds)
        rows.append(LogRow(t, u, applied, true_pose, measured, solve_time, status, index))
        true_pose = euler_step(true_pose, applied, params)
        k += 1
        if collides(true_pose, scn.obstacles, scn.robot_radius):
            outcome = Outcome.COLLISION

    return TrajectoryLog(scn.name, scn.dt, tuple(rows), outcome)
