"""Differential-drive (unicycle) kinematics and its Euler discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class Pose(NamedTuple):
    """Planar vehicle state. ``theta`` is kept unwrapped."""

    x: float
    y: float
    theta: float


class Control(NamedTuple):
    """Linear velocity ``v`` [m/s] and angular velocity ``omega`` [rad/s]."""

    v: float
    omega: float


@dataclass(frozen=True)
class ControlBounds:
    v_min: float = -0.6
    v_max: float = 0.6
    omega_min: float = -math.pi / 2
    omega_max: float = math.pi / 2

    def __post_init__(self) -> None:
        if not self.v_min <= self.v_max:
            raise ValueError("v_min must not exceed v_max")
        if not self.omega_min <= self.omega_max:
            raise ValueError("omega_min must not exceed omega_max")
        if not (self.v_min <= 0.0 <= self.v_max and self.omega_min <= 0.0 <= self.omega_max):
            raise ValueError("control bounds must contain zero (stopping must be feasible)")

    @property
    def lower(self) -> tuple[float, float]:
        return (self.v_min, self.omega_min)

    @property
    def upper(self) -> tuple[float, float]:
        return (self.v_max, self.omega_max)


@dataclass(frozen=True)
class ModelParams:
    dt: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive finite number, got {self.dt!r}")


def euler_step(state: Pose, u: Control, params: ModelParams) -> Pose:
    """Advance the pose by one sampling interval with the forward Euler rule.

    The heading is deliberately left unwrapped so that repeated rollouts stay
    smooth in the controls.
    """
    x, y, theta = state
    v, omega = u
    dt = params.dt
    return Pose(
        x + dt * v * math.cos(theta),
        y + dt * v * math.sin(theta),
        theta + dt * omega,
    )


def wrap_angle(a: float) -> float:
    """Map ``a`` to the interval (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    # remainder() rounds half to even, so both -pi and pi can come back.
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def clamp_control(u: Control, bounds: ControlBounds) -> Control:
    v = min(max(u[0], bounds.v_min), bounds.v_max)
    omega = min(max(u[1], bounds.omega_min), bounds.omega_max)
    return Control(v, omega)
