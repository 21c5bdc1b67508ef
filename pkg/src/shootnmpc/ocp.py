"""Finite-horizon tracking problem in single-shooting form.

The only decision variables are the controls ``w = [u_0, ..., u_{N-1}]``;
states follow from a forward Euler rollout. Path constraints are circular
keep-out discs around obstacles, enforced through an exterior squared-hinge
penalty. Gradients come from a discrete adjoint sweep through the rollout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from . import _kernels
from .model import Control, ControlBounds, ModelParams, Pose, euler_step, wrap_angle

DEFAULT_Q = (1.0, 5.0, 0.1)
DEFAULT_R = (0.5, 0.05)


@dataclass(frozen=True)
class Weights:
    """Diagonal entries of the state weight Q and control weight R."""

    q: tuple[float, float, float] = DEFAULT_Q
    r: tuple[float, float] = DEFAULT_R

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        if len(self.q) != 3 or len(self.r) != 2:
            raise ValueError("weights need 3 state entries and 2 control entries")
        if any(v < 0 or not math.isfinite(v) for v in self.q + self.r):
            raise ValueError("weights must be finite and nonnegative")
        if not any(v > 0 for v in self.q):
            raise ValueError("at least one state weight must be positive")


@dataclass(frozen=True)
class Reference:
    x_ref: Pose
    u_ref: Control = Control(0.0, 0.0)


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("obstacle center must be finite")
        if not self.radius >= 0:
            raise ValueError("obstacle radius must be nonnegative")


@dataclass(frozen=True)
class OcpSpec:
    horizon: int
    params: ModelParams
    bounds: ControlBounds = field(default_factory=ControlBounds)
    weights: Weights = field(default_factory=Weights)
    reference: Reference = Reference(Pose(0.0, 0.0, 0.0))
    obstacles: tuple[Obstacle, ...] = ()
    robot_radius: float = 0.15
    safety_margin: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.robot_radius < 0 or self.safety_margin < 0:
            raise ValueError("robot_radius and safety_margin must be nonnegative")

    def with_reference(self, x_ref: Pose, u_ref: Control | None = None) -> "OcpSpec":
        u = self.reference.u_ref if u_ref is None else u_ref
        return replace(self, reference=Reference(Pose(*x_ref), Control(*u)))

    def keep_out(self) -> np.ndarray:
        """Minimum allowed center distance to each obstacle."""
        return np.array(
            [self.robot_radius + ob.radius + self.safety_margin for ob in self.obstacles]
        )

    def obstacle_centers(self) -> np.ndarray:
        return np.array([ob.center for ob in self.obstacles], dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class ControlSequence(Sequence[Control]):
    """Decision variable of the shooting problem: N controls in order."""

    controls: tuple[Control, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", tuple(Control(*c) for c in self.controls))

    @classmethod
    def zeros(cls, n: int) -> "ControlSequence":
        return cls((Control(0.0, 0.0),) * n)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ControlSequence":
        arr = np.asarray(arr, dtype=float).reshape(-1, 2)
        return cls(tuple(Control(float(v), float(w)) for v, w in arr))

    def as_array(self) -> np.ndarray:
        return np.array(self.controls, dtype=float).reshape(-1, 2)

    def shifted(self) -> "ControlSequence":
        """Drop the first control and repeat the last one (receding-horizon warm start)."""
        if not self.controls:
            return self
        return ControlSequence(self.controls[1:] + self.controls[-1:])

    def __len__(self) -> int:
        return len(self.controls)

    def __getitem__(self, i):  # type: ignore[override]
        return self.controls[i]

    def __iter__(self) -> Iterator[Control]:
        return iter(self.controls)


ControlsLike = Union[ControlSequence, np.ndarray, Sequence[Sequence[float]]]


def controls_array(w: ControlsLike, horizon: int | None = None) -> np.ndarray:
    arr = w.as_array() if isinstance(w, ControlSequence) else np.asarray(w, dtype=float).reshape(-1, 2)
    if horizon is not None and arr.shape[0] != horizon:
        raise ValueError(f"control sequence has length {arr.shape[0]}, expected {horizon}")
    return arr


def problem_arrays(spec: OcpSpec) -> tuple:
    """Flatten ``spec`` into the positional array arguments of the kernels."""
    ref = spec.reference
    return (
        spec.params.dt,
        np.array(spec.weights.q),
        np.array(spec.weights.r),
        np.array(ref.x_ref, dtype=float),
        np.array(ref.u_ref, dtype=float),
        spec.obstacle_centers(),
        spec.keep_out(),
    )


def rollout_array(spec: OcpSpec, x0: Pose, w: ControlsLike) -> np.ndarray:
    """Forward Euler rollout as an (N+1, 3) array; row 0 is ``x0``."""
    W = controls_array(w, spec.horizon)
    return _kernels.rollout(np.array(x0, dtype=float), W, spec.params.dt)


def rollout(spec: OcpSpec, x0: Pose, w: ControlsLike) -> list[Pose]:
    return [Pose(*row) for row in rollout_array(spec, x0, w).tolist()]


def stage_cost(x: Pose, u: Control, ref: Reference, weights: Weights) -> float:
    """Weighted squared tracking error of one state/control pair."""
    q, r = weights.q, weights.r
    ex = x[0] - ref.x_ref[0]
    ey = x[1] - ref.x_ref[1]
    eth = wrap_angle(x[2] - ref.x_ref[2])
    ev = u[0] - ref.u_ref[0]
    ew = u[1] - ref.u_ref[1]
    return q[0] * ex * ex + q[1] * ey * ey + q[2] * eth * eth + r[0] * ev * ev + r[1] * ew * ew


def total_cost(spec: OcpSpec, x0: Pose, w: ControlsLike) -> float:
    """Sum of stage costs over k = 0..N-1; the terminal state carries no cost."""
    return penalized_objective(spec, x0, w, 0.0)


def violation_matrix(spec: OcpSpec, positions: np.ndarray) -> np.ndarray:
    """Constraint values g, shape (len(positions), n_obstacles); g > 0 is a violation."""
    P = np.asarray(positions, dtype=float)
    P = P.reshape(-1, P.shape[-1])[:, :2]
    if not spec.obstacles:
        return np.zeros((P.shape[0], 0))
    diff = P[:, None, :] - spec.obstacle_centers()[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return spec.keep_out()[None, :] - dist


def obstacle_violations(spec: OcpSpec, trajectory: Sequence[Pose]) -> list[float]:
    """One g value per (pose, obstacle), pose-major."""
    if len(trajectory) == 0:
        raise ValueError("trajectory must be nonempty")
    return violation_matrix(spec, np.asarray(trajectory, dtype=float)).ravel().tolist()


def max_violation(spec: OcpSpec, x0: Pose, w: ControlsLike) -> float:
    """Deepest keep-out intrusion along the rollout, 0 when all are respected."""
    g = violation_matrix(spec, rollout_array(spec, x0, w))
    return float(max(0.0, g.max())) if g.size else 0.0


def penalized_objective(spec: OcpSpec, x0: Pose, w: ControlsLike, mu: float) -> float:
    """Tracking cost plus ``mu`` times the squared keep-out violations."""
    W = controls_array(w, spec.horizon)
    return float(
        _kernels.objective(np.array(x0, dtype=float), W, *problem_arrays(spec), float(mu))
    )


def objective_and_gradient(
    spec: OcpSpec, x0: Pose, w: ControlsLike, mu: float
) -> tuple[float, np.ndarray]:
    """Penalized objective and its exact gradient w.r.t. the controls, shape (N, 2).

    One forward rollout, then one backward adjoint sweep, so the cost is O(N).
    """
    W = controls_array(w, spec.horizon)
    value, grad = _kernels.objective_and_gradient(
        np.array(x0, dtype=float), W, *problem_arrays(spec), float(mu)
    )
    return float(value), grad


def objective_gradient(spec: OcpSpec, x0: Pose, w: ControlsLike, mu: float) -> np.ndarray:
    return objective_and_gradient(spec, x0, w, mu)[1]


def euler_rollout_reference(spec: OcpSpec, x0: Pose, w: Iterable[Control]) -> list[Pose]:
    """Plain loop over ``euler_step``; kept as a slow cross-check of ``rollout``."""
    poses = [Pose(*x0)]
    for u in w:
        poses.append(euler_step(poses[-1], Control(*u), spec.params))
    return poses
