"""Projected-gradient solver for the single-shooting problem.

Box bounds on the controls are handled by projection; obstacle keep-outs by
an exterior quadratic penalty whose weight grows geometrically between outer
rounds. Inner iterations use a Barzilai-Borwein trial step followed by Armijo
backtracking along the projection arc, so every accepted step decreases the
penalized objective.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .model import ControlBounds, Pose
from .ocp import (
    ControlSequence,
    ControlsLike,
    OcpSpec,
    controls_array,
    max_violation,
    penalized_objective,
    problem_arrays,
    total_cost,
    violation_matrix,
)

logger = logging.getLogger(__name__)

MIN_STEP = 1e-12
# Seconds held back from the budget for packaging the result after the last iteration.
TAIL_RESERVE = 2e-4
BRUTEFORCE_LIMIT = 10**7


class DimensionMismatch(ValueError):
    pass


class ProblemTooLarge(ValueError):
    pass


class InfeasibleStart(UserWarning):
    """The initial pose already sits inside a keep-out disc (beyond the margin)."""


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 4
    max_inner_iters: int = 2000
    mu_init: float = 10.0
    mu_growth: float = 10.0
    grad_tol: float = 1e-4
    step_init: float = 1.0
    armijo_c: float = 1e-4
    time_budget: float = 0.4
    # Escalation of mu stops early once every keep-out is respected to this depth [m].
    constraint_tol: float = 1e-4

    def __post_init__(self) -> None:
        positive = (
            "max_outer_iters", "max_inner_iters", "mu_init", "grad_tol",
            "step_init", "time_budget", "constraint_tol",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.mu_growth > 1:
            raise ValueError("mu_growth must exceed 1")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")

    @classmethod
    def for_sampling_time(cls, dt: float, **overrides) -> "SolverConfig":
        """Default config whose wall-clock budget is 80% of the sampling time."""
        overrides.setdefault("time_budget", 0.8 * dt)
        return cls(**overrides)

    @property
    def mu_final(self) -> float:
        return self.mu_init * self.mu_growth ** (self.max_outer_iters - 1)


@dataclass(frozen=True)
class SolveResult:
    w_opt: ControlSequence
    cost: float
    objective: float
    mu: float
    max_violation: float
    iterations: int
    solve_time: float
    status: SolveStatus
    infeasible_start: bool = False


def project_to_bounds(w: ControlsLike, bounds: ControlBounds) -> ControlSequence:
    return ControlSequence.from_array(_project(controls_array(w), bounds))


def _project(W: np.ndarray, bounds: ControlBounds) -> np.ndarray:
    return np.clip(W, bounds.lower, bounds.upper)


def _start_violation(spec: OcpSpec, x0: Pose) -> float:
    g = violation_matrix(spec, np.array([x0[:2]]))
    return float(g.max()) if g.size else -math.inf


def solve(
    spec: OcpSpec,
    x0: Pose,
    w_init: ControlsLike,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Minimize the penalized objective over the control sequence."""
    config = config or SolverConfig()
    _kernels.warmup()
    t_start = time.perf_counter()
    deadline = t_start + max(config.time_budget - TAIL_RESERVE, 0.0)
    x0 = Pose(*x0)
    W0 = controls_array(w_init)
    if W0.shape[0] != spec.horizon:
        raise DimensionMismatch(f"w_init has {W0.shape[0]} controls, horizon is {spec.horizon}")
    bounds = spec.bounds
    W0 = _project(W0, bounds)

    infeasible = _start_violation(spec, x0) > spec.safety_margin
    if infeasible:
        warnings.warn(f"start pose {tuple(x0)} lies inside an obstacle keep-out", InfeasibleStart, stacklevel=2)

    args = problem_arrays(spec)
    dt, centers, keep = args[0], args[5], args[6]
    lo = np.array(bounds.lower)
    hi = np.array(bounds.upper)
    x0_arr = np.array(x0, dtype=float)

    def descend(W, mu):
        return _kernels.projected_gradient_descent(
            x0_arr, W, lo, hi, *args, mu,
            config.grad_tol, config.step_init, config.armijo_c, MIN_STEP,
            config.max_inner_iters, deadline,
        )

    W = W0
    mu = config.mu_init
    iterations = 0
    status = SolveStatus.ITERATION_LIMIT
    for outer in range(config.max_outer_iters):
        W, f_opt, used, code = descend(W, mu)
        iterations += used
        if code == _kernels.BUDGET_EXHAUSTED:
            status = SolveStatus.BUDGET_EXHAUSTED
            break
        status = SolveStatus.ITERATION_LIMIT if code == _kernels.ITERATION_LIMIT else SolveStatus.CONVERGED
        if outer == config.max_outer_iters - 1:
            break
        if _kernels.max_violation(x0_arr, W, dt, centers, keep) <= config.constraint_tol:
            break
        mu *= config.mu_growth

    # Relaxing a warm start at small mu can drag it through an obstacle, and
    # escalation will not always pull it back. Also descend straight from the
    # warm start at the final weight and keep whichever ends lower.
    if mu > config.mu_init and status is not SolveStatus.BUDGET_EXHAUSTED:
        W_direct, f_direct, used, code = descend(W0, mu)
        iterations += used
        if code == _kernels.BUDGET_EXHAUSTED:
            status = SolveStatus.BUDGET_EXHAUSTED
        if f_direct < f_opt:
            W, f_opt = W_direct, f_direct
            if code != _kernels.BUDGET_EXHAUSTED:
                status = SolveStatus.ITERATION_LIMIT if code == _kernels.ITERATION_LIMIT else SolveStatus.CONVERGED

    # Never hand back something worse than w_init at the final weight.
    W, f_opt, cost, worst = _kernels.finalize(x0_arr, W, W0, lo, hi, *args, mu)
    result = SolveResult(
        w_opt=ControlSequence.from_array(W),
        cost=cost,
        objective=f_opt,
        mu=mu,
        max_violation=worst,
        iterations=iterations,
        solve_time=time.perf_counter() - t_start,
        status=status,
        infeasible_start=infeasible,
    )
    logger.debug("solve: %s after %d iterations, objective %.6g", status.value, iterations, f_opt)
    return result


def _batch_objective(spec: OcpSpec, x0: Pose, Ws: np.ndarray, mu: float) -> np.ndarray:
    """Penalized objective for a batch of control sequences, shape (B, N, 2)."""
    dt = spec.params.dt
    q, r = spec.weights.q, spec.weights.r
    xr, ur = spec.reference.x_ref, spec.reference.u_ref
    B, n, _ = Ws.shape
    theta = np.empty((B, n + 1))
    theta[:, 0] = x0[2]
    theta[:, 1:] = x0[2] + np.cumsum(dt * Ws[:, :, 1], axis=1)
    step = dt * Ws[:, :, 0]
    xs = np.empty((B, n + 1))
    ys = np.empty((B, n + 1))
    xs[:, 0], ys[:, 0] = x0[0], x0[1]
    xs[:, 1:] = x0[0] + np.cumsum(step * np.cos(theta[:, :-1]), axis=1)
    ys[:, 1:] = x0[1] + np.cumsum(step * np.sin(theta[:, :-1]), axis=1)
    eth = np.remainder(theta[:, :-1] - xr[2] + np.pi, 2 * np.pi) - np.pi
    value = (
        q[0] * np.sum((xs[:, :-1] - xr[0]) ** 2, axis=1)
        + q[1] * np.sum((ys[:, :-1] - xr[1]) ** 2, axis=1)
        + q[2] * np.sum(eth**2, axis=1)
        + r[0] * np.sum((Ws[:, :, 0] - ur[0]) ** 2, axis=1)
        + r[1] * np.sum((Ws[:, :, 1] - ur[1]) ** 2, axis=1)
    )
    if spec.obstacles and mu != 0:
        for (cx, cy), keep in zip(spec.obstacle_centers(), spec.keep_out()):
            h = np.maximum(keep - np.hypot(xs - cx, ys - cy), 0.0)
            value = value + mu * np.sum(h * h, axis=1)
    return value


def control_grid(bounds: ControlBounds, levels: int) -> np.ndarray:
    """All (v, omega) pairs of a ``levels`` x ``levels`` grid spanning the box."""
    vs = np.linspace(bounds.v_min, bounds.v_max, levels)
    ws = np.linspace(bounds.omega_min, bounds.omega_max, levels)
    return np.array([(v, w) for v in vs for w in ws])


def solve_bruteforce(
    spec: OcpSpec,
    x0: Pose,
    levels: int = 21,
    mu: float | None = None,
    chunk: int = 65536,
) -> SolveResult:
    """Exhaustive search over a control grid; exponential in N, for checking only."""
    if levels < 2:
        raise ValueError("levels must be at least 2")
    n = spec.horizon
    count = levels ** (2 * n)
    if count > BRUTEFORCE_LIMIT:
        raise ProblemTooLarge(f"{count} grid points exceeds the limit of {BRUTEFORCE_LIMIT}")
    mu = SolverConfig().mu_final if mu is None else mu
    t_start = time.perf_counter()
    x0 = Pose(*x0)
    grid = control_grid(spec.bounds, levels)
    m = grid.shape[0]

    best_value = math.inf
    best_index = 0
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count))
        # decode idx into N base-m digits, most significant first
        digits = np.empty((idx.size, n), dtype=np.int64)
        rest = idx.copy()
        for k in range(n - 1, -1, -1):
            digits[:, k] = rest % m
            rest //= m
        values = _batch_objective(spec, x0, grid[digits], mu)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value = float(values[i])
            best_index = int(idx[i])

    digits = []
    rest = best_index
    for _ in range(n):
        digits.append(rest % m)
        rest //= m
    W = grid[digits[::-1]]
    return SolveResult(
        w_opt=ControlSequence.from_array(W),
        cost=total_cost(spec, x0, W),
        objective=penalized_objective(spec, x0, W, mu),
        mu=mu,
        max_violation=max_violation(spec, x0, W),
        iterations=count,
        solve_time=time.perf_counter() - t_start,
        status=SolveStatus.CONVERGED,
    )
