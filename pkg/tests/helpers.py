"""Independent reference implementations and random instance builders used by the tests."""

from __future__ import annotations

import math

import numpy as np

from shootnmpc.model import Control, ControlBounds, ModelParams, Pose, euler_step
from shootnmpc.ocp import Obstacle, OcpSpec, Reference, Weights, stage_cost

DEFAULT_WEIGHTS = Weights((1.0, 5.0, 0.1), (0.5, 0.05))


def reference_objective(spec: OcpSpec, x0: Pose, W: np.ndarray, mu: float) -> float:
    """Plain-Python penalized objective built only from euler_step and stage_cost."""
    x = Pose(*x0)
    states = [x]
    total = 0.0
    for k in range(spec.horizon):
        u = Control(float(W[k, 0]), float(W[k, 1]))
        total += stage_cost(x, u, spec.reference, spec.weights)
        x = euler_step(x, u, spec.params)
        states.append(x)
    keep = spec.robot_radius + spec.safety_margin
    for s in states:
        for ob in spec.obstacles:
            g = keep + ob.radius - math.hypot(s.x - ob.center[0], s.y - ob.center[1])
            if g > 0:
                total += mu * g * g
    return total


def random_spec(rng: np.random.Generator, horizon: int, n_obstacles: int = 0, dt: float | None = None) -> OcpSpec:
    obstacles = tuple(
        Obstacle((float(rng.uniform(-1, 2)), float(rng.uniform(-1.5, 1.5))), float(rng.uniform(0.05, 0.3)))
        for _ in range(n_obstacles)
    )
    target = Pose(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-math.pi, math.pi)))
    return OcpSpec(
        horizon=horizon,
        params=ModelParams(float(rng.choice([0.1, 0.2, 0.5])) if dt is None else dt),
        bounds=ControlBounds(),
        weights=DEFAULT_WEIGHTS,
        reference=Reference(target),
        obstacles=obstacles,
    )


def random_controls(rng: np.random.Generator, spec: OcpSpec) -> np.ndarray:
    b = spec.bounds
    return np.column_stack([
        rng.uniform(b.v_min, b.v_max, spec.horizon),
        rng.uniform(b.omega_min, b.omega_max, spec.horizon),
    ])


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> Pose:
    return Pose(float(rng.uniform(-scale, scale)), float(rng.uniform(-scale, scale)),
                float(rng.uniform(-math.pi, math.pi)))


def extended_objective(spec: OcpSpec, x0: Pose, W: np.ndarray, mu: float) -> np.longdouble:
    """Same objective as ``reference_objective`` evaluated in extended precision.

    Central differences with h = 1e-6 lose roughly eps * f / h to round-off; the
    wider mantissa keeps that far below the gradient tolerance.
    """
    ld = np.longdouble
    two_pi = ld(2) * ld(np.pi)
    dt = ld(spec.params.dt)
    q = [ld(v) for v in spec.weights.q]
    r = [ld(v) for v in spec.weights.r]
    xr = [ld(v) for v in spec.reference.x_ref]
    ur = [ld(v) for v in spec.reference.u_ref]
    x, y, th = (ld(v) for v in x0)
    states = [(x, y)]
    total = ld(0)
    for k in range(spec.horizon):
        v, om = ld(W[k, 0]), ld(W[k, 1])
        e = np.remainder(th - xr[2] + ld(np.pi), two_pi) - ld(np.pi)
        total += (q[0] * (x - xr[0]) ** 2 + q[1] * (y - xr[1]) ** 2 + q[2] * e * e
                  + r[0] * (v - ur[0]) ** 2 + r[1] * (om - ur[1]) ** 2)
        x, y, th = x + dt * v * np.cos(th), y + dt * v * np.sin(th), th + dt * om
        states.append((x, y))
    keep = ld(spec.robot_radius) + ld(spec.safety_margin)
    for sx, sy in states:
        for ob in spec.obstacles:
            g = keep + ld(ob.radius) - np.sqrt((sx - ld(ob.center[0])) ** 2 + (sy - ld(ob.center[1])) ** 2)
            if g > 0:
                total += ld(mu) * g * g
    return total


def central_difference_extended(f, W: np.ndarray, h: float = 1e-6) -> np.ndarray:
    G = np.zeros(W.shape)
    for idx in np.ndindex(W.shape):
        Wp = W.astype(np.longdouble)
        Wm = W.astype(np.longdouble)
        Wp[idx] += np.longdouble(h)
        Wm[idx] -= np.longdouble(h)
        G[idx] = float((f(Wp) - f(Wm)) / (2 * np.longdouble(h)))
    return G
