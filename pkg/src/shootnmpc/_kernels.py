"""Compiled inner loops for rollout, objective and adjoint gradient.

Arrays: ``x0`` (3,), ``W`` (N, 2), ``q`` (3,), ``r`` (2,), ``xref`` (3,),
``uref`` (2,), ``centers`` (M, 2), ``keep`` (M,) = keep-out distance per obstacle.
"""

import math
import time

import numpy as np
from numba import njit, objmode

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def wrap(a):
    return a - TWO_PI * math.floor((a + math.pi) / TWO_PI)


@njit(cache=True)
def rollout(x0, W, dt):
    n = W.shape[0]
    traj = np.empty((n + 1, 3))
    x, y, th = x0[0], x0[1], x0[2]
    traj[0, 0], traj[0, 1], traj[0, 2] = x, y, th
    for k in range(n):
        v = W[k, 0]
        x = x + dt * v * math.cos(th)
        y = y + dt * v * math.sin(th)
        th = th + dt * W[k, 1]
        traj[k + 1, 0], traj[k + 1, 1], traj[k + 1, 2] = x, y, th
    return traj


@njit(cache=True)
def tracking_cost(traj, W, q, r, xref, uref):
    total = 0.0
    for k in range(W.shape[0]):
        ex = traj[k, 0] - xref[0]
        ey = traj[k, 1] - xref[1]
        eth = wrap(traj[k, 2] - xref[2])
        ev = W[k, 0] - uref[0]
        ew = W[k, 1] - uref[1]
        total += q[0] * ex * ex + q[1] * ey * ey + q[2] * eth * eth + r[0] * ev * ev + r[1] * ew * ew
    return total


@njit(cache=True)
def penalty(traj, centers, keep):
    """Sum of squared hinge violations over all poses and obstacles."""
    total = 0.0
    for k in range(traj.shape[0]):
        for m in range(centers.shape[0]):
            h = keep[m] - math.hypot(traj[k, 0] - centers[m, 0], traj[k, 1] - centers[m, 1])
            if h > 0.0:
                total += h * h
    return total


@njit(cache=True)
def objective(x0, W, dt, q, r, xref, uref, centers, keep, mu):
    traj = rollout(x0, W, dt)
    value = tracking_cost(traj, W, q, r, xref, uref)
    if mu != 0.0 and centers.shape[0] > 0:
        value += mu * penalty(traj, centers, keep)
    return value


@njit(cache=True)
def objective_and_gradient(x0, W, dt, q, r, xref, uref, centers, keep, mu):
    n = W.shape[0]
    traj = rollout(x0, W, dt)
    value = tracking_cost(traj, W, q, r, xref, uref)

    # direct partials of the objective w.r.t. each state
    ds = np.zeros((n + 1, 3))
    for k in range(n):
        ds[k, 0] = 2.0 * q[0] * (traj[k, 0] - xref[0])
        ds[k, 1] = 2.0 * q[1] * (traj[k, 1] - xref[1])
        ds[k, 2] = 2.0 * q[2] * wrap(traj[k, 2] - xref[2])
    if mu != 0.0 and centers.shape[0] > 0:
        pen = 0.0
        for k in range(n + 1):
            for m in range(centers.shape[0]):
                dx = traj[k, 0] - centers[m, 0]
                dy = traj[k, 1] - centers[m, 1]
                d = math.hypot(dx, dy)
                h = keep[m] - d
                if h > 0.0:
                    pen += h * h
                    if d > 0.0:
                        c = -2.0 * mu * h / d
                        ds[k, 0] += c * dx
                        ds[k, 1] += c * dy
        value += mu * pen

    # backward adjoint sweep: lam holds dJ/dstate_{k+1} including all downstream effects
    grad = np.empty((n, 2))
    lx, ly, lth = ds[n, 0], ds[n, 1], ds[n, 2]
    for k in range(n - 1, -1, -1):
        th = traj[k, 2]
        c = math.cos(th)
        s = math.sin(th)
        grad[k, 0] = 2.0 * r[0] * (W[k, 0] - uref[0]) + dt * (c * lx + s * ly)
        grad[k, 1] = 2.0 * r[1] * (W[k, 1] - uref[1]) + dt * lth
        lth = ds[k, 2] + lth + dt * W[k, 0] * (c * ly - s * lx)
        lx = ds[k, 0] + lx
        ly = ds[k, 1] + ly
    return value, grad


CONVERGED = 0
ITERATION_LIMIT = 1
BUDGET_EXHAUSTED = 2
STEP_UNDERFLOW = 3


@njit(cache=True)
def _clock():
    with objmode(now="float64"):
        now = time.perf_counter()
    return now


@njit(cache=True)
def project(W, lo, hi):
    out = np.empty_like(W)
    for k in range(W.shape[0]):
        for j in range(2):
            out[k, j] = min(max(W[k, j], lo[j]), hi[j])
    return out


@njit(cache=True)
def projected_gradient_descent(
    x0, W, lo, hi, dt, q, r, xref, uref, centers, keep, mu,
    grad_tol, step_init, armijo_c, min_step, max_iters, deadline,
):
    """Inner loop at fixed ``mu``. Returns (W, f, iterations, stop_code)."""
    f, g = objective_and_gradient(x0, W, dt, q, r, xref, uref, centers, keep, mu)
    W_prev = W.copy()
    g_prev = g.copy()
    have_prev = False
    it = 0
    while it < max_iters:
        if _clock() >= deadline:
            return W, f, it, BUDGET_EXHAUSTED
        pg = 0.0
        for k in range(W.shape[0]):
            for j in range(2):
                d = W[k, j] - min(max(W[k, j] - g[k, j], lo[j]), hi[j])
                pg += d * d
        if math.sqrt(pg) <= grad_tol:
            return W, f, it, CONVERGED

        alpha = step_init
        if have_prev:
            ss = 0.0
            sy = 0.0
            for k in range(W.shape[0]):
                for j in range(2):
                    s = W[k, j] - W_prev[k, j]
                    ss += s * s
                    sy += s * (g[k, j] - g_prev[k, j])
            if sy > 0.0:
                alpha = min(max(ss / sy, 1e-10), 1e10)

        it += 1
        while True:
            W_new = project(W - alpha * g, lo, hi)
            decrease = 0.0
            for k in range(W.shape[0]):
                for j in range(2):
                    decrease += g[k, j] * (W_new[k, j] - W[k, j])
            f_new = objective(x0, W_new, dt, q, r, xref, uref, centers, keep, mu)
            if f_new <= f + armijo_c * decrease:
                break
            alpha *= 0.5
            if alpha < min_step:
                return W, f, it, STEP_UNDERFLOW
        W_prev = W
        g_prev = g
        W = W_new
        f, g = objective_and_gradient(x0, W, dt, q, r, xref, uref, centers, keep, mu)
        have_prev = True
    return W, f, it, ITERATION_LIMIT


@njit(cache=True)
def max_violation(x0, W, dt, centers, keep):
    traj = rollout(x0, W, dt)
    worst = 0.0
    for k in range(traj.shape[0]):
        for m in range(centers.shape[0]):
            h = keep[m] - math.hypot(traj[k, 0] - centers[m, 0], traj[k, 1] - centers[m, 1])
            if h > worst:
                worst = h
    return worst


@njit(cache=True)
def finalize(x0, W, W0, lo, hi, dt, q, r, xref, uref, centers, keep, mu):
    """Pick the better of W and W0 at ``mu`` after projection.

    Returns (W, objective, tracking cost, deepest keep-out violation >= 0).
    """
    W = project(W, lo, hi)
    W0 = project(W0, lo, hi)
    f = objective(x0, W, dt, q, r, xref, uref, centers, keep, mu)
    f0 = objective(x0, W0, dt, q, r, xref, uref, centers, keep, mu)
    if f0 < f:
        W = W0
        f = f0
    cost = tracking_cost(rollout(x0, W, dt), W, q, r, xref, uref)
    return W, f, cost, max_violation(x0, W, dt, centers, keep)


_warm = False


def warmup():
    """Load or compile every kernel once so that no solve pays for it on the clock."""
    global _warm
    if _warm:
        return
    x0 = np.zeros(3)
    W = np.zeros((2, 2))
    lo = np.array([-1.0, -1.0])
    hi = np.array([1.0, 1.0])
    args = (0.1, np.ones(3), np.ones(2), np.ones(3), np.zeros(2), np.zeros((1, 2)), np.ones(1))
    rollout(x0, W, 0.1)
    objective(x0, W, *args, 1.0)
    objective_and_gradient(x0, W, *args, 1.0)
    projected_gradient_descent(x0, W, lo, hi, *args, 1.0, 1e-4, 1.0, 1e-4, 1e-12, 5, math.inf)
    finalize(x0, W, W, lo, hi, *args, 1.0)
    max_violation(x0, W, 0.1, args[5], args[6])
    _warm = True
