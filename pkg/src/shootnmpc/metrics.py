"""Performance measures computed from a trajectory log."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .controller import WaypointPlan, pose_errors
from .model import Pose
from .ocp import Obstacle
from .sim import Outcome, TrajectoryLog


@dataclass(frozen=True)
class RunMetrics:
    euclidean_position_error: float
    rotation_error: float
    max_trajectory_error: float
    avg_trajectory_error: float
    min_obstacle_distance: float | None
    total_time: float
    max_solve_time: float
    outcome: Outcome

    def as_row(self) -> dict:
        row = asdict(self)
        row["outcome"] = self.outcome.value
        return row


def final_pose_errors(log: TrajectoryLog, target: Pose) -> tuple[float, float]:
    if not log.rows:
        raise ValueError("empty log")
    return pose_errors(log.final_pose, target)


def polyline_vertices(plan: WaypointPlan, start: Pose | None = None) -> np.ndarray:
    """(x, y) vertices of the planned path with consecutive duplicates removed.

    The path begins at ``start`` when given. In-place rotations (same
    position, new heading) add no geometry.
    """
    pts: list[tuple[float, float]] = []
    poses = ([start] if start is not None else []) + list(plan.waypoints)
    for wp in poses:
        p = (wp[0], wp[1])
        if not pts or p != pts[-1]:
            pts.append(p)
    return np.array(pts, dtype=float)


def distances_to_polyline(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest point of the polyline."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    V = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if V.shape[0] == 1:
        return np.hypot(P[:, 0] - V[0, 0], P[:, 1] - V[0, 1])
    A = V[:-1]
    seg = V[1:] - A
    seg_len2 = np.einsum("ij,ij->i", seg, seg)
    rel = P[:, None, :] - A[None, :, :]
    # zero-length segments degenerate to their start point
    safe = np.where(seg_len2 > 0.0, seg_len2, 1.0)
    t = np.clip(np.einsum("kij,ij->ki", rel, seg) / safe[None, :], 0.0, 1.0)
    closest = A[None, :, :] + t[..., None] * seg[None, :, :]
    d = P[:, None, :] - closest
    return np.hypot(d[..., 0], d[..., 1]).min(axis=1)


def trajectory_errors(log: TrajectoryLog, plan: WaypointPlan) -> tuple[float, float]:
    """Max and mean distance of the logged true positions from the planned path,
    which runs from the initial pose through every waypoint."""
    d = distances_to_polyline(log.true_positions(), polyline_vertices(plan, log.rows[0].true_pose))
    return float(d.max()), float(d.mean())


def min_obstacle_distance(log: TrajectoryLog, obstacles: Sequence[Obstacle]) -> float:
    """Smallest center-to-center distance between the vehicle and any obstacle."""
    if not obstacles:
        raise ValueError("at least one obstacle is required")
    P = log.true_positions()
    C = np.array([ob.center for ob in obstacles], dtype=float)
    diff = P[:, None, :] - C[None, :, :]
    return float(np.hypot(diff[..., 0], diff[..., 1]).min())


def timing_stats(log: TrajectoryLog) -> tuple[float, float]:
    """Simulated time at termination and the slowest single solve."""
    if not log.rows:
        raise ValueError("empty log")
    return log.rows[-1].t, max(r.solve_time for r in log.rows)


def run_metrics(
    log: TrajectoryLog, plan: WaypointPlan, obstacles: Sequence[Obstacle] = ()
) -> RunMetrics:
    pos_err, rot_err = final_pose_errors(log, plan.final)
    max_err, avg_err = trajectory_errors(log, plan)
    total, max_solve = timing_stats(log)
    return RunMetrics(
        euclidean_position_error=pos_err,
        rotation_error=rot_err,
        max_trajectory_error=max_err,
        avg_trajectory_error=avg_err,
        min_obstacle_distance=min_obstacle_distance(log, obstacles) if obstacles else None,
        total_time=total,
        max_solve_time=max_solve,
        outcome=log.outcome,
    )


def mean_metrics(runs: Sequence[RunMetrics]) -> dict:
    """Column-wise mean of several runs; ``None`` entries are skipped."""
    if not runs:
        raise ValueError("no runs to average")
    out: dict = {}
    for key in ("euclidean_position_error", "rotation_error", "max_trajectory_error",
                "avg_trajectory_error", "min_obstacle_distance", "total_time", "max_solve_time"):
        values = [getattr(r, key) for r in runs if getattr(r, key) is not None]
        out[key] = math.fsum(values) / len(values) if values else None
    return out
