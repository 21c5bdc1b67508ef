"""Deterministic SVG rendering of a run: planned path, driven path, obstacles."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .metrics import polyline_vertices
from .sim import Scenario, TrajectoryLog

WIDTH = 640
PAD = 30


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def trajectory_svg(scn: Scenario, logs: Sequence[TrajectoryLog]) -> str:
    plan_xy = polyline_vertices(scn.plan)
    paths = [log.true_positions() for log in logs]
    pts = [plan_xy, np.array([scn.start[:2]])] + paths
    for ob in scn.obstacles:
        keep = scn.robot_radius + ob.radius + scn.safety_margin
        c = np.array(ob.center)
        pts.append(np.array([c - keep, c + keep]))
    allp = np.vstack(pts)
    lo = allp.min(axis=0) - 0.2
    hi = allp.max(axis=0) + 0.2
    span = max(hi[0] - lo[0], hi[1] - lo[1], 1e-9)
    scale = (WIDTH - 2 * PAD) / span
    height = int(round((hi[1] - lo[1]) * scale)) + 2 * PAD

    def px(p) -> tuple[str, str]:
        return _fmt(PAD + (p[0] - lo[0]) * scale), _fmt(height - PAD - (p[1] - lo[1]) * scale)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">',
        f"<title>{scn.name}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for ob in scn.obstacles:
        cx, cy = px(ob.center)
        keep = scn.robot_radius + ob.radius + scn.safety_margin
        out.append(f'<circle cx="{cx}" cy="{cy}" r="{_fmt(keep * scale)}" fill="none" '
                   'stroke="#d62728" stroke-dasharray="4 3"/>')
        out.append(f'<circle cx="{cx}" cy="{cy}" r="{_fmt(ob.radius * scale)}" fill="#7f7f7f"/>')
    plan_pts = " ".join(",".join(px(p)) for p in np.vstack([[scn.start[:2]], plan_xy]))
    out.append(f'<polyline points="{plan_pts}" fill="none" stroke="#2ca02c" '
               'stroke-width="2" stroke-dasharray="6 4"/>')
    colors = ("#1f77b4", "#ff7f0e", "#9467bd", "#8c564b")
    for i, path in enumerate(paths):
        pts_s = " ".join(",".join(px(p)) for p in path)
        out.append(f'<polyline points="{pts_s}" fill="none" stroke="{colors[i % len(colors)]}" '
                   'stroke-width="1.5"/>')
    for wp in scn.plan.waypoints:
        x, y = px(wp)
        out.append(f'<circle cx="{x}" cy="{y}" r="4" fill="#2ca02c"/>')
    x, y = px(scn.start)
    out.append(f'<rect x="{_fmt(float(x) - 4)}" y="{_fmt(float(y) - 4)}" width="8" height="8" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
