"""Scenario and sweep files: YAML with units spelled out in the key names.

Validation errors carry the file name and the line of the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .controller import TerminationCriteria, WaypointPlan
from .model import ControlBounds, Pose
from .ocp import Obstacle, Weights
from .sim import NoiseModel, Scenario


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<string>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SweepSpec:
    name: str
    base: Scenario
    dt_values: tuple[float, ...]
    horizon_values: tuple[int, ...]
    trials_per_cell: int = 1
    seeds: tuple[int, ...] = (0,)
    # Each target becomes its own single-waypoint run; empty means use the base plan.
    targets: tuple[Pose, ...] = ()

    def __post_init__(self) -> None:
        if not self.dt_values or not self.horizon_values:
            raise ValueError("dt_values and horizon_values must be nonempty")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be at least 1")
        if len(self.seeds) < self.trials_per_cell:
            raise ValueError("need one seed per trial")


class _Doc:
    """Plain Python data plus the source line of every mapping key."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.lines: dict[tuple, int] = {}
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", source,
                              mark.line + 1 if mark else None) from None
        if node is None:
            raise ConfigError("file is empty", source)
        self.data = self._convert(node, ())

    def _convert(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            out = {}
            for key_node, value_node in node.value:
                key = key_node.value
                self.lines[path + (key,)] = key_node.start_mark.line + 1
                out[key] = self._convert(value_node, path + (key,))
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(item, path + (i,)) for i, item in enumerate(node.value)]
        return _scalar(node)

    def error(self, path: tuple, message: str) -> ConfigError:
        line = None
        for cut in range(len(path), -1, -1):
            line = self.lines.get(tuple(path[:cut]))
            if line is not None:
                break
        label = ".".join(str(p) for p in path) or "<root>"
        return ConfigError(f"{label}: {message}", self.source, line)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


class _Reader:
    def __init__(self, doc: _Doc):
        self.doc = doc

    def get(self, mapping: dict, key: str, path: tuple, default: Any = ..., kind: str = "any"):
        if not isinstance(mapping, dict):
            raise self.doc.error(path, "expected a mapping")
        if key not in mapping:
            if default is ...:
                raise self.doc.error(path + (key,), "missing required key")
            return default
        value = mapping[key]
        p = path + (key,)
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise self.doc.error(p, f"expected a number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                raise self.doc.error(p, "must be finite")
        elif kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise self.doc.error(p, f"expected an integer, got {value!r}")
        elif kind == "str":
            if not isinstance(value, str):
                raise self.doc.error(p, f"expected a string, got {value!r}")
        elif kind == "list":
            if not isinstance(value, list):
                raise self.doc.error(p, "expected a list")
        return value

    def build(self, path: tuple, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except ValueError as exc:
            raise self.doc.error(path, str(exc)) from None

    def pose(self, m: dict, path: tuple) -> Pose:
        return Pose(
            self.get(m, "x_m", path, kind="float"),
            self.get(m, "y_m", path, kind="float"),
            self.get(m, "theta_rad", path, 0.0, kind="float"),
        )

    def positive(self, m: dict, key: str, path: tuple, default=..., kind="float", allow_zero=False):
        value = self.get(m, key, path, default, kind=kind)
        if value < 0 or (value == 0 and not allow_zero):
            rule = "nonnegative" if allow_zero else "positive"
            raise self.doc.error(path + (key,), f"must be {rule} (got {value!r})")
        return value


def _scenario_from(r: _Reader, m: dict, path: tuple) -> Scenario:
    name = r.get(m, "name", path, kind="str")
    start = r.pose(r.get(m, "start", path), path + ("start",))
    wps = r.get(m, "waypoints", path, kind="list")
    if not wps:
        raise r.doc.error(path + ("waypoints",), "at least one waypoint is required")
    plan = WaypointPlan(tuple(r.pose(wp, path + ("waypoints", i)) for i, wp in enumerate(wps)))
    obstacles = []
    for i, ob in enumerate(r.get(m, "obstacles", path, [], kind="list")):
        p = path + ("obstacles", i)
        center = (r.get(ob, "x_m", p, kind="float"), r.get(ob, "y_m", p, kind="float"))
        obstacles.append(Obstacle(center, r.positive(ob, "radius_m", p, allow_zero=True)))

    dt = r.positive(m, "dt_s", path)
    horizon = r.positive(m, "horizon_steps", path, kind="int")

    w = r.get(m, "weights", path, {})
    wp = path + ("weights",)
    weights = r.build(wp, Weights, tuple(r.get(w, "q", wp, Weights().q, kind="list")),
                      tuple(r.get(w, "r", wp, Weights().r, kind="list")))

    b = r.get(m, "bounds", path, {})
    bp = path + ("bounds",)
    d = ControlBounds()
    bounds = r.build(
        bp, ControlBounds,
        r.get(b, "v_min_mps", bp, d.v_min, kind="float"),
        r.get(b, "v_max_mps", bp, d.v_max, kind="float"),
        r.get(b, "omega_min_radps", bp, d.omega_min, kind="float"),
        r.get(b, "omega_max_radps", bp, d.omega_max, kind="float"),
    )

    n = r.get(m, "noise", path, {})
    np_ = path + ("noise",)
    loc = r.positive(n, "localization_sigma_m", np_, 0.0, allow_zero=True)
    noise = NoiseModel(
        r.positive(n, "control_noise_frac", np_, 0.0, allow_zero=True),
        loc,
        r.positive(n, "heading_sigma_rad", np_, 2.0 * loc, allow_zero=True),
        r.get(n, "seed", np_, 0, kind="int"),
    )

    c = r.get(m, "criteria", path, {})
    cp = path + ("criteria",)
    dc = TerminationCriteria()
    criteria = TerminationCriteria(
        r.positive(c, "pos_tol_m", cp, dc.pos_tol),
        r.positive(c, "rot_tol_rad", cp, dc.rot_tol),
        r.positive(c, "max_time_s", cp, dc.max_wall_time),
    )
    return r.build(
        path, Scenario,
        name=name, start=start, plan=plan, obstacles=tuple(obstacles),
        robot_radius=r.positive(m, "robot_radius_m", path, 0.15, allow_zero=True),
        safety_margin=r.positive(m, "safety_margin_m", path, 0.05, allow_zero=True),
        dt=dt, horizon=horizon, weights=weights, bounds=bounds, noise=noise, criteria=criteria,
    )


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    doc = _Doc(text, source)
    return _scenario_from(_Reader(doc), doc.data, ())


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_scenario(text, str(path))


def _pose_dict(p: Pose) -> dict:
    return {"x_m": p.x, "y_m": p.y, "theta_rad": p.theta}


def scenario_to_dict(scn: Scenario) -> dict:
    return {
        "name": scn.name,
        "start": _pose_dict(scn.start),
        "waypoints": [_pose_dict(wp) for wp in scn.plan.waypoints],
        "obstacles": [
            {"x_m": ob.center[0], "y_m": ob.center[1], "radius_m": ob.radius} for ob in scn.obstacles
        ],
        "robot_radius_m": scn.robot_radius,
        "safety_margin_m": scn.safety_margin,
        "dt_s": scn.dt,
        "horizon_steps": scn.horizon,
        "weights": {"q": list(scn.weights.q), "r": list(scn.weights.r)},
        "bounds": {
            "v_min_mps": scn.bounds.v_min,
            "v_max_mps": scn.bounds.v_max,
            "omega_min_radps": scn.bounds.omega_min,
            "omega_max_radps": scn.bounds.omega_max,
        },
        "noise": {
            "control_noise_frac": scn.noise.control_noise_frac,
            "localization_sigma_m": scn.noise.localization_sigma,
            "heading_sigma_rad": scn.noise.heading_sigma,
            "seed": scn.noise.seed,
        },
        "criteria": {
            "pos_tol_m": scn.criteria.pos_tol,
            "rot_tol_rad": scn.criteria.rot_tol,
            "max_time_s": scn.criteria.max_wall_time,
        },
    }


def dump_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scn), sort_keys=False)


def parse_sweep(text: str, source: str = "<string>", base_dir: Path | None = None) -> SweepSpec:
    doc = _Doc(text, source)
    r = _Reader(doc)
    m = doc.data
    name = r.get(m, "name", (), "sweep", kind="str")
    if "base_file" in m:
        rel = Path(r.get(m, "base_file", (), kind="str"))
        base = load_scenario((base_dir or Path(".")) / rel)
    else:
        base = _scenario_from(r, r.get(m, "base", ()), ("base",))
    dts = r.get(m, "dt_values_s", (), kind="list")
    for i, v in enumerate(dts):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise doc.error(("dt_values_s", i), f"dt must be positive (got {v!r})")
    horizons = r.get(m, "horizon_values", (), kind="list")
    for i, v in enumerate(horizons):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise doc.error(("horizon_values", i), f"horizon must be a positive integer (got {v!r})")
    trials = r.positive(m, "trials_per_cell", (), 1, kind="int")
    seeds = r.get(m, "seeds", (), list(range(trials)), kind="list")
    targets = tuple(
        r.pose(t, ("targets", i)) for i, t in enumerate(r.get(m, "targets", (), [], kind="list"))
    )
    return r.build(
        (), SweepSpec,
        name=name, base=base, dt_values=tuple(float(v) for v in dts),
        horizon_values=tuple(horizons), trials_per_cell=trials,
        seeds=tuple(int(s) for s in seeds), targets=targets,
    )


def load_sweep(path: str | Path) -> SweepSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_sweep(text, str(path), path.parent)


def bundled_path(name: str) -> Path:
    """Path of a scenario or sweep file shipped with the package."""
    return Path(__file__).parent / "scenarios" / name
