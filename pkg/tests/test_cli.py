import csv
import math
from pathlib import Path

import pytest

from shootnmpc.cli import main, run_sweep, sweep_jobs
from shootnmpc.scenario_io import (
    ConfigError,
    bundled_path,
    dump_scenario,
    load_scenario,
    load_sweep,
    parse_scenario,
    parse_sweep,
)
from shootnmpc.sim import Outcome

SCENARIOS = ["obstacle_free_straight.yaml", "obstacle_course.yaml", "corridor_route.yaml", "obstacle_route.yaml"]
SWEEPS = ["obstacle_free_grid.yaml", "obstacle_grid.yaml"]
TIMING = {"solve_time_s", "max_solve_time_s", "worst_max_solve_time_s"}

BASE = """\
name: tiny
start: {x_m: 0.0, y_m: 0.0, theta_rad: 0.0}
waypoints:
  - {x_m: 1.0, y_m: 0.0, theta_rad: 0.0}
dt_s: 0.5
horizon_steps: 5
"""


def read_masked(path: Path):
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: ("*" if k in TIMING else v) for k, v in row.items()} for row in rows]


def write(tmp_path, text, name="scn.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenarios_round_trip(name):
    scn = load_scenario(bundled_path(name))
    assert parse_scenario(dump_scenario(scn)) == scn


@pytest.mark.parametrize("name", SWEEPS)
def test_bundled_sweeps_parse(name):
    sweep = load_sweep(bundled_path(name))
    assert sweep.dt_values and sweep.horizon_values and sweep.trials_per_cell >= 1


def test_heading_sigma_defaults_to_twice_position_sigma():
    scn = parse_scenario(BASE + "noise: {localization_sigma_m: 0.03}\n")
    assert scn.noise.heading_sigma == pytest.approx(0.06)


@pytest.mark.parametrize(
    "extra, key, line",
    [
        ("criteria: {pos_tol_m: -1.0}\n", "criteria.pos_tol_m", 7),
        ("bounds: {v_min_mps: 0.2}\n", "bounds", 7),
        ("criteria: {pos_tol_m: abc}\n", "criteria.pos_tol_m", 7),
        ("obstacles:\n  - {x_m: 1.0, y_m: 0.0}\n", "obstacles.0.radius_m", 8),
    ],
)
def test_config_errors_name_key_and_line(extra, key, line):
    with pytest.raises(ConfigError) as err:
        parse_scenario(BASE + extra, "scn.yaml")
    msg = str(err.value)
    assert msg.startswith(f"scn.yaml:{line}:")
    assert key in msg


def test_negative_dt_exit_code(tmp_path, capsys):
    p = write(tmp_path, BASE.replace("dt_s: 0.5", "dt_s: -0.5"))
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "dt_s" in err and "positive" in err


def test_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 1


def test_run_bundled_straight_succeeds(tmp_path):
    assert main(["run", str(bundled_path("obstacle_free_straight.yaml")), "--out", str(tmp_path)]) == 0
    for suffix in ("_log.csv", "_metrics.csv", "_traj.svg"):
        assert (tmp_path / f"obstacle_free_straight{suffix}").exists()
    rows = read_masked(tmp_path / "obstacle_free_straight_log.csv")
    assert rows[0]["t_s"] == "0.0" and rows[-1]["cmd_v_mps"] == ""


def test_start_inside_obstacle_exit_code(tmp_path):
    p = write(tmp_path, BASE + "obstacles:\n  - {x_m: 0.0, y_m: 0.0, radius_m: 0.5}\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 3


def test_timeout_exit_code(tmp_path):
    p = write(tmp_path, BASE.replace("x_m: 1.0", "x_m: 9.0") + "criteria: {max_time_s: 1.0}\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 2


def test_run_outputs_are_byte_stable(tmp_path):
    scn = bundled_path("obstacle_course.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", str(scn), "--out", str(a), "--seed", "4"])
    main(["run", str(scn), "--out", str(b), "--seed", "4"])
    for name in ("obstacle_course_log.csv", "obstacle_course_metrics.csv"):
        assert read_masked(a / name) == read_masked(b / name)
    assert (a / "obstacle_course_traj.svg").read_bytes() == (b / "obstacle_course_traj.svg").read_bytes()


SWEEP = """\
name: mini
base:
  name: mini
  start: {x_m: 0.0, y_m: 0.0, theta_rad: 0.0}
  waypoints:
    - {x_m: 1.0, y_m: 0.5, theta_rad: 0.0}
  noise: {control_noise_frac: 0.1, localization_sigma_m: 0.02}
  dt_s: 0.5
  horizon_steps: 5
dt_values_s: [0.5, 0.2]
horizon_values: [8, 4]
trials_per_cell: 3
seeds: [11, 12, 13]
"""


def test_sweep_rows_sorted_and_aggregated(tmp_path):
    p = write(tmp_path, SWEEP, "sweep.yaml")
    assert main(["sweep", str(p), "--out", str(tmp_path)]) == 0
    rows = read_masked(tmp_path / "sweep.csv")
    header = list(rows[0])
    assert header[:7] == ["dt", "N", "total_time_s", "max_solve_time_s", "euclidean_error_m",
                          "rotation_error_rad", "outcome"]
    keys = [(float(r["dt"]), int(r["N"]), int(r["trial"])) for r in rows]
    assert keys == sorted(keys) and len(keys) == 12
    assert [r["seed"] for r in rows[:3]] == ["11", "12", "13"]
    summary = read_masked(tmp_path / "sweep_summary.csv")
    assert len(summary) == 4
    first = summary[0]
    trial_errors = [float(r["euclidean_error_m"]) for r in rows[:3]]
    assert float(first["euclidean_error_m"]) == pytest.approx(math.fsum(trial_errors) / 3, rel=1e-15)
    assert float(first["worst_euclidean_error_m"]) == max(trial_errors)


def test_parallel_sweep_matches_serial(tmp_path):
    sweep = parse_sweep(SWEEP)
    serial = run_sweep(sweep, 1)
    parallel = run_sweep(sweep, 2)
    strip = lambda rows: [(r.dt, r.N, r.trial, r.total_time, r.euclidean_error, r.rotation_error, r.outcome)
                          for r in rows]
    assert strip(serial) == strip(parallel)


def test_sweep_targets_expand_jobs():
    sweep = load_sweep(bundled_path("obstacle_free_grid.yaml"))
    jobs = sweep_jobs(sweep)
    assert len(jobs) == 4 * 5 * 3
    assert {job[0].plan.final.y for job in jobs} == {1.5, 0.0, -1.5}


def test_sweep_bad_file(tmp_path):
    p = write(tmp_path, SWEEP.replace("trials_per_cell: 3", "trials_per_cell: 0"), "bad.yaml")
    assert main(["sweep", str(p), "--out", str(tmp_path)]) == 1


def test_waypoints_single_waypoint_like_run(tmp_path):
    p = write(tmp_path, BASE)
    assert main(["waypoints", str(p), "--out", str(tmp_path / "w"), "--trials", "1"]) == 0
    assert main(["run", str(p), "--out", str(tmp_path / "r")]) == 0
    assert read_masked(tmp_path / "w" / "tiny_log.csv") == read_masked(tmp_path / "r" / "tiny_log.csv")
    rows = read_masked(tmp_path / "w" / "waypoint_metrics.csv")
    assert [r["trial"] for r in rows] == ["1", "average"]


def test_waypoints_obstacle_route_reports_obstacle_distance(tmp_path):
    code = main(["waypoints", str(bundled_path("obstacle_route.yaml")), "--out", str(tmp_path)])
    rows = read_masked(tmp_path / "waypoint_metrics.csv")
    assert [r["trial"] for r in rows] == ["1", "2", "3", "average"]
    assert all(r["min_obstacle_distance_m"] != "" for r in rows)
    mins = [float(r["min_obstacle_distance_m"]) for r in rows[:3]]
    assert float(rows[3]["min_obstacle_distance_m"]) == pytest.approx(sum(mins) / 3)
    assert code == {"success": 0, "timeout": 2, "collision": 3}[rows[3]["outcome"]]
    assert (tmp_path / "obstacle_route_trial2_log.csv").exists()
    assert (tmp_path / "obstacle_route_traj.svg").exists()


def test_exit_codes_cover_every_outcome():
    from shootnmpc.cli import EXIT_CODES

    assert set(EXIT_CODES) == set(Outcome)
    assert sorted(EXIT_CODES.values()) == [0, 2, 3]
