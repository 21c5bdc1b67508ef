"""Experiment harness: single runs, (dt, N) sweeps and waypoint routes.

Exit codes: 0 success, 1 configuration error, 2 timeout, 3 collision.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .controller import WaypointPlan
from .metrics import RunMetrics, mean_metrics, run_metrics
from .plotting import trajectory_svg
from .scenario_io import ConfigError, SweepSpec, load_scenario, load_sweep
from .sim import Outcome, Scenario, TrajectoryLog, run_scenario
from .solver import SolverConfig

logger = logging.getLogger(__name__)

EXIT_CODES = {Outcome.SUCCESS: 0, Outcome.TIMEOUT: 2, Outcome.COLLISION: 3}
EXIT_CONFIG = 1

LOG_COLUMNS = [
    "t_s", "cmd_v_mps", "cmd_omega_radps", "applied_v_mps", "applied_omega_radps",
    "true_x_m", "true_y_m", "true_theta_rad", "meas_x_m", "meas_y_m", "meas_theta_rad",
    "solve_time_s", "status",
]
METRIC_COLUMNS = [
    "scenario", "outcome", "euclidean_position_error_m", "rotation_error_rad",
    "max_trajectory_error_m", "avg_trajectory_error_m", "min_obstacle_distance_m",
    "total_time_s", "max_solve_time_s",
]
SWEEP_COLUMNS = [
    "dt", "N", "total_time_s", "max_solve_time_s", "euclidean_error_m", "rotation_error_rad",
    "outcome", "target", "trial", "seed",
    "pass_total_time", "pass_solve_time", "pass_position", "pass_rotation", "passed",
]
SUMMARY_COLUMNS = [
    "dt", "N", "total_time_s", "max_solve_time_s", "euclidean_error_m", "rotation_error_rad",
    "outcome", "worst_total_time_s", "worst_max_solve_time_s", "worst_euclidean_error_m",
    "worst_rotation_error_rad", "runs", "successes", "all_passed",
]
WAYPOINT_COLUMNS = [
    "trial", "seed", "euclidean_position_error_m", "rotation_error_rad",
    "max_trajectory_error_m", "avg_trajectory_error_m", "min_obstacle_distance_m", "outcome",
]


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _flag(b: bool) -> str:
    return "1" if b else "0"


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def log_rows(log: TrajectoryLog) -> list[dict]:
    rows = []
    for r in log.rows:
        cmd = r.commanded or (None, None)
        app = r.applied or (None, None)
        rows.append({
            "t_s": _num(r.t),
            "cmd_v_mps": _num(cmd[0]), "cmd_omega_radps": _num(cmd[1]),
            "applied_v_mps": _num(app[0]), "applied_omega_radps": _num(app[1]),
            "true_x_m": _num(r.true_pose[0]), "true_y_m": _num(r.true_pose[1]),
            "true_theta_rad": _num(r.true_pose[2]),
            "meas_x_m": _num(r.measured_pose[0]), "meas_y_m": _num(r.measured_pose[1]),
            "meas_theta_rad": _num(r.measured_pose[2]),
            "solve_time_s": _num(r.solve_time), "status": r.status,
        })
    return rows


def metrics_row(name: str, m: RunMetrics) -> dict:
    return {
        "scenario": name, "outcome": m.outcome.value,
        "euclidean_position_error_m": _num(m.euclidean_position_error),
        "rotation_error_rad": _num(m.rotation_error),
        "max_trajectory_error_m": _num(m.max_trajectory_error),
        "avg_trajectory_error_m": _num(m.avg_trajectory_error),
        "min_obstacle_distance_m": _num(m.min_obstacle_distance),
        "total_time_s": _num(m.total_time), "max_solve_time_s": _num(m.max_solve_time),
    }


def write_run_artifacts(scn: Scenario, log: TrajectoryLog, out_dir: Path, prefix: str) -> RunMetrics:
    m = run_metrics(log, scn.plan, scn.obstacles)
    _write_csv(out_dir / f"{prefix}_log.csv", LOG_COLUMNS, log_rows(log))
    _write_csv(out_dir / f"{prefix}_metrics.csv", METRIC_COLUMNS, [metrics_row(scn.name, m)])
    (out_dir / f"{prefix}_traj.svg").write_text(trajectory_svg(scn, [log]), encoding="utf-8")
    return m


def worst_outcome(outcomes: Sequence[Outcome]) -> Outcome:
    if Outcome.COLLISION in outcomes:
        return Outcome.COLLISION
    if Outcome.TIMEOUT in outcomes:
        return Outcome.TIMEOUT
    return Outcome.SUCCESS


def cmd_run(scenario_file: str | Path, seed: int | None = None, out_dir: str | Path = ".") -> int:
    try:
        scn = load_scenario(scenario_file)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if seed is not None:
        scn = replace(scn, noise=replace(scn.noise, seed=seed))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = run_scenario(scn, SolverConfig.for_sampling_time(scn.dt))
    m = write_run_artifacts(scn, log, out, scn.name)
    print(f"{scn.name}: {m.outcome.value}, position error {m.euclidean_position_error:.3f} m, "
          f"rotation error {m.rotation_error:.3f} rad, {m.total_time:.2f} s")
    return EXIT_CODES[log.outcome]


@dataclass(frozen=True)
class TableRow:
    dt: float
    N: int
    total_time: float
    max_solve_time: float
    euclidean_error: float
    rotation_error: float
    outcome: Outcome
    target: int
    trial: int
    seed: int
    pass_total_time: bool
    pass_solve_time: bool
    pass_position: bool
    pass_rotation: bool

    @property
    def passed(self) -> bool:
        return (self.outcome is Outcome.SUCCESS and self.pass_total_time and self.pass_solve_time
                and self.pass_position and self.pass_rotation)

    def as_csv(self) -> dict:
        return {
            "dt": _num(self.dt), "N": str(self.N),
            "total_time_s": _num(self.total_time), "max_solve_time_s": _num(self.max_solve_time),
            "euclidean_error_m": _num(self.euclidean_error),
            "rotation_error_rad": _num(self.rotation_error), "outcome": self.outcome.value,
            "target": str(self.target), "trial": str(self.trial), "seed": str(self.seed),
            "pass_total_time": _flag(self.pass_total_time),
            "pass_solve_time": _flag(self.pass_solve_time),
            "pass_position": _flag(self.pass_position),
            "pass_rotation": _flag(self.pass_rotation),
            "passed": _flag(self.passed),
        }


def table_row(scn: Scenario, log: TrajectoryLog, target: int, trial: int) -> TableRow:
    m = run_metrics(log, scn.plan, scn.obstacles)
    c = scn.criteria
    return TableRow(
        dt=scn.dt, N=scn.horizon, total_time=m.total_time, max_solve_time=m.max_solve_time,
        euclidean_error=m.euclidean_position_error, rotation_error=m.rotation_error,
        outcome=m.outcome, target=target, trial=trial, seed=scn.noise.seed,
        pass_total_time=m.outcome is not Outcome.TIMEOUT and m.total_time <= c.max_wall_time,
        pass_solve_time=m.max_solve_time < scn.dt,
        pass_position=m.euclidean_position_error <= c.pos_tol,
        pass_rotation=m.rotation_error <= c.rot_tol,
    )


def sweep_jobs(sweep: SweepSpec) -> list[tuple[Scenario, int, int]]:
    """Expand a sweep into (scenario, target index, trial) jobs in (dt, N, target, trial) order."""
    base = sweep.base
    targets = sweep.targets or (None,)
    jobs = []
    for dt in sweep.dt_values:
        for n in sweep.horizon_values:
            for ti, target in enumerate(targets):
                plan = base.plan if target is None else WaypointPlan((target,))
                for trial in range(sweep.trials_per_cell):
                    scn = replace(
                        base, dt=dt, horizon=n, plan=plan,
                        noise=replace(base.noise, seed=sweep.seeds[trial]),
                    )
                    jobs.append((scn, ti, trial))
    return jobs


def run_job(job: tuple[Scenario, int, int]) -> TableRow:
    scn, target, trial = job
    try:
        log = run_scenario(scn, SolverConfig.for_sampling_time(scn.dt))
    except Exception as exc:  # one bad cell must not abort the sweep
        logger.error("cell dt=%s N=%s target=%s trial=%s failed: %s", scn.dt, scn.horizon, target, trial, exc)
        nan = math.nan
        return TableRow(scn.dt, scn.horizon, nan, nan, nan, nan, Outcome.TIMEOUT,
                        target, trial, scn.noise.seed, False, False, False, False)
    return table_row(scn, log, target, trial)


def run_sweep(sweep: SweepSpec, parallelism: int = 1) -> list[TableRow]:
    jobs = sweep_jobs(sweep)
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(run_job, jobs))
    else:
        rows = [run_job(j) for j in jobs]
    return sorted(rows, key=lambda r: (r.dt, r.N, r.target, r.trial))


def summarize(rows: Sequence[TableRow]) -> list[dict]:
    """One aggregate row per (dt, N): means, worst cases and pass counts."""
    cells: dict[tuple[float, int], list[TableRow]] = {}
    for r in rows:
        cells.setdefault((r.dt, r.N), []).append(r)
    out = []
    for (dt, n), group in sorted(cells.items()):
        def mean(attr):
            return math.fsum(getattr(r, attr) for r in group) / len(group)

        def worst(attr):
            return max(getattr(r, attr) for r in group)

        successes = sum(r.outcome is Outcome.SUCCESS for r in group)
        out.append({
            "dt": _num(dt), "N": str(n),
            "total_time_s": _num(mean("total_time")),
            "max_solve_time_s": _num(mean("max_solve_time")),
            "euclidean_error_m": _num(mean("euclidean_error")),
            "rotation_error_rad": _num(mean("rotation_error")),
            "outcome": worst_outcome([r.outcome for r in group]).value,
            "worst_total_time_s": _num(worst("total_time")),
            "worst_max_solve_time_s": _num(worst("max_solve_time")),
            "worst_euclidean_error_m": _num(worst("euclidean_error")),
            "worst_rotation_error_rad": _num(worst("rotation_error")),
            "runs": str(len(group)), "successes": str(successes),
            "all_passed": _flag(all(r.passed for r in group)),
        })
    return out


def cmd_sweep(sweep_file: str | Path, out_dir: str | Path = ".", parallelism: int = 1) -> int:
    try:
        sweep = load_sweep(sweep_file)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(sweep, parallelism)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, [r.as_csv() for r in rows])
    summary = summarize(rows)
    _write_csv(out / "sweep_summary.csv", SUMMARY_COLUMNS, summary)
    for s in summary:
        print(f"dt={s['dt']:>5} N={s['N']:>3}  successes {s['successes']}/{s['runs']}  "
              f"all criteria {'pass' if s['all_passed'] == '1' else 'FAIL'}")
    return 0


def cmd_waypoints(scenario_file: str | Path, out_dir: str | Path = ".", trials: int = 3) -> int:
    try:
        scn = load_scenario(scenario_file)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, results, logs = [], [], []
    for i in range(trials):
        seed = scn.noise.seed + i
        trial_scn = replace(scn, noise=replace(scn.noise, seed=seed))
        log = run_scenario(trial_scn, SolverConfig.for_sampling_time(scn.dt))
        prefix = scn.name if trials == 1 else f"{scn.name}_trial{i + 1}"
        m = write_run_artifacts(trial_scn, log, out, prefix)
        logs.append(log)
        results.append(m)
        rows.append({
            "trial": str(i + 1), "seed": str(seed),
            "euclidean_position_error_m": _num(m.euclidean_position_error),
            "rotation_error_rad": _num(m.rotation_error),
            "max_trajectory_error_m": _num(m.max_trajectory_error),
            "avg_trajectory_error_m": _num(m.avg_trajectory_error),
            "min_obstacle_distance_m": _num(m.min_obstacle_distance),
            "outcome": m.outcome.value,
        })
    avg = mean_metrics(results)
    worst = worst_outcome([m.outcome for m in results])
    rows.append({
        "trial": "average", "seed": "",
        "euclidean_position_error_m": _num(avg["euclidean_position_error"]),
        "rotation_error_rad": _num(avg["rotation_error"]),
        "max_trajectory_error_m": _num(avg["max_trajectory_error"]),
        "avg_trajectory_error_m": _num(avg["avg_trajectory_error"]),
        "min_obstacle_distance_m": _num(avg["min_obstacle_distance"]),
        "outcome": worst.value,
    })
    _write_csv(out / "waypoint_metrics.csv", WAYPOINT_COLUMNS, rows)
    if trials > 1:
        (out / f"{scn.name}_traj.svg").write_text(trajectory_svg(scn, logs), encoding="utf-8")
    print(f"{scn.name}: {trials} trial(s), average position error "
          f"{avg['euclidean_position_error']:.3f} m, average trajectory error "
          f"{avg['avg_trajectory_error']:.3f} m, worst outcome {worst.value}")
    return EXIT_CODES[worst]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shootnmpc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario's noise seed")
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("sweep", help="run a (dt, N) parameter sweep")
    p.add_argument("sweepfile")
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("waypoints", help="run a waypoint route over several seeded trials")
    p.add_argument("scenario")
    p.add_argument("--out", default=".")
    p.add_argument("--trials", type=int, default=3)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.scenario, args.seed, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.sweepfile, args.out, args.jobs)
    return cmd_waypoints(args.scenario, args.out, args.trials)


if __name__ == "__main__":
    sys.exit(main())
