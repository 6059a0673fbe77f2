"""Closed-loop orchestration: planner -> controller -> plant -> filters.

One run is one logical thread of deterministic steps; everything observable
lands in a RunLog (arrays, one row per control step) from which metrics, CSV
logs and plots are derived.  The CSV layout is a versioned 27-column
contract, see CSV_HEADER.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .cinematography import parse_psl, shot_to_manifold
from .dynamics import (PlantState, plant_step, translation_matrices,
                       wrap_angle)
from .estimation import (KalmanState, LinearGaussianModel,
                         NumericalSingularityError, heading_residual,
                         kf_predict, kf_update, wrap_heading_state)
from .planning import PathSegment, builtin_trajectory, generate_reference
from .regulation import ConvergenceError, RegulatorSession, controller_step
from .scenario import Scenario

CSV_HEADER = ("t,px,py,pz,vx,vy,vz,c,px_hat,py_hat,pz_hat,c_hat,"
              "pr_x,pr_y,pr_z,cr,u_phi,u_theta,u_zdot,u_psidot,"
              "y1_1,y1_2,y1_3,y1_4,y1_5,y1_6,y2")


class SimulationAbort(RuntimeError):
    """Numerical failure mid-run; carries the step index and a state snapshot."""

    def __init__(self, message: str, step: int, snapshot: dict):
        super().__init__(f"{message} at step {step}; snapshot: {json.dumps(snapshot)}")
        self.step = step
        self.snapshot = snapshot


@dataclass(frozen=True)
class RunReport:
    """Tracking quality of one run, truth measured against the reference."""

    rms_pos_err: float
    max_pos_err: float
    rms_heading_err: float
    saturation_fraction: float
    steps: int
    wall_time: float

    def summary(self) -> str:
        return (f"steps={self.steps}  rms_pos={self.rms_pos_err:.4f} m  "
                f"max_pos={self.max_pos_err:.4f} m  "
                f"rms_heading={self.rms_heading_err:.4f} rad  "
                f"saturation={self.saturation_fraction:.3f}  "
                f"wall={self.wall_time:.2f} s")


@dataclass(eq=False)
class RunLog:
    """Column-oriented record of a run, one row per control step."""

    t: np.ndarray
    truth_translation: np.ndarray   # (N, 6) as (v, p)
    truth_course: np.ndarray
    est_translation: np.ndarray
    est_course: np.ndarray
    ref_velocity: np.ndarray
    ref_position: np.ndarray
    ref_course: np.ndarray
    command: np.ndarray             # (N, 4) saturated
    command_raw: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    innovation_translation: np.ndarray
    innovation_course: np.ndarray
    p1_diag: np.ndarray
    p2: np.ndarray

    def __len__(self) -> int:
        return self.t.size


def plan_reference(scenario: Scenario):
    """Build the reference stream the scenario describes."""
    if scenario.mode == "trajectory":
        return builtin_trajectory(scenario.payload["kind"],
                                  scenario.payload.get("params", {}),
                                  scenario.dt)
    if scenario.mode == "psl-transition":
        start_shot = parse_psl(scenario.payload["start"])
        end_shot = parse_psl(scenario.payload["end"])
        segment = PathSegment(shot_to_manifold(start_shot, scenario.tables),
                              shot_to_manifold(end_shot, scenario.tables),
                              float(scenario.payload["duration"]),
                              start_shot.subjects)
        return generate_reference(segment, scenario.tracks, scenario.steering,
                                  scenario.dt,
                                  hold=float(scenario.payload.get("hold", 0.0)))
    shot = parse_psl(scenario.payload["shot"])
    coords = shot_to_manifold(shot, scenario.tables)
    segment = PathSegment(coords, coords, float(scenario.payload["duration"]),
                          shot.subjects)
    return generate_reference(segment, scenario.tracks, scenario.steering,
                              scenario.dt)


def _snapshot(k, plant, kf1, kf2, ref) -> dict:
    return {
        "truth_translation": plant.translation.as_vector().tolist(),
        "truth_course": plant.heading.course,
        "estimate_translation": kf1.x.tolist(),
        "estimate_course": float(kf2.x[0]),
        "reference_position": ref.position.tolist(),
        "reference_course": ref.course,
        "step": k,
    }


def run_closed_loop(scenario: Scenario, steps: int | None = None,
                    realtime: bool = False) -> tuple[RunReport, RunLog]:
    """Execute one scenario and return its metrics and full step log.

    Per step: the planner reference is read, the heading command and the
    one-step-ahead heading prediction are formed, the regulator gains are
    rebuilt from that predicted heading (warm-started Riccati solve), the
    saturated command is applied to the noisy plant, and both Kalman filters
    absorb the new measurements.  The plant starts on the first reference
    sample unless the scenario pins an explicit initial state.
    """
    started = time.perf_counter()
    refs = plan_reference(scenario)
    total = len(refs) if steps is None else min(steps, len(refs))
    if total < 1:
        raise ValueError("nothing to simulate: zero steps requested")
    dt = scenario.dt
    noise = scenario.noise
    drone = scenario.drone

    if scenario.initial is not None:
        position = np.asarray(scenario.initial["position"], dtype=float)
        velocity = np.asarray(scenario.initial["velocity"], dtype=float)
        course = float(scenario.initial["heading"])
    else:
        position = refs[0].position
        velocity = refs[0].velocity
        course = refs[0].course
    plant = PlantState.initial(position, velocity, course, drone,
                               scenario.seed,
                               gain_scale=scenario.plant_gain_mismatch)

    y1, y2 = plant.measure(noise)
    kf1 = KalmanState.from_first_measurement(y1, noise.h1)
    kf2 = wrap_heading_state(
        KalmanState.from_first_measurement([y2], [[noise.h2]]))
    session = RegulatorSession(drone, scenario.weights, scenario.heading_cfg)
    heading_model = LinearGaussianModel(
        [[1.0]], [[drone.k_yaw_rate * dt]], [[1.0]], [[noise.f2]], [[noise.h2]])

    log = {name: [] for name in (
        "t", "truth_translation", "truth_course", "est_translation",
        "est_course", "ref_velocity", "ref_position", "ref_course",
        "command", "command_raw", "y1", "y2", "innovation_translation",
        "innovation_course", "p1_diag", "p2")}
    innovation1 = np.zeros(6)
    innovation2 = 0.0

    for k in range(total):
        ref = refs[k]
        c_est = float(kf2.x[0])
        # One-step heading prediction: the heading channel's gains do not
        # depend on the heading, so its command can be formed first and the
        # translation model built from the predicted course x2[k+1].
        u2 = min(1.0, max(-1.0, session.k2 * wrap_angle(ref.course - c_est)))
        c_pred = wrap_angle(c_est + drone.k_yaw_rate * dt * u2)
        try:
            gains = session.gains_for(c_pred, dt)
        except ConvergenceError as exc:
            raise SimulationAbort(f"Riccati solve failed ({exc})", k,
                                  _snapshot(k, plant, kf1, kf2, ref)) from exc
        command = controller_step(ref, kf1.x, c_est, gains)

        log["t"].append(k * dt)
        log["truth_translation"].append(plant.translation.as_vector())
        log["truth_course"].append(plant.heading.course)
        log["est_translation"].append(kf1.x.copy())
        log["est_course"].append(c_est)
        log["ref_velocity"].append(ref.velocity)
        log["ref_position"].append(ref.position)
        log["ref_course"].append(ref.course)
        log["command"].append([command.roll, command.pitch,
                               command.climb_rate, command.yaw_rate])
        log["command_raw"].append(list(command.raw))
        log["y1"].append(y1)
        log["y2"].append(y2)
        log["innovation_translation"].append(innovation1)
        log["innovation_course"].append(innovation2)
        log["p1_diag"].append(np.diag(kf1.p).copy())
        log["p2"].append(float(kf2.p[0, 0]))

        plant, y1, y2 = plant_step(plant, command, dt, noise)

        # The filters propagate through the model at the current heading
        # estimate x2[k], the course the plant actually held during the step.
        a1, b1 = translation_matrices(dt, c_est, drone)
        model1 = LinearGaussianModel(a1, b1, np.eye(6), noise.f1, noise.h1)
        kf1 = kf_predict(kf1, model1, command.translation)
        innovation1 = y1 - kf1.x
        kf2 = kf_predict(kf2, heading_model, [command.yaw_rate])
        innovation2 = wrap_angle(y2 - float(kf2.x[0]))
        try:
            kf1, _ = kf_update(kf1, model1, y1, step=k + 1)
            kf2, _ = kf_update(kf2, heading_model, [y2],
                               residual=heading_residual, step=k + 1)
        except NumericalSingularityError as exc:
            raise SimulationAbort(f"Kalman update failed ({exc})", k,
                                  _snapshot(k, plant, kf1, kf2, ref)) from exc
        kf2 = wrap_heading_state(kf2)

        if realtime:
            elapsed = time.perf_counter() - started
            behind = (k + 1) * dt - elapsed
            if behind > 0:
                time.sleep(behind)

    run_log = RunLog(**{name: np.asarray(rows) for name, rows in log.items()})
    report = compute_metrics(run_log, wall_time=time.perf_counter() - started)
    return report, run_log


def compute_metrics(log: RunLog, wall_time: float = 0.0) -> RunReport:
    """Tracking metrics of a run: truth against reference, never the estimate."""
    if len(log) == 0:
        raise ValueError("cannot compute metrics of an empty log")
    pos_err = np.linalg.norm(log.truth_translation[:, 3:] - log.ref_position,
                             axis=1)
    heading_err = np.array([wrap_angle(c - cr) for c, cr
                            in zip(log.truth_course, log.ref_course)])
    saturated = np.abs(log.command_raw) > 1.0
    return RunReport(
        rms_pos_err=float(np.sqrt(np.mean(pos_err**2))),
        max_pos_err=float(pos_err.max()),
        rms_heading_err=float(np.sqrt(np.mean(heading_err**2))),
        saturation_fraction=float(saturated.mean()),
        steps=len(log),
        wall_time=wall_time)


def _fmt(value: float) -> str:
    """Shortest decimal form that round-trips to the exact float."""
    return repr(float(value))


def emit_log(log: RunLog, path):
    """Write the 27-column CSV contract (full float precision)."""
    with open(path, "w", newline="") as handle:
        handle.write(CSV_HEADER + "\n")
        for i in range(len(log)):
            truth = log.truth_translation[i]
            row = ([log.t[i]]
                   + list(truth[3:]) + list(truth[:3]) + [log.truth_course[i]]
                   + list(log.est_translation[i][3:]) + [log.est_course[i]]
                   + list(log.ref_position[i]) + [log.ref_course[i]]
                   + list(log.command[i])
                   + list(log.y1[i]) + [log.y2[i]])
            handle.write(",".join(_fmt(value) for value in row) + "\n")


def load_log_csv(path) -> dict[str, np.ndarray]:
    """Reload an emitted CSV into named columns (exact float round-trip)."""
    with open(path) as handle:
        header = handle.readline().strip().split(",")
        rows = [[float(cell) for cell in line.strip().split(",")]
                for line in handle if line.strip()]
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def emit_plot_data(log: RunLog, out_dir):
    """Per-axis reference-vs-truth series as small CSV files."""
    from pathlib import Path
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    axes = {"x": 0, "y": 1, "z": 2}
    written = []
    for axis, idx in axes.items():
        path = out_dir / f"plot_{axis}.csv"
        with open(path, "w", newline="") as handle:
            handle.write("t,reference,truth\n")
            for i in range(len(log)):
                handle.write(f"{_fmt(log.t[i])},{_fmt(log.ref_position[i][idx])},"
                             f"{_fmt(log.truth_translation[i][3 + idx])}\n")
        written.append(path)
    path = out_dir / "plot_heading.csv"
    with open(path, "w", newline="") as handle:
        handle.write("t,reference,truth\n")
        for i in range(len(log)):
            handle.write(f"{_fmt(log.t[i])},{_fmt(log.ref_course[i])},"
                         f"{_fmt(log.truth_course[i])}\n")
    written.append(path)
    return written
