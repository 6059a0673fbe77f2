"""Scenario files: the versioned JSON contract driving closed-loop runs.

A scenario bundles every configurable quantity of a run: drone calibration,
noise covariances, regulator weights, steering limits, the reference mode and
its payload, actor tracks and the seed.  Unknown keys are rejected so typos
fail loudly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cinematography import MappingTables, parse_psl
from .dynamics import DroneGains, NoiseModel
from .planning import ActorTrack, SteeringConfig
from .regulation import HeadingRegulatorConfig, RegulatorWeights

SCHEMA_VERSION = 1

MODES = ("trajectory", "psl-transition", "framing-hold")


class ScenarioError(ValueError):
    """Scenario validation failure, naming the offending key."""


def _reject_unknown(mapping: dict, allowed: set, where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass(eq=False)
class Scenario:
    """Fully validated run configuration."""

    mode: str
    payload: dict
    drone: DroneGains = field(default_factory=DroneGains)
    noise: NoiseModel = field(default_factory=NoiseModel.zero)
    weights: RegulatorWeights = field(default_factory=RegulatorWeights.identity)
    q_scale: float = 1.0
    r_scale: float = 1.0
    heading_cfg: HeadingRegulatorConfig = field(default_factory=HeadingRegulatorConfig)
    steering: SteeringConfig = field(default_factory=SteeringConfig)
    tracks: dict = field(default_factory=dict)
    tables: MappingTables = field(default_factory=MappingTables)
    dt: float = 0.02
    seed: int = 0
    plant_gain_mismatch: float = 1.0
    initial: dict | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.dt > 0.0:
            raise ScenarioError(f"dt must be > 0, got {self.dt}")
        if not self.plant_gain_mismatch > 0.0:
            raise ScenarioError("plant_gain_mismatch must be > 0")
        self._validate_payload()

    def _validate_payload(self):
        payload = self.payload
        if self.mode == "trajectory":
            _reject_unknown(payload, {"kind", "params"}, "trajectory payload")
            if "kind" not in payload:
                raise ScenarioError("trajectory payload needs a 'kind'")
        elif self.mode == "psl-transition":
            _reject_unknown(payload, {"start", "end", "duration", "hold"},
                            "psl-transition payload")
            for key in ("start", "end", "duration"):
                if key not in payload:
                    raise ScenarioError(f"psl-transition payload needs {key!r}")
            self._check_shots(payload["start"], payload["end"])
        else:
            _reject_unknown(payload, {"shot", "duration"}, "framing-hold payload")
            for key in ("shot", "duration"):
                if key not in payload:
                    raise ScenarioError(f"framing-hold payload needs {key!r}")
            self._check_shots(payload["shot"])

    def _check_shots(self, *sentences: str):
        for sentence in sentences:
            shot = parse_psl(sentence)
            missing = [name for name in shot.subjects if name not in self.tracks]
            if missing:
                raise ScenarioError(
                    f"shot {sentence!r} references actor(s) {missing} with no track")


def _noise_from_dict(raw: dict) -> NoiseModel:
    allowed = {"process_velocity_std", "process_position_std",
               "measurement_velocity_std", "measurement_position_std",
               "process_heading_std", "measurement_heading_std",
               "f1", "h1", "f2", "h2"}
    _reject_unknown(raw, allowed, "noise")
    if "f1" in raw or "h1" in raw:
        for key in ("f1", "h1", "f2", "h2"):
            if key not in raw:
                raise ScenarioError(f"matrix noise form needs {key!r}")
        return NoiseModel(np.asarray(raw["f1"], dtype=float),
                          np.asarray(raw["h1"], dtype=float),
                          float(raw["f2"]), float(raw["h2"]))
    return NoiseModel.from_stddevs(
        process_velocity=float(raw.get("process_velocity_std", 0.0)),
        process_position=float(raw.get("process_position_std", 0.0)),
        measurement_velocity=float(raw.get("measurement_velocity_std", 0.0)),
        measurement_position=float(raw.get("measurement_position_std", 0.0)),
        process_heading=float(raw.get("process_heading_std", 0.0)),
        measurement_heading=float(raw.get("measurement_heading_std", 0.0)))


def _drone_from_dict(raw: dict) -> DroneGains:
    allowed = {"k_roll", "k_pitch", "k_climb", "tau_roll", "tau_pitch",
               "tau_climb", "k_yaw_rate"}
    _reject_unknown(raw, allowed, "drone")
    return DroneGains(**{key: float(value) for key, value in raw.items()})


def _tracks_from_list(raw: list) -> dict[str, ActorTrack]:
    tracks = {}
    for entry in raw:
        _reject_unknown(entry, {"name", "height", "track"}, "actor entry")
        for key in ("name", "track"):
            if key not in entry:
                raise ScenarioError(f"actor entry needs {key!r}")
        keyframes = []
        for frame in entry["track"]:
            _reject_unknown(frame, {"t", "position", "facing"},
                            f"track of actor {entry['name']!r}")
            keyframes.append((float(frame["t"]),
                              np.asarray(frame["position"], dtype=float),
                              float(frame.get("facing", 0.0))))
        name = entry["name"]
        if name in tracks:
            raise ScenarioError(f"duplicate actor {name!r}")
        tracks[name] = ActorTrack(name, float(entry.get("height", 1.7)),
                                  tuple(keyframes))
    return tracks


def scenario_from_dict(raw: dict, where: str = "<dict>") -> Scenario:
    """Validate a raw mapping into a Scenario, applying all defaults."""
    allowed = {"schema", "mode", "trajectory", "transition", "framing",
               "drone", "noise", "weights", "heading_control", "steering",
               "actors", "tables", "dt", "seed", "plant_gain_mismatch",
               "initial"}
    _reject_unknown(raw, allowed, where)
    if raw.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(
            f"{where}: schema must be {SCHEMA_VERSION}, got {raw.get('schema')!r}")
    if "mode" not in raw:
        raise ScenarioError(f"{where}: missing 'mode'")
    mode = raw["mode"]
    payload_key = {"trajectory": "trajectory", "psl-transition": "transition",
                   "framing-hold": "framing"}.get(mode)
    if payload_key is None:
        raise ScenarioError(f"unknown mode {mode!r}; expected one of {MODES}")
    if payload_key not in raw:
        raise ScenarioError(f"mode {mode!r} needs a {payload_key!r} section")
    for key in ("trajectory", "transition", "framing"):
        if key != payload_key and key in raw:
            raise ScenarioError(f"section {key!r} does not belong to mode {mode!r}")

    weights_raw = raw.get("weights", {})
    _reject_unknown(weights_raw, {"q_scale", "r_scale"}, "weights")
    q_scale = float(weights_raw.get("q_scale", 1.0))
    r_scale = float(weights_raw.get("r_scale", 1.0))

    heading_raw = raw.get("heading_control", {})
    _reject_unknown(heading_raw, {"gamma", "tau", "mode"}, "heading_control")
    dt = float(raw.get("dt", 0.02))
    heading_cfg = HeadingRegulatorConfig(
        gamma=float(heading_raw.get("gamma", 0.1)),
        tau_att=float(heading_raw.get("tau", 1.0)),
        mean_dt=dt,
        mode=heading_raw.get("mode", "pole-placement"))

    steering_raw = raw.get("steering", {})
    _reject_unknown(steering_raw, {"max_speed", "max_accel", "slow_radius",
                                   "heading_rate_limit"}, "steering")
    steering = SteeringConfig(**{key: float(value)
                                 for key, value in steering_raw.items()})

    tables_raw = raw.get("tables", {})
    _reject_unknown(tables_raw, {"radius", "alpha", "elevation"}, "tables")
    tables = MappingTables().override(
        radius=tables_raw.get("radius"), alpha=tables_raw.get("alpha"),
        elevation=tables_raw.get("elevation"))

    initial = raw.get("initial")
    if initial is not None:
        _reject_unknown(initial, {"position", "velocity", "heading"}, "initial")
        initial = {"position": list(map(float, initial.get("position", (0, 0, 0)))),
                   "velocity": list(map(float, initial.get("velocity", (0, 0, 0)))),
                   "heading": float(initial.get("heading", 0.0))}

    return Scenario(
        mode=mode,
        payload=dict(raw[payload_key]),
        drone=_drone_from_dict(raw.get("drone", {})),
        noise=_noise_from_dict(raw.get("noise", {})),
        weights=RegulatorWeights.identity(q_scale, r_scale),
        q_scale=q_scale,
        r_scale=r_scale,
        heading_cfg=heading_cfg,
        steering=steering,
        tracks=_tracks_from_list(raw.get("actors", [])),
        tables=tables,
        dt=dt,
        seed=int(raw.get("seed", 0)),
        plant_gain_mismatch=float(raw.get("plant_gain_mismatch", 1.0)),
        initial=initial)


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(raw, where=str(path))


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical JSON-safe form; load(scenario_to_dict(s)) == s structurally."""
    payload_key = {"trajectory": "trajectory", "psl-transition": "transition",
                   "framing-hold": "framing"}[scenario.mode]
    drone = scenario.drone
    noise = scenario.noise
    out = {
        "schema": SCHEMA_VERSION,
        "mode": scenario.mode,
        payload_key: scenario.payload,
        "dt": scenario.dt,
        "seed": scenario.seed,
        "plant_gain_mismatch": scenario.plant_gain_mismatch,
        "drone": {"k_roll": drone.k_roll, "k_pitch": drone.k_pitch,
                  "k_climb": drone.k_climb, "tau_roll": drone.tau_roll,
                  "tau_pitch": drone.tau_pitch, "tau_climb": drone.tau_climb,
                  "k_yaw_rate": drone.k_yaw_rate},
        "noise": {"f1": noise.f1.tolist(), "h1": noise.h1.tolist(),
                  "f2": noise.f2, "h2": noise.h2},
        "weights": {"q_scale": scenario.q_scale, "r_scale": scenario.r_scale},
        "heading_control": {"gamma": scenario.heading_cfg.gamma,
                            "tau": scenario.heading_cfg.tau_att,
                            "mode": scenario.heading_cfg.mode},
        "steering": {"max_speed": scenario.steering.max_speed,
                     "max_accel": scenario.steering.max_accel,
                     "slow_radius": scenario.steering.slow_radius,
                     "heading_rate_limit": scenario.steering.heading_rate_limit},
        "actors": [
            {"name": track.name, "height": track.height,
             "track": [{"t": t, "position": position.tolist(), "facing": facing}
                       for t, position, facing in track.keyframes]}
            for track in scenario.tracks.values()],
        "tables": {"radius": scenario.tables.radius_by_size,
                   "alpha": scenario.tables.alpha_by_size,
                   "elevation": scenario.tables.elevation_angle},
    }
    if scenario.initial is not None:
        out["initial"] = scenario.initial
    return out


def demo_scenario(kind: str) -> dict:
    """Canned scenarios matching the validation experiments (square / helix)."""
    noise = {"process_velocity_std": 0.01, "process_position_std": 0.001,
             "measurement_velocity_std": 0.05, "measurement_position_std": 0.02,
             "process_heading_std": 0.002, "measurement_heading_std": 0.01}
    if kind == "square":
        return {
            "schema": SCHEMA_VERSION,
            "mode": "trajectory",
            "trajectory": {"kind": "square",
                           "params": {"side": 2.0, "speed": 0.25, "dwell": 0.0,
                                      "altitude": 1.0, "heading": 0.0}},
            "noise": noise,
            "seed": 1,
        }
    if kind == "helix":
        return {
            "schema": SCHEMA_VERSION,
            "mode": "trajectory",
            "trajectory": {"kind": "helix",
                           "params": {"radius": 1.0, "omega": 0.4, "climb": 0.1,
                                      "z0": 0.5, "duration": 20.0,
                                      "heading": "tangent"}},
            "noise": noise,
            "seed": 1,
        }
    raise ScenarioError(f"no demo scenario named {kind!r} (square or helix)")
