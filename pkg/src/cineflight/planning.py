"""Reference trajectory generation: manifold interpolation, steering, builtins.

Everything here produces streams of ReferenceSample (velocity, position,
course) for the controller to track.  Shot transitions interpolate in
manifold space and are re-anchored to the current actor poses every step, so
moving actors bend the path; an arrive steering behavior smooths the motion.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .cinematography import (ActorPose, ManifoldCoords, SphereCoords,
                             ToricCoords, aim_center, realize_pose,
                             wrap_angle)


class ActorTrackError(ValueError):
    """An actor track does not cover the interval the planner needs."""


@dataclass(frozen=True)
class SteeringConfig:
    """Arrive-behavior limits; sized for indoor scenes and below drone limits."""

    max_speed: float = 0.8
    max_accel: float = 0.8
    slow_radius: float = 1.0
    heading_rate_limit: float = 0.6

    def __post_init__(self):
        for name in ("max_speed", "max_accel", "slow_radius", "heading_rate_limit"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True, eq=False)
class ReferenceSample:
    """One controller reference r[k] = (velocity, position, course) at time t."""

    t: float
    velocity: np.ndarray
    position: np.ndarray
    course: float

    def __post_init__(self):
        velocity = np.asarray(self.velocity, dtype=float)
        position = np.asarray(self.position, dtype=float)
        if velocity.shape != (3,) or position.shape != (3,):
            raise ValueError("reference velocity and position must be 3-vectors")
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "course", wrap_angle(self.course))


@dataclass(frozen=True)
class PathSegment:
    """Transition between two camera configurations on the same surface."""

    start: ManifoldCoords
    end: ManifoldCoords
    duration: float
    subjects: tuple[str, ...]

    def __post_init__(self):
        if self.start.surface != self.end.surface:
            raise ValueError(
                f"cannot interpolate between {self.start.surface} and "
                f"{self.end.surface} coordinates")
        if not self.duration > 0.0:
            raise ValueError(f"duration must be > 0, got {self.duration}")


def _lerp(a: float, b: float, s: float) -> float:
    return a + s * (b - a)


def _lerp_angle(a: float, b: float, s: float) -> float:
    """Interpolate along the shortest arc; endpoints reproduce exactly."""
    return wrap_angle(a + s * wrap_angle(b - a))


def interpolate_manifold(segment: PathSegment, s: float) -> ManifoldCoords:
    """Coordinates a fraction s of the way along the segment."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {s}")
    start, end = segment.start, segment.end
    if isinstance(start, SphereCoords):
        return SphereCoords(_lerp(start.radius, end.radius, s),
                            _lerp_angle(start.azimuth, end.azimuth, s),
                            _lerp(start.elevation, end.elevation, s))
    return ToricCoords(_lerp(start.apex_angle, end.apex_angle, s),
                       _lerp_angle(start.theta, end.theta, s),
                       _lerp(start.phi, end.phi, s))


def steer_arrive(position: np.ndarray, velocity: np.ndarray,
                 target: np.ndarray, cfg: SteeringConfig,
                 dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One arrive step: head for the target, slowing down inside slow_radius.

    The velocity change per step is capped at max_accel*dt and the desired
    speed at max_speed, so the output stream is acceleration- and
    speed-bounded by construction.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    offset = np.asarray(target, dtype=float) - position
    distance = float(np.linalg.norm(offset))
    if distance > 1e-12:
        speed = cfg.max_speed * min(1.0, distance / cfg.slow_radius)
        desired = offset * (speed / distance)
    else:
        desired = np.zeros(3)
    dv = desired - velocity
    dv_norm = float(np.linalg.norm(dv))
    limit = cfg.max_accel * dt
    if dv_norm > limit:
        dv = dv * (limit / dv_norm)
    new_velocity = velocity + dv
    return position + dt * new_velocity, new_velocity


@dataclass(frozen=True)
class ActorTrack:
    """Timestamped keyframes of one actor, linearly interpolated.

    A single keyframe means a static actor, valid at all times; otherwise the
    track is only valid over its keyframe span.
    """

    name: str
    height: float = 1.7
    keyframes: tuple = ()  # tuple of (t, position 3-vector, facing)

    def __post_init__(self):
        frames = []
        for t, position, facing in self.keyframes:
            frames.append((float(t), np.asarray(position, dtype=float), float(facing)))
        if not frames:
            raise ValueError(f"actor {self.name!r} needs at least one keyframe")
        if any(b[0] <= a[0] for a, b in zip(frames, frames[1:])):
            raise ValueError(f"actor {self.name!r} keyframes must be strictly increasing in time")
        object.__setattr__(self, "keyframes", tuple(frames))
        object.__setattr__(self, "_times", tuple(f[0] for f in frames))

    @property
    def static(self) -> bool:
        return len(self.keyframes) == 1

    def check_coverage(self, start: float, end: float):
        if self.static:
            return
        t0, t1 = self.keyframes[0][0], self.keyframes[-1][0]
        if t0 > start + 1e-9 or t1 < end - 1e-9:
            raise ActorTrackError(
                f"actor {self.name!r} track covers [{t0:g}, {t1:g}] s but the "
                f"reference needs [{start:g}, {end:g}] s")

    def pose_at(self, t: float) -> ActorPose:
        frames = self.keyframes
        if self.static or t <= frames[0][0]:
            _, position, facing = frames[0]
            return ActorPose(self.name, position, facing, self.height)
        if t >= frames[-1][0]:
            _, position, facing = frames[-1]
            return ActorPose(self.name, position, facing, self.height)
        i = bisect_right(self._times, t) - 1
        t0, p0, f0 = frames[i]
        t1, p1, f1 = frames[i + 1]
        s = (t - t0) / (t1 - t0)
        return ActorPose(self.name, p0 + s * (p1 - p0),
                         _lerp_angle(f0, f1, s), self.height)


def _rate_limited_heading(current: float, target: float, rate_limit: float,
                          dt: float) -> float:
    error = wrap_angle(target - current)
    step = max(-rate_limit * dt, min(rate_limit * dt, error))
    return wrap_angle(current + step)


def generate_reference(segment: PathSegment, tracks: dict[str, ActorTrack],
                       steering: SteeringConfig, dt: float,
                       hold: float = 0.0) -> list[ReferenceSample]:
    """Reference stream for a shot transition (or a framing hold, start == end).

    Each step interpolates the manifold coordinates, realizes them against
    the actors' CURRENT poses, and steers a virtual camera toward that target;
    the course always aims at the actors, slewed within the heading rate
    limit.
    """
    missing = [name for name in segment.subjects if name not in tracks]
    if missing:
        raise ActorTrackError(f"no track for actor(s) {missing}")
    actors = [tracks[name] for name in segment.subjects]
    total = segment.duration + hold
    for track in actors:
        track.check_coverage(0.0, total)
    steps = int(round(total / dt))

    poses0 = [track.pose_at(0.0) for track in actors]
    start_pose = realize_pose(segment.start, poses0)
    position = start_pose.position.copy()
    velocity = np.zeros(3)
    course = start_pose.heading
    samples = [ReferenceSample(0.0, velocity.copy(), position.copy(), course)]
    for k in range(1, steps + 1):
        t = k * dt
        s = min(t / segment.duration, 1.0)
        coords = interpolate_manifold(segment, s)
        poses = [track.pose_at(t) for track in actors]
        target = realize_pose(coords, poses)
        position, velocity = steer_arrive(position, velocity,
                                          target.position, steering, dt)
        center = aim_center(poses)
        aim = math.atan2(center[1] - position[1], center[0] - position[0])
        course = _rate_limited_heading(course, aim,
                                       steering.heading_rate_limit, dt)
        samples.append(ReferenceSample(t, velocity.copy(), position.copy(), course))
    return samples


def naive_reference(segment: PathSegment, tracks: dict[str, ActorTrack],
                    dt: float) -> list[ReferenceSample]:
    """Uniform-in-s sampling of the path with finite-difference velocities.

    Test-only baseline: it tracks the manifold exactly but produces the
    abrupt, acceleration-unbounded motion the steered generator avoids.
    """
    actors = [tracks[name] for name in segment.subjects]
    steps = int(round(segment.duration / dt))
    positions = []
    courses = []
    for k in range(steps + 1):
        t = k * dt
        coords = interpolate_manifold(segment, min(t / segment.duration, 1.0))
        poses = [track.pose_at(t) for track in actors]
        pose = realize_pose(coords, poses)
        positions.append(pose.position)
        courses.append(pose.heading)
    samples = []
    for k in range(steps + 1):
        if k < steps:
            velocity = (positions[k + 1] - positions[k]) / dt
        else:
            velocity = np.zeros(3)
        samples.append(ReferenceSample(k * dt, velocity, positions[k], courses[k]))
    return samples


class _Timeline:
    """Piecewise-linear position timeline with right-continuous velocities."""

    def __init__(self):
        self.breaks = [0.0]
        self.points = []  # (p0, v, heading or None) per interval

    def add(self, start: np.ndarray, velocity: np.ndarray, duration: float,
            heading: float | None):
        self.points.append((np.asarray(start, dtype=float),
                            np.asarray(velocity, dtype=float), heading))
        self.breaks.append(self.breaks[-1] + duration)

    @property
    def duration(self) -> float:
        return self.breaks[-1]

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray, float | None]:
        i = bisect_right(self.breaks, t) - 1
        if i >= len(self.points):  # exactly at the end
            i = len(self.points) - 1
            p0, v, heading = self.points[i]
            dt_local = self.breaks[i + 1] - self.breaks[i]
            return p0 + dt_local * v, np.zeros(3), heading
        p0, v, heading = self.points[i]
        return p0 + (t - self.breaks[i]) * v, v, heading


def _heading_for(mode, velocity: np.ndarray, fallback: float) -> float:
    if isinstance(mode, (int, float)):
        return float(mode)
    if float(np.linalg.norm(velocity[:2])) > 1e-12:
        return math.atan2(velocity[1], velocity[0])
    return fallback


def builtin_trajectory(kind: str, params: dict, dt: float) -> list[ReferenceSample]:
    """Canned reference paths: square, helix, line or a constant setpoint.

    Square and line build piecewise-linear timelines with exact velocities;
    the helix positions/velocities are analytic.  `heading` is either the
    string "tangent" or a fixed angle.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    params = dict(params)
    heading_mode = params.pop("heading", "tangent")
    if kind == "helix":
        return _helix(params, dt, heading_mode)
    if kind == "square":
        timeline = _square_timeline(params)
    elif kind == "line":
        timeline = _line_timeline(params)
    elif kind == "setpoint":
        timeline = _setpoint_timeline(params)
        if heading_mode == "tangent":
            heading_mode = params.get("course", 0.0)
    else:
        raise ValueError(f"unknown builtin trajectory kind: {kind!r}")
    steps = int(round(timeline.duration / dt))
    samples = []
    course = _heading_for(heading_mode, timeline.sample(0.0)[1], 0.0)
    for k in range(steps + 1):
        position, velocity, _ = timeline.sample(k * dt)
        course = _heading_for(heading_mode, velocity, course)
        samples.append(ReferenceSample(k * dt, velocity, position, course))
    return samples


def _require_positive(params: dict, *names: str):
    for name in names:
        if not params.get(name, 0.0) > 0.0:
            raise ValueError(f"parameter {name!r} must be > 0, got {params.get(name)}")


def _square_timeline(params: dict) -> _Timeline:
    _require_positive(params, "side", "speed")
    side = params["side"]
    speed = params["speed"]
    dwell = float(params.get("dwell", 0.0))
    if dwell < 0.0:
        raise ValueError("dwell must be >= 0")
    laps = int(params.get("laps", 1))
    origin = np.asarray(params.get("origin", (0.0, 0.0)), dtype=float)
    altitude = float(params.get("altitude", 1.0))
    corners = [np.array([origin[0] + dx * side, origin[1] + dy * side, altitude])
               for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1))]
    timeline = _Timeline()
    for _ in range(laps):
        for i in range(4):
            start, end = corners[i], corners[(i + 1) % 4]
            direction = (end - start) / side
            timeline.add(start, speed * direction, side / speed, None)
            if dwell > 0.0:
                timeline.add(end, np.zeros(3), dwell, None)
    return timeline


def _line_timeline(params: dict) -> _Timeline:
    _require_positive(params, "speed")
    start = np.asarray(params["start"], dtype=float)
    end = np.asarray(params["end"], dtype=float)
    length = float(np.linalg.norm(end - start))
    if length < 1e-9:
        raise ValueError("line start and end coincide; use a setpoint instead")
    hold = float(params.get("hold", 0.0))
    timeline = _Timeline()
    timeline.add(start, params["speed"] * (end - start) / length,
                 length / params["speed"], None)
    if hold > 0.0:
        timeline.add(end, np.zeros(3), hold, None)
    return timeline


def _setpoint_timeline(params: dict) -> _Timeline:
    _require_positive(params, "duration")
    position = np.asarray(params["position"], dtype=float)
    timeline = _Timeline()
    timeline.add(position, np.zeros(3), params["duration"], None)
    return timeline


def _helix(params: dict, dt: float, heading_mode) -> list[ReferenceSample]:
    _require_positive(params, "radius", "duration")
    radius = params["radius"]
    omega = float(params["omega"])
    if omega == 0.0:
        raise ValueError("parameter 'omega' must be nonzero")
    climb = float(params.get("climb", 0.0))
    center = np.asarray(params.get("center", (0.0, 0.0)), dtype=float)
    z0 = float(params.get("z0", 1.0))
    phase = float(params.get("phase", 0.0))
    steps = int(round(params["duration"] / dt))
    samples = []
    for k in range(steps + 1):
        t = k * dt
        angle = omega * t + phase
        position = np.array([center[0] + radius * math.cos(angle),
                             center[1] + radius * math.sin(angle),
                             z0 + climb * t])
        velocity = np.array([-radius * omega * math.sin(angle),
                             radius * omega * math.cos(angle), climb])
        course = _heading_for(heading_mode, velocity, 0.0)
        samples.append(ReferenceSample(t, velocity, position, course))
    return samples
