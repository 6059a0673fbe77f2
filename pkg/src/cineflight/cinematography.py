"""Shot-description parsing and camera placement on manifold surfaces.

A shot sentence like ``MS on A 34backright`` picks a camera configuration
relative to the actors: on a sphere around a single actor, or on the
constant-subtended-angle arc around a pair.  Mapping tables from keywords to
geometry are configuration, overridable per scenario.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import wrap_angle

SHOT_SIZES = ("CU", "MCU", "MS", "FS", "LS")
PROFILES = ("front", "34left", "left", "34backleft", "back",
            "34backright", "right", "34right")
ELEVATIONS = ("low", "eye", "high")

# Eight-point compass around the actor, measured counterclockwise from the
# facing direction; the right-hand side is negative.
PROFILE_AZIMUTH = {
    "front": 0.0,
    "34left": math.pi / 4,
    "left": math.pi / 2,
    "34backleft": 3 * math.pi / 4,
    "back": math.pi,
    "34backright": -3 * math.pi / 4,
    "right": -math.pi / 2,
    "34right": -math.pi / 4,
}


class PslError(ValueError):
    """Parse failure, annotated with the offending token and its offset."""

    def __init__(self, message: str, token: str | None = None,
                 offset: int | None = None):
        if token is not None:
            message = f"{message} (token {token!r} at offset {offset})"
        super().__init__(message)
        self.token = token
        self.offset = offset


class DegenerateGeometryError(ValueError):
    """Actor layout admits no camera surface (e.g. coincident actors)."""


@dataclass(frozen=True)
class PslShot:
    """Parsed shot sentence: size, one or two subjects, profile, elevation."""

    size: str
    subjects: tuple[str, ...]
    profile: str = "front"
    elevation: str = "eye"

    def __post_init__(self):
        if self.size not in SHOT_SIZES:
            raise ValueError(f"unknown shot size {self.size!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.elevation not in ELEVATIONS:
            raise ValueError(f"unknown elevation {self.elevation!r}")
        if len(self.subjects) not in (1, 2):
            raise ValueError("a shot frames exactly one or two subjects")


def parse_psl(text: str) -> PslShot:
    """Parse ``<size> on <subject> [and <subject>] [<profile>] [<elevation>]``.

    Keywords are case-insensitive; subject names keep their case.  Omitted
    profile defaults to front, omitted elevation to eye.
    """
    tokens: list[tuple[str, int]] = []
    offset = 0
    for token in text.split():
        tokens.append((token, text.index(token, offset)))
        offset = text.index(token, offset) + len(token)
    if not tokens:
        raise PslError("empty shot description")

    def fail(message, position):
        token, off = tokens[position] if position < len(tokens) else ("<end>", len(text))
        raise PslError(message, token, off)

    pos = 0
    size = tokens[pos][0].upper()
    if size not in SHOT_SIZES:
        fail(f"expected a shot size {SHOT_SIZES}", pos)
    pos += 1
    if pos >= len(tokens) or tokens[pos][0].lower() != "on":
        fail("expected 'on' after the shot size", pos)
    pos += 1
    if pos >= len(tokens):
        fail("expected a subject name", pos)
    subjects = [tokens[pos][0]]
    pos += 1
    while pos < len(tokens) and tokens[pos][0].lower() == "and":
        pos += 1
        if pos >= len(tokens):
            fail("expected a subject name after 'and'", pos)
        subjects.append(tokens[pos][0])
        pos += 1
    if len(subjects) > 2:
        fail("at most two subjects are supported", pos - 1)

    profile = "front"
    elevation = "eye"
    if pos < len(tokens):
        word = tokens[pos][0].lower()
        if word in PROFILES:
            profile = word
            pos += 1
    if pos < len(tokens):
        word = tokens[pos][0].lower()
        if word in ELEVATIONS:
            elevation = word
            pos += 1
    if pos < len(tokens):
        fail("expected a profile or elevation keyword", pos)
    return PslShot(size, tuple(subjects), profile, elevation)


def format_psl(shot: PslShot) -> str:
    """Render a shot back to its canonical sentence."""
    subjects = " and ".join(shot.subjects)
    return f"{shot.size} on {subjects} {shot.profile} {shot.elevation}"


@dataclass(frozen=True)
class SphereCoords:
    """Camera on a sphere around one actor: radius, azimuth (relative to the
    actor's facing) and elevation angle."""

    radius: float
    azimuth: float
    elevation: float

    surface = "sphere"

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if not -math.pi / 2 < self.elevation < math.pi / 2:
            raise ValueError(f"elevation must lie in (-pi/2, pi/2), got {self.elevation}")
        object.__setattr__(self, "azimuth", wrap_angle(self.azimuth))

    def parameters(self) -> tuple[float, float, float]:
        return (self.radius, self.azimuth, self.elevation)


@dataclass(frozen=True)
class ToricCoords:
    """Camera on the horizontal arc from which the actor pair subtends
    ``apex_angle``, at arc position theta (0 = apex) and elevation angle phi."""

    apex_angle: float
    theta: float
    phi: float

    surface = "toric"

    def __post_init__(self):
        if not 0.0 < self.apex_angle < math.pi:
            raise ValueError(f"apex angle must lie in (0, pi), got {self.apex_angle}")
        if not -math.pi / 2 < self.phi < math.pi / 2:
            raise ValueError(f"phi must lie in (-pi/2, pi/2), got {self.phi}")
        if abs(self.theta) >= self.max_theta:
            raise ValueError(
                f"theta {self.theta:.4f} falls outside the arc between the "
                f"actors (|theta| < {self.max_theta:.4f})")

    @property
    def max_theta(self) -> float:
        return math.pi - self.apex_angle

    def parameters(self) -> tuple[float, float, float]:
        return (self.apex_angle, self.theta, self.phi)


ManifoldCoords = SphereCoords | ToricCoords


@dataclass(frozen=True)
class ActorPose:
    """World pose of an actor: position, facing and head height (aim point)."""

    name: str
    position: np.ndarray
    facing: float = 0.0
    height: float = 1.7

    def __post_init__(self):
        position = np.asarray(self.position, dtype=float)
        if position.shape != (3,):
            raise ValueError("actor position must be a 3-vector")
        if not (np.isfinite(position).all() and math.isfinite(self.facing)
                and math.isfinite(self.height)):
            raise ValueError("actor pose must be finite")
        object.__setattr__(self, "position", position)

    @property
    def aim_point(self) -> np.ndarray:
        return self.position + np.array([0.0, 0.0, self.height])


@dataclass(frozen=True)
class CameraPose:
    """Drone camera pose: world position plus the course aligning the optics."""

    position: np.ndarray
    heading: float

    def __post_init__(self):
        position = np.asarray(self.position, dtype=float)
        if position.shape != (3,):
            raise ValueError("camera position must be a 3-vector")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class MappingTables:
    """Keyword-to-geometry tables; scene-scale defaults, not calibrated values."""

    radius_by_size: dict = field(default_factory=lambda: {
        "CU": 1.0, "MCU": 1.5, "MS": 2.0, "FS": 3.0, "LS": 4.5})
    alpha_by_size: dict = field(default_factory=lambda: {
        "CU": 0.6, "MCU": 0.5, "MS": 0.4, "FS": 0.3, "LS": 0.2})
    elevation_angle: dict = field(default_factory=lambda: {
        "low": -0.35, "eye": 0.0, "high": 0.35})
    profile_azimuth: dict = field(default_factory=lambda: dict(PROFILE_AZIMUTH))
    # Fraction of the arc half-span the widest profile maps to, keeping every
    # profile strictly inside the arc between the actors.
    toric_theta_scale: float = 0.9

    def override(self, radius=None, alpha=None, elevation=None) -> "MappingTables":
        tables = self
        if radius:
            tables = replace(tables, radius_by_size={**tables.radius_by_size, **radius})
        if alpha:
            tables = replace(tables, alpha_by_size={**tables.alpha_by_size, **alpha})
        if elevation:
            tables = replace(tables, elevation_angle={**tables.elevation_angle, **elevation})
        return tables


def shot_to_manifold(shot: PslShot, tables: MappingTables | None = None) -> ManifoldCoords:
    """Map a parsed shot to its manifold-surface coordinates."""
    tables = tables or MappingTables()
    profile_angle = tables.profile_azimuth[shot.profile]
    elevation = tables.elevation_angle[shot.elevation]
    if len(shot.subjects) == 1:
        return SphereCoords(tables.radius_by_size[shot.size], profile_angle, elevation)
    alpha = tables.alpha_by_size[shot.size]
    theta = profile_angle * (math.pi - alpha) / math.pi * tables.toric_theta_scale
    return ToricCoords(alpha, theta, elevation)


def sphere_to_pose(coords: SphereCoords, actor: ActorPose) -> CameraPose:
    """Realize sphere coordinates against an actor: position on the sphere
    around the aim point, optical axis pointed back at it."""
    azimuth = actor.facing + coords.azimuth
    offset = coords.radius * np.array([
        math.cos(coords.elevation) * math.cos(azimuth),
        math.cos(coords.elevation) * math.sin(azimuth),
        math.sin(coords.elevation),
    ])
    position = actor.aim_point + offset
    heading = math.atan2(actor.aim_point[1] - position[1],
                         actor.aim_point[0] - position[0])
    return CameraPose(position, heading)


def _toric_frame(actor_a: ActorPose, actor_b: ActorPose):
    """Midpoint, chord direction and left normal of the actor pair, plus length."""
    aim_a = actor_a.aim_point
    aim_b = actor_b.aim_point
    chord = aim_b[:2] - aim_a[:2]
    length = float(np.linalg.norm(chord))
    if length < 1e-6:
        raise DegenerateGeometryError(
            f"actors {actor_a.name!r} and {actor_b.name!r} are coincident; "
            "no toric surface exists")
    u = chord / length
    n = np.array([-u[1], u[0]])
    return 0.5 * (aim_a + aim_b), u, n, length


def toric_to_pose(coords: ToricCoords, actor_a: ActorPose,
                  actor_b: ActorPose) -> CameraPose:
    """Realize toric coordinates against an actor pair.

    The camera sits on the horizontal circle from which the segment between
    the aim points subtends `apex_angle` (radius |AB| / (2 sin alpha)), at arc
    angle theta from the apex, lifted so phi is its elevation seen from the
    midpoint; the heading aims at the midpoint.
    """
    mid, u, n, length = _toric_frame(actor_a, actor_b)
    arc_radius = length / (2.0 * math.sin(coords.apex_angle))
    center = mid[:2] + arc_radius * math.cos(coords.apex_angle) * n
    horizontal = center + arc_radius * (math.cos(coords.theta) * n
                                        + math.sin(coords.theta) * u)
    reach = float(np.linalg.norm(horizontal - mid[:2]))
    position = np.array([horizontal[0], horizontal[1],
                         mid[2] + reach * math.tan(coords.phi)])
    heading = math.atan2(mid[1] - position[1], mid[0] - position[0])
    return CameraPose(position, heading)


def pose_to_sphere(position: np.ndarray, actor: ActorPose) -> SphereCoords:
    """Reconstruct sphere coordinates from a camera position (inverse mapping)."""
    offset = np.asarray(position, dtype=float) - actor.aim_point
    radius = float(np.linalg.norm(offset))
    if radius < 1e-9:
        raise DegenerateGeometryError("camera sits on the aim point")
    elevation = math.asin(max(-1.0, min(1.0, offset[2] / radius)))
    azimuth = wrap_angle(math.atan2(offset[1], offset[0]) - actor.facing)
    return SphereCoords(radius, azimuth, elevation)


def pose_to_toric(position: np.ndarray, actor_a: ActorPose,
                  actor_b: ActorPose) -> ToricCoords:
    """Reconstruct toric coordinates from a camera position (inverse mapping).

    The subtended angle is measured in the horizontal plane; a camera on the
    mirror side of the actor line reads as the mirrored (A/B swapped) frame.
    """
    mid, u, n, length = _toric_frame(actor_a, actor_b)
    position = np.asarray(position, dtype=float)
    to_a = actor_a.aim_point[:2] - position[:2]
    to_b = actor_b.aim_point[:2] - position[:2]
    cross = to_a[0] * to_b[1] - to_a[1] * to_b[0]
    alpha = math.atan2(abs(cross), float(np.dot(to_a, to_b)))
    if not 0.0 < alpha < math.pi:
        raise DegenerateGeometryError("camera is collinear with the actors")
    arc_radius = length / (2.0 * math.sin(alpha))
    side = 1.0 if float(np.dot(position[:2] - mid[:2], n)) >= 0.0 else -1.0
    center = mid[:2] + side * arc_radius * math.cos(alpha) * n
    rel = position[:2] - center
    theta = math.atan2(float(np.dot(rel, u)), side * float(np.dot(rel, n)))
    reach = float(np.linalg.norm(position[:2] - mid[:2]))
    phi = math.atan2(position[2] - mid[2], reach)
    return ToricCoords(alpha, theta, phi)


def realize_pose(coords: ManifoldCoords, actors: list[ActorPose]) -> CameraPose:
    """Realize manifold coordinates against the current actor poses."""
    if isinstance(coords, SphereCoords):
        if len(actors) != 1:
            raise ValueError("sphere coordinates frame exactly one actor")
        return sphere_to_pose(coords, actors[0])
    if len(actors) != 2:
        raise ValueError("toric coordinates frame exactly two actors")
    return toric_to_pose(coords, actors[0], actors[1])


def aim_center(actors: list[ActorPose]) -> np.ndarray:
    """The point the camera should look at: the (mid)point of the aim points."""
    return np.mean([actor.aim_point for actor in actors], axis=0)
