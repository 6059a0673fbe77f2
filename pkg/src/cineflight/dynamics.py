"""Discrete drone model: translation and heading state-space forms plus a noisy simulated plant.

The translation state stacks world-frame velocity and position, x1 = (v, p);
the heading state is the scalar course angle c.  Commands are the four
normalized channels (roll, pitch, climb rate, yaw rate) accepted by generic
high-level flight APIs, clamped to [-1, 1].
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

TAU = 2.0 * math.pi


class TimeStepWarning(UserWarning):
    """Discretization step is too coarse for the configured time constants."""


def wrap_angle(angle: float) -> float:
    """Reduce an angle to the canonical representative in (-pi, pi]."""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    wrapped = math.remainder(angle, TAU)
    if wrapped <= -math.pi:
        wrapped += TAU
    return wrapped


@dataclass(frozen=True)
class DroneGains:
    """Calibration constants of the first-order amortized response model.

    k_* are linear gains (m/s of steady velocity per unit command, rad/s for
    yaw), tau_* the amortization time constants.  Values are drone-dependent
    and normally come from a calibration campaign; the defaults are plausible
    small-quadrotor magnitudes.
    """

    k_roll: float = 2.0
    k_pitch: float = 2.0
    k_climb: float = 1.0
    tau_roll: float = 0.5
    tau_pitch: float = 0.5
    tau_climb: float = 0.4
    k_yaw_rate: float = 1.7

    def __post_init__(self):
        for name in ("k_roll", "k_pitch", "k_climb", "tau_roll", "tau_pitch",
                     "tau_climb", "k_yaw_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")

    @property
    def gain_matrix(self) -> np.ndarray:
        """Diagonal K of the three translation channel gains."""
        return np.diag([self.k_roll, self.k_pitch, self.k_climb])

    @property
    def rate_matrix(self) -> np.ndarray:
        """Diagonal T of inverse time constants."""
        return np.diag([1.0 / self.tau_roll, 1.0 / self.tau_pitch,
                        1.0 / self.tau_climb])

    @property
    def min_tau(self) -> float:
        return min(self.tau_roll, self.tau_pitch, self.tau_climb)

    def scaled(self, factor: float) -> "DroneGains":
        """Copy with all linear gains multiplied by ``factor`` (model-mismatch mode)."""
        return replace(self, k_roll=self.k_roll * factor,
                       k_pitch=self.k_pitch * factor,
                       k_climb=self.k_climb * factor,
                       k_yaw_rate=self.k_yaw_rate * factor)


@dataclass(frozen=True)
class FlightCommand:
    """One 4-channel flight control sample, saturated to [-1, 1].

    ``raw`` keeps the pre-clamp values for saturation diagnostics.
    """

    roll: float
    pitch: float
    climb_rate: float
    yaw_rate: float
    raw: tuple[float, float, float, float] = None  # type: ignore[assignment]

    def __post_init__(self):
        channels = (self.roll, self.pitch, self.climb_rate, self.yaw_rate)
        for value in channels:
            if not math.isfinite(value):
                raise ValueError(f"command channel must be finite, got {value}")
            if abs(value) > 1.0:
                raise ValueError(f"command channel outside [-1, 1]: {value}")
        if self.raw is None:
            object.__setattr__(self, "raw", channels)

    @classmethod
    def saturate(cls, roll: float, pitch: float, climb_rate: float,
                 yaw_rate: float) -> "FlightCommand":
        """Clamp each channel to [-1, 1], keeping the raw values."""
        raw = (float(roll), float(pitch), float(climb_rate), float(yaw_rate))
        for value in raw:
            if not math.isfinite(value):
                raise ValueError(f"command channel must be finite, got {value}")
        clipped = tuple(min(1.0, max(-1.0, value)) for value in raw)
        return cls(*clipped, raw=raw)

    @property
    def translation(self) -> np.ndarray:
        """The (roll, pitch, climb_rate) sub-command u1."""
        return np.array([self.roll, self.pitch, self.climb_rate])

    @property
    def saturated_channels(self) -> tuple[bool, bool, bool, bool]:
        return tuple(abs(value) > 1.0 for value in self.raw)


@dataclass(frozen=True, eq=False)
class TranslationState:
    """World-frame velocity and position, ordered (v, p) in the state vector."""

    velocity: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        velocity = np.asarray(self.velocity, dtype=float)
        position = np.asarray(self.position, dtype=float)
        if velocity.shape != (3,) or position.shape != (3,):
            raise ValueError("velocity and position must be 3-vectors")
        if not (np.isfinite(velocity).all() and np.isfinite(position).all()):
            raise ValueError("translation state must be finite")
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "position", position)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.velocity, self.position])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "TranslationState":
        x = np.asarray(x, dtype=float)
        if x.shape != (6,):
            raise ValueError(f"translation state vector must have 6 entries, got {x.shape}")
        return cls(x[:3].copy(), x[3:].copy())


@dataclass(frozen=True)
class HeadingState:
    """Scalar course angle, stored wrapped to (-pi, pi]."""

    course: float

    def __post_init__(self):
        object.__setattr__(self, "course", wrap_angle(float(self.course)))


def _psd_factor(matrix: np.ndarray, name: str) -> np.ndarray:
    """Validate symmetry/PSD and return a factor L with L L^T = matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (6, 6):
        raise ValueError(f"{name} must be 6x6, got {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    if eigenvalues.min() < -1e-10:
        raise ValueError(f"{name} must be positive semi-definite "
                         f"(min eigenvalue {eigenvalues.min():.3e})")
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Gaussian process/measurement covariances for both state-space models.

    f1/h1 are the 6x6 translation covariances, f2/h2 the scalar heading
    variances.  PSD is checked here so stepping never has to.
    """

    f1: np.ndarray
    h1: np.ndarray
    f2: float
    h2: float

    def __post_init__(self):
        object.__setattr__(self, "_f1_factor", _psd_factor(self.f1, "F1"))
        object.__setattr__(self, "_h1_factor", _psd_factor(self.h1, "H1"))
        object.__setattr__(self, "f1", np.asarray(self.f1, dtype=float))
        object.__setattr__(self, "h1", np.asarray(self.h1, dtype=float))
        for name in ("f2", "h2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(np.zeros((6, 6)), np.zeros((6, 6)), 0.0, 0.0)

    @classmethod
    def from_stddevs(cls, process_velocity: float = 0.0, process_position: float = 0.0,
                     measurement_velocity: float = 0.0, measurement_position: float = 0.0,
                     process_heading: float = 0.0, measurement_heading: float = 0.0,
                     ) -> "NoiseModel":
        """Build diagonal covariances from per-block standard deviations."""
        f1 = np.diag([process_velocity**2] * 3 + [process_position**2] * 3)
        h1 = np.diag([measurement_velocity**2] * 3 + [measurement_position**2] * 3)
        return cls(f1, h1, process_heading**2, measurement_heading**2)

    def sample_process(self, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        f1 = self._f1_factor @ rng.standard_normal(6)
        f2 = math.sqrt(self.f2) * rng.standard_normal()
        return f1, f2

    def sample_measurement(self, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        h1 = self._h1_factor @ rng.standard_normal(6)
        h2 = math.sqrt(self.h2) * rng.standard_normal()
        return h1, h2


def heading_rotation(course: float) -> np.ndarray:
    """Rotation M_D mapping body translation axes into the world frame."""
    if not math.isfinite(course):
        raise ValueError(f"course must be finite, got {course}")
    c, s = math.cos(course), math.sin(course)
    return np.array([[c, -s, 0.0],
                     [s, c, 0.0],
                     [0.0, 0.0, 1.0]])


def translation_matrices(dt: float, course: float,
                         gains: DroneGains) -> tuple[np.ndarray, np.ndarray]:
    """Discrete state-space pair (A1, B1) of the translation model.

    A1 = [[I - dt*T, 0], [dt*I, I]], B1 = [[M_D * dt*T * K], [0]].  Raises for
    dt <= 0 and warns when dt is not small against every time constant, which
    invalidates the first-order discretization.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt}")
    if dt >= gains.min_tau:
        warnings.warn(
            f"dt={dt} is not below the smallest time constant {gains.min_tau}; "
            "the discretized velocity model is unstable", TimeStepWarning,
            stacklevel=2)
    t_d = dt * np.array([1.0 / gains.tau_roll, 1.0 / gains.tau_pitch,
                         1.0 / gains.tau_climb])
    a1 = np.eye(6)
    a1[0, 0], a1[1, 1], a1[2, 2] = 1.0 - t_d
    a1[3, 0] = a1[4, 1] = a1[5, 2] = dt
    b1 = np.zeros((6, 3))
    # M_D (T_D K) with both factors diagonal: scale the rotation's columns.
    b1[:3, :] = heading_rotation(course) * (
        t_d * (gains.k_roll, gains.k_pitch, gains.k_climb))
    return a1, b1


def translation_step(state: TranslationState, u1: np.ndarray, dt: float,
                     course: float, gains: DroneGains) -> TranslationState:
    """Advance the noise-free translation model one step."""
    u1 = np.asarray(u1, dtype=float)
    if u1.shape != (3,):
        raise ValueError(f"u1 must be a 3-vector, got shape {u1.shape}")
    a1, b1 = translation_matrices(dt, course, gains)
    return TranslationState.from_vector(a1 @ state.as_vector() + b1 @ u1)


def heading_step(course: float, yaw_rate_cmd: float, dt: float,
                 k_yaw_rate: float) -> float:
    """Advance the noise-free heading integrator one step, wrapped."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt}")
    if not math.isfinite(yaw_rate_cmd):
        raise ValueError(f"yaw_rate_cmd must be finite, got {yaw_rate_cmd}")
    return wrap_angle(course + k_yaw_rate * dt * yaw_rate_cmd)


@dataclass(frozen=True, eq=False)
class PlantState:
    """Simulated ground truth plus its private random stream.

    Stands in for the physical drone and the motion-capture feed: stepping it
    advances the truth with process noise and returns noisy measurements.
    Advancing with the same seed, commands and time steps is bit-reproducible.
    """

    translation: TranslationState
    heading: HeadingState
    gains: DroneGains
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def initial(cls, position, velocity, heading: float, gains: DroneGains,
                seed: int, gain_scale: float = 1.0) -> "PlantState":
        if gain_scale != 1.0:
            gains = gains.scaled(gain_scale)
        return cls(TranslationState(np.asarray(velocity, dtype=float),
                                    np.asarray(position, dtype=float)),
                   HeadingState(heading), gains,
                   np.random.default_rng(seed))

    def measure(self, noise: NoiseModel) -> tuple[np.ndarray, float]:
        """Noisy measurement (y1, y2) of the current truth."""
        h1, h2 = noise.sample_measurement(self.rng)
        y1 = self.translation.as_vector() + h1
        y2 = wrap_angle(self.heading.course + h2)
        return y1, y2


def plant_step(plant: PlantState, command: FlightCommand, dt: float,
               noise: NoiseModel) -> tuple[PlantState, np.ndarray, float]:
    """Advance the plant truth one step and measure the new state.

    The plant integrates the model equations with the TRUE heading in M_D,
    adds process noise, and returns measurements corrupted by measurement
    noise.  Draw order (f1, f2, h1, h2) is fixed for reproducibility.
    """
    f1, f2 = noise.sample_process(plant.rng)
    translation = translation_step(plant.translation, command.translation, dt,
                                   plant.heading.course, plant.gains)
    translation = TranslationState.from_vector(translation.as_vector() + f1)
    course = heading_step(plant.heading.course, command.yaw_rate, dt,
                          plant.gains.k_yaw_rate)
    course = wrap_angle(course + f2)
    advanced = PlantState(translation, HeadingState(course), plant.gains,
                          plant.rng)
    y1, y2 = advanced.measure(noise)
    return advanced, y1, y2
