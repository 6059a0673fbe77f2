"""Controller gain synthesis and the per-step control law.

The position loop is an infinite-horizon discrete LQG regulator: the feedback
gain comes from the algebraic Riccati equation solved by fixed-point iteration
(warm-started across steps, since the model only changes through the heading
estimate), and a pre-filter makes the closed loop converge to the reference.
The heading loop is a scalar integrator regulated for a chosen error
attenuation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DroneGains, FlightCommand, translation_matrices, wrap_angle
from .planning import ReferenceSample


class ConvergenceError(RuntimeError):
    """Riccati iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class StaleGainsError(RuntimeError):
    """Heading moved too far since the gain set was computed."""


@dataclass(frozen=True, eq=False)
class RegulatorWeights:
    """State (Q) and command (R) weighting of the quadratic regulation cost."""

    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if q.shape != (6, 6) or r.shape != (3, 3):
            raise ValueError("Q must be 6x6 and R 3x3")
        if not (np.allclose(q, q.T, atol=1e-12) and np.allclose(r, r.T, atol=1e-12)):
            raise ValueError("Q and R must be symmetric")
        if np.linalg.eigvalsh(q).min() < -1e-10:
            raise ValueError("Q must be positive semi-definite")
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise ValueError("R must be positive definite") from None
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @classmethod
    def identity(cls, q_scale: float = 1.0, r_scale: float = 1.0) -> "RegulatorWeights":
        """Identity weights with scalar multipliers; larger r smooths commands."""
        return cls(q_scale * np.eye(6), r_scale * np.eye(3))


@dataclass(frozen=True)
class HeadingRegulatorConfig:
    """Attenuation target: the heading error shrinks by `gamma` after `tau_att`."""

    gamma: float = 0.1
    tau_att: float = 1.0
    mean_dt: float = 0.02
    mode: str = "pole-placement"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.mean_dt > 0.0:
            raise ValueError(f"mean_dt must be > 0, got {self.mean_dt}")
        if not self.tau_att > self.mean_dt:
            raise ValueError(
                f"tau_att must exceed the mean step ({self.mean_dt}), got {self.tau_att}")
        if self.mode not in ("pole-placement", "paper-formula"):
            raise ValueError(f"unknown heading regulator mode: {self.mode!r}")


@dataclass(frozen=True, eq=False)
class GainSet:
    """Feedback and pre-filter gains for one step, plus the heading they assume.

    n2 == k2 always: that choice gives zero steady-state heading error for a
    constant reference.
    """

    k1: np.ndarray
    n1: np.ndarray
    k2: float
    n2: float
    course: float

    def __post_init__(self):
        k1 = np.asarray(self.k1, dtype=float)
        n1 = np.asarray(self.n1, dtype=float)
        if k1.shape != (3, 6) or n1.shape != (3, 6):
            raise ValueError("K1 and N1 must be 3x6")
        if not (np.isfinite(k1).all() and np.isfinite(n1).all()
                and math.isfinite(self.k2) and math.isfinite(self.course)):
            raise ValueError("gains must be finite")
        if self.n2 != self.k2:
            raise ValueError("the heading pre-filter must equal the feedback gain")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "n1", n1)


def dare_rhs(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray,
             p: np.ndarray) -> np.ndarray:
    """One application of the Riccati recursion Q + A^T (P - P B (R+B^T P B)^-1 B^T P) A."""
    btp = b.T @ p
    inner = p - btp.T @ np.linalg.solve(r + btp @ b, btp)
    out = q + a.T @ inner @ a
    return 0.5 * (out + out.T)


def solve_dare(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray,
               tol: float = 1e-12, max_iter: int = 10_000,
               initial: np.ndarray | None = None) -> np.ndarray:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Plain fixed-point iteration of the recursion itself, started from Q (or
    from `initial` to warm-start successive solves).  Converged when the
    residual ||P - rhs(P)||_F drops below tol * (1 + ||P||_F).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    try:
        np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        raise ValueError("R must be positive definite") from None
    p = q.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    residual = math.inf
    for _ in range(max_iter):
        p_next = dare_rhs(a, b, q, r, p)
        residual = np.linalg.norm(p_next - p, "fro")
        p = p_next
        if residual <= tol * (1.0 + np.linalg.norm(p, "fro")):
            return p
    raise ConvergenceError(
        f"Riccati iteration did not converge within {max_iter} iterations "
        f"(last residual {residual:.3e})", residual)


def feedback_gain(a: np.ndarray, b: np.ndarray, p: np.ndarray,
                  r: np.ndarray) -> np.ndarray:
    """Full state feedback K = (R + B^T P B)^-1 B^T P A."""
    btp = b.T @ p
    try:
        return np.linalg.solve(r + btp @ b, btp @ a)
    except np.linalg.LinAlgError:
        raise ConvergenceError("R + B^T P B is singular", math.nan) from None


def prefilter(a: np.ndarray, b: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Pre-filter N = (B^T B)^-1 B^T ((I + B K) - A) scaling the reference."""
    btb = b.T @ b
    if np.linalg.cond(btb) > 1e12:
        raise np.linalg.LinAlgError("B is rank deficient; pre-filter undefined")
    eye = np.eye(a.shape[0])
    return np.linalg.solve(btb, b.T @ (eye + b @ k - a))


def heading_gain(cfg: HeadingRegulatorConfig, k_yaw_rate: float) -> float:
    """Scalar heading feedback k2 for the configured attenuation.

    paper-formula mode evaluates exp(dt*log(gamma) / (tau - dt)) verbatim;
    pole-placement mode places the closed-loop pole at exp(dt*log(gamma)/tau)
    so the error genuinely decays by gamma after tau seconds.
    """
    if cfg.mode == "paper-formula":
        return math.exp(cfg.mean_dt * math.log(cfg.gamma) / (cfg.tau_att - cfg.mean_dt))
    pole = math.exp(cfg.mean_dt * math.log(cfg.gamma) / cfg.tau_att)
    return (1.0 - pole) / (k_yaw_rate * cfg.mean_dt)


def controller_step(reference: ReferenceSample, x1_estimate: np.ndarray,
                    course_estimate: float, gains: GainSet,
                    stale_tolerance: float = 0.2) -> FlightCommand:
    """Apply u = (N1 r1 - K1 x1, n2 r2 - k2 x2), saturated per channel.

    The heading channel works on the wrapped error so a reference across the
    +-pi seam never produces a spurious full turn.  Gains computed for a
    heading that has since drifted beyond `stale_tolerance` are refused.
    """
    x1_estimate = np.asarray(x1_estimate, dtype=float)
    if x1_estimate.shape != (6,):
        raise ValueError(f"x1 estimate must be a 6-vector, got {x1_estimate.shape}")
    drift = abs(wrap_angle(course_estimate - gains.course))
    if drift > stale_tolerance:
        raise StaleGainsError(
            f"gains were computed for heading {gains.course:.4f} but the "
            f"estimate is now {course_estimate:.4f} ({drift:.3f} rad apart); recompute")
    r1 = np.concatenate([reference.velocity, reference.position])
    u1 = gains.n1 @ r1 - gains.k1 @ x1_estimate
    u2 = gains.k2 * wrap_angle(reference.course - course_estimate)
    return FlightCommand.saturate(u1[0], u1[1], u1[2], u2)


class RegulatorSession:
    """Per-run gain computer, warm-starting the Riccati solve across steps.

    One session per closed-loop run; not safe to share between runs since it
    carries the previous solution.
    """

    def __init__(self, drone: DroneGains, weights: RegulatorWeights,
                 heading_cfg: HeadingRegulatorConfig, tol: float = 1e-12,
                 max_iter: int = 10_000):
        self.drone = drone
        self.weights = weights
        self.tol = tol
        self.max_iter = max_iter
        self.k2 = heading_gain(heading_cfg, drone.k_yaw_rate)
        self._last_p: np.ndarray | None = None

    def gains_for(self, course: float, dt: float) -> GainSet:
        a1, b1 = translation_matrices(dt, course, self.drone)
        p = solve_dare(a1, b1, self.weights.q, self.weights.r,
                       tol=self.tol, max_iter=self.max_iter, initial=self._last_p)
        self._last_p = p
        k1 = feedback_gain(a1, b1, p, self.weights.r)
        n1 = prefilter(a1, b1, k1)
        return GainSet(k1, n1, self.k2, self.k2, course)
