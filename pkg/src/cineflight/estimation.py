"""Generic discrete non-stationary Kalman filter.

Used twice in the control loop: once on the 6-dimensional translation state
and once on the scalar heading state.  Operations are pure value-semantics
functions; filter sessions are just successive states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import wrap_angle


class NumericalSingularityError(RuntimeError):
    """Innovation covariance is singular and the measurement contradicts it."""


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """x' = A x + B u + N(0, F),  y = C x + N(0, H)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c", "f", "h"):
            object.__setattr__(self, name,
                               np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.a.shape[0]
        q = self.c.shape[0]
        if self.a.shape != (n, n):
            raise ValueError(f"A must be square, got {self.a.shape}")
        if self.b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.b.shape}")
        if self.c.shape != (q, n):
            raise ValueError(f"C must be {q}x{n}, got {self.c.shape}")
        if self.f.shape != (n, n):
            raise ValueError(f"F must be {n}x{n}, got {self.f.shape}")
        if self.h.shape != (q, q):
            raise ValueError(f"H must be {q}x{q}, got {self.h.shape}")
        for name in ("f", "h"):
            matrix = getattr(self, name)
            if (matrix == np.diag(np.diagonal(matrix))).all():
                if np.diagonal(matrix).min() < -1e-10:
                    raise ValueError(f"{name.upper()} must be positive semi-definite")
                continue
            if not np.allclose(matrix, matrix.T, atol=1e-12):
                raise ValueError(f"{name.upper()} must be symmetric")
            if np.linalg.eigvalsh(matrix).min() < -1e-10:
                raise ValueError(f"{name.upper()} must be positive semi-definite")

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class KalmanState:
    """State estimate and its covariance; P is re-symmetrized after updates."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        if p.shape != (x.size, x.size):
            raise ValueError(f"P must be {x.size}x{x.size}, got {p.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_first_measurement(cls, y, measurement_cov) -> "KalmanState":
        """Self-starting initialization: x = y, P = H (full-state observation)."""
        return cls(np.atleast_1d(np.asarray(y, dtype=float)).copy(),
                   np.atleast_2d(np.asarray(measurement_cov, dtype=float)).copy())


def kf_predict(state: KalmanState, model: LinearGaussianModel,
               u: np.ndarray) -> KalmanState:
    """Time update: x <- A x + B u, P <- A P A^T + F."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size != model.b.shape[1]:
        raise ValueError(f"u must have {model.b.shape[1]} entries, got {u.size}")
    if state.x.size != model.state_dim:
        raise ValueError(f"state has {state.x.size} entries, model expects {model.state_dim}")
    x = model.a @ state.x + model.b @ u
    p = model.a @ state.p @ model.a.T + model.f
    return KalmanState(x, 0.5 * (p + p.T))


def kf_update(state: KalmanState, model: LinearGaussianModel, y,
              residual: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
              step: Optional[int] = None) -> tuple[KalmanState, np.ndarray]:
    """Measurement update; returns the new state and the gain used.

    A singular innovation covariance is tolerated when the innovation lies in
    its range (degenerate zero-noise configurations, where the least-squares
    gain is the exact limit); an innovation outside the range means the model
    claims certainty the data contradicts, and raises.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size != model.c.shape[0]:
        raise ValueError(f"y must have {model.c.shape[0]} entries, got {y.size}")
    if state.x.size != model.state_dim:
        raise ValueError(f"state has {state.x.size} entries, model expects {model.state_dim}")
    predicted = model.c @ state.x
    innovation = (y - predicted) if residual is None else np.atleast_1d(residual(y, predicted))
    pct = state.p @ model.c.T
    s = model.c @ pct + model.h
    try:
        gain = np.linalg.solve(s.T, pct.T).T
    except np.linalg.LinAlgError:
        s_pinv = np.linalg.pinv(s)
        projected = s @ (s_pinv @ innovation)
        if np.linalg.norm(innovation - projected) > 1e-9 * (1.0 + np.linalg.norm(innovation)):
            where = f" at step {step}" if step is not None else ""
            raise NumericalSingularityError(
                f"singular innovation covariance{where}: measurement is "
                "inconsistent with a zero-variance prediction") from None
        gain = pct @ s_pinv
    x = state.x + gain @ innovation
    p = (np.eye(state.x.size) - gain @ model.c) @ state.p
    return KalmanState(x, 0.5 * (p + p.T)), gain


def heading_residual(y: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Innovation for the heading filter, wrapped so no 2*pi jump is ever seen."""
    return np.array([wrap_angle(float(y[0] - predicted[0]))])


def wrap_heading_state(state: KalmanState) -> KalmanState:
    """Keep the scalar heading estimate on its canonical branch."""
    return KalmanState(np.array([wrap_angle(float(state.x[0]))]), state.p)
