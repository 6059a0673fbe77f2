"""Figure rendering for completed runs.

Renders the reference-vs-truth views (per-axis tracking, top-down path,
command channels) to PNG files next to the CSV outputs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import RunLog


def render_figures(log: RunLog, out_dir) -> list[Path]:
    """Write tracking.png, path_xy.png and commands.png; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _tracking_figure(log, out_dir / "tracking.png"),
        _path_figure(log, out_dir / "path_xy.png"),
        _commands_figure(log, out_dir / "commands.png"),
    ]
    return written


def _tracking_figure(log: RunLog, path: Path) -> Path:
    fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
    labels = ("x [m]", "y [m]", "z [m]")
    for idx, ax in enumerate(axes.flat[:3]):
        ax.plot(log.t, log.ref_position[:, idx], "k--", lw=1.0, label="reference")
        ax.plot(log.t, log.truth_translation[:, 3 + idx], "C0", lw=1.0, label="truth")
        ax.plot(log.t, log.est_translation[:, 3 + idx], "C1", lw=0.7,
                alpha=0.7, label="estimate")
        ax.set_ylabel(labels[idx])
        ax.grid(alpha=0.3)
    ax = axes.flat[3]
    ax.plot(log.t, log.ref_course, "k--", lw=1.0, label="reference")
    ax.plot(log.t, log.truth_course, "C0", lw=1.0, label="truth")
    ax.plot(log.t, log.est_course, "C1", lw=0.7, alpha=0.7, label="estimate")
    ax.set_ylabel("course [rad]")
    ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]")
    axes.flat[0].legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _path_figure(log: RunLog, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(log.ref_position[:, 0], log.ref_position[:, 1], "k--", lw=1.0,
            label="reference")
    ax.plot(log.truth_translation[:, 3], log.truth_translation[:, 4], "C0",
            lw=1.0, label="truth")
    ax.plot(log.truth_translation[0, 3], log.truth_translation[0, 4], "C0o",
            ms=6, label="start")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _commands_figure(log: RunLog, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(10, 4))
    for idx, label in enumerate(("roll", "pitch", "climb rate", "yaw rate")):
        ax.plot(log.t, log.command[:, idx], lw=0.9, label=label)
    ax.axhline(1.0, color="r", lw=0.6, ls=":")
    ax.axhline(-1.0, color="r", lw=0.6, ls=":")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("command")
    ax.set_ylim(-1.15, 1.15)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8, ncol=4)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
