"""Report writers: JSON/CSV emission and matplotlib figure rendering.

Reports are deterministic: fixed key order, repr-based float
formatting, no timestamps.  Figures are rendered to files alongside
the delimited output (Agg backend, no display required).
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

from .model import MultiplierSet, Trajectory


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def trajectory_payload(problem_name: str, overrides: dict, traj: Trajectory,
                       weights=None) -> dict:
    payload = {
        "problem": problem_name,
        "overrides": dict(overrides),
        "grid_n": traj.grid.n_intervals,
        "x": traj.x.tolist(),
        "u": traj.u.tolist(),
    }
    if weights is not None:
        payload["weights"] = list(map(float, weights))
    return payload


def front_csv_text(k: int, rows: list[dict]) -> str:
    """Front table with header w_1..w_k, J_1..J_k, converged, kkt_pass."""
    header = [f"w_{i + 1}" for i in range(k)] + [f"J_{i + 1}" for i in range(k)] \
        + ["converged", "kkt_pass"]
    lines = [",".join(header)]
    for row in rows:
        cells = [repr(float(v)) for v in row["weights"]]
        cells += [repr(float(v)) for v in row["J"]]
        cells.append("true" if row["converged"] else "false")
        cells.append("true" if row["kkt_pass"] else "false")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def solution_figure(path: Path, traj: Trajectory, mult: MultiplierSet | None = None) -> None:
    """States, controls and (when available) costate/density panels."""
    nodes = traj.grid.nodes
    mids = traj.grid.midpoints
    n_panels = 2 if mult is None else 4
    fig, axes = plt.subplots(n_panels, 1, figsize=(7, 2.2 * n_panels), sharex=True)
    axes = np.atleast_1d(axes)
    for j in range(traj.x.shape[1]):
        axes[0].plot(nodes, traj.x[:, j], label=f"x{j + 1}")
    axes[0].set_ylabel("state")
    axes[0].legend(loc="best", fontsize=8)
    for j in range(traj.u.shape[1]):
        axes[1].step(mids, traj.u[:, j], where="mid", label=f"u{j + 1}")
    axes[1].set_ylabel("control")
    axes[1].legend(loc="best", fontsize=8)
    if mult is not None:
        for j in range(mult.p.shape[1]):
            axes[2].plot(nodes, mult.p[:, j], label=f"p{j + 1}")
        axes[2].set_ylabel("costate")
        axes[2].legend(loc="best", fontsize=8)
        for j in range(mult.theta.shape[1]):
            axes[3].step(mids, mult.theta[:, j], where="mid", label=f"theta{j + 1}")
        axes[3].set_ylabel("density")
        axes[3].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def front_figure(path: Path, J: np.ndarray) -> None:
    """Scatter of the non-dominated objective vectors (pairwise for k > 2)."""
    J = np.asarray(J, dtype=float)
    k = J.shape[1] if J.ndim == 2 else 1
    if k < 2:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(J.ravel(), "o")
        ax.set_xlabel("point")
        ax.set_ylabel("J_1")
    elif k == 2:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(J[:, 0], J[:, 1], "o-")
        ax.set_xlabel("J_1")
        ax.set_ylabel("J_2")
    else:
        pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
        cols = min(3, len(pairs))
        rows = (len(pairs) + cols - 1) // cols
        fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.8 * rows))
        axes = np.atleast_1d(axes).ravel()
        for ax, (a, b) in zip(axes, pairs):
            ax.plot(J[:, a], J[:, b], "o")
            ax.set_xlabel(f"J_{a + 1}")
            ax.set_ylabel(f"J_{b + 1}")
        for ax in axes[len(pairs):]:
            ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
