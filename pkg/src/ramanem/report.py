"""Diagnostics record shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "CRITERION", "MAX_ITERATIONS"]

CRITERION = "criterion"
MAX_ITERATIONS = "max_iterations"


@dataclass
class SolveReport:
    """What a solve did and why it stopped.

    ``checkpoints`` are the iteration numbers (or sweep indices for
    Tikhonov) at which ``objective_trace`` and ``delta_max_trace`` were
    recorded. ``objective`` names the discrepancy: ``"kl"`` for EM,
    ``"least_squares"`` for the Gaussian solvers.
    """

    solver: str
    iterations_used: int = 0
    stopped_by: str = MAX_ITERATIONS
    objective: str = "kl"
    checkpoints: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    delta_max_trace: list = field(default_factory=list)
    delta_trace: np.ndarray | None = None
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def kl_trace(self) -> list:
        return self.objective_trace

    def record(self, iteration, objective, delta=None):
        self.checkpoints.append(int(iteration))
        self.objective_trace.append(float(objective))
        dmax = float(np.max(delta)) if delta is not None and len(delta) else float("nan")
        self.delta_max_trace.append(dmax)

    def trace_table(self) -> tuple[list[str], np.ndarray]:
        """Column names and rows for the per-checkpoint trace file."""
        cols = ["iteration", self.objective, "delta_max"]
        rows = np.column_stack(
            [
                np.asarray(self.checkpoints, dtype=float),
                np.asarray(self.objective_trace, dtype=float),
                np.asarray(self.delta_max_trace, dtype=float),
            ]
        ) if self.checkpoints else np.empty((0, 3))
        return cols, rows

    def summary(self) -> dict:
        out = {
            "solver": self.solver,
            "iterations_used": self.iterations_used,
            "stopped_by": self.stopped_by,
            "wall_time": self.wall_time,
        }
        if self.objective_trace:
            out[f"final_{self.objective}"] = self.objective_trace[-1]
        out.update(self.extras)
        return out
