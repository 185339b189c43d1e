"""Plain records shared by the trajectory, simulation and market layers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class PathRecord:
    """One trajectory of the controlled process.

    ``times``, ``states`` and ``xi_applied`` share a grid; ``xi_applied[k]`` is
    the rate used on ``[times[k], times[k+1])`` (the last entry repeats the
    final rate). ``cumulative_cost[k]`` is the running cost up to ``times[k]``.
    Jump events sit between grid points at ``jump_times`` with sizes
    ``eta_applied``.
    """

    times: np.ndarray
    states: np.ndarray
    xi_applied: np.ndarray
    jump_times: list = field(default_factory=list)
    eta_applied: list = field(default_factory=list)
    cumulative_cost: np.ndarray | None = None
    running_cost: float = 0.0
    terminal_state: float = 0.0
    impact_cost: float = 0.0
    risk_cost: float = 0.0
    jump_cost: float = 0.0

    def to_csv(self, path, events_path=None) -> None:
        """Write ``t, x, xi, cumulative_cost`` and, optionally, the event table."""
        path = Path(path)
        cum = self.cumulative_cost if self.cumulative_cost is not None else np.full(len(self.times), np.nan)
        try:
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "x", "xi", "cumulative_cost"])
                for row in zip(self.times, self.states, self.xi_applied, cum):
                    w.writerow([repr(float(v)) for v in row])
            if events_path is not None:
                with Path(events_path).open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["jump_time", "eta"])
                    for t, e in zip(self.jump_times, self.eta_applied):
                        w.writerow([repr(float(t)), repr(float(e))])
        except OSError as exc:
            raise OSError(f"cannot write path record to {path}: {exc}") from exc
