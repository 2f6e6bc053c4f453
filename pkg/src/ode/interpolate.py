from __future__ import annotations

import numpy as np

from src.common.errors import DecompositionError
from src.engine.simulate import Trajectory
from src.model.schedule import StepsizeSchedule


class InterpolatedTrajectory:
    """Piecewise-linear theta_bar on the t-grid and z_bar on the s-grid."""

    def __init__(self, trajectory: Trajectory, schedule: StepsizeSchedule):
        steps = np.diff(trajectory.n)
        if len(trajectory) < 2 or np.any(steps != 1):
            raise DecompositionError("interpolation needs a trajectory recorded at every step")
        self.trajectory = trajectory
        self.schedule = schedule
        self.n_first = int(trajectory.n[0])
        self.n_last = int(trajectory.n[-1])
        self.t, self.s = schedule.times(self.n_first, self.n_last)
        self.alphas = schedule.alpha_block(self.n_first, self.n_last)
        self.betas = schedule.beta_block(self.n_first, self.n_last)

    @staticmethod
    def _eval(grid, values, x):
        if x < grid[0] or x > grid[-1]:
            raise ValueError(f"{x} lies outside the recorded range [{grid[0]}, {grid[-1]}]")
        return np.array([np.interp(x, grid, values[:, j]) for j in range(values.shape[1])])

    def theta_bar(self, tau: float) -> np.ndarray:
        return self._eval(self.t, self.trajectory.theta, tau)

    def z_bar(self, mu: float) -> np.ndarray:
        return self._eval(self.s, self.trajectory.z, mu)

    def xi(self, tau: float) -> float:
        """Maps t-time into s-time, linearly on each [t_k, t_{k+1}]."""
        if tau < self.t[0] or tau > self.t[-1]:
            raise ValueError(f"{tau} lies outside the recorded range")
        k = int(np.searchsorted(self.t, tau, side="right")) - 1
        k = min(k, self.alphas.size - 1)
        return float(self.s[k] + (self.betas[k] / self.alphas[k]) * (tau - self.t[k]))
