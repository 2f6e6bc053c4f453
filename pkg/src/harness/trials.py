"""One Monte Carlo trial: a seeded trajectory reduced to its error curves."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.common.errors import NonFinite
from src.engine.simulate import run_trajectory
from src.model.radii import Radii
from src.model.schedule import StepsizeSchedule
from src.model.spec import LinearTTSSpec

from .config import ExperimentConfig, NoiseRecipe
from .pool import trial_seeds

logger = logging.getLogger("harness.trials")


@dataclass(frozen=True, eq=False)
class TrialTask:
    index: int
    seed: np.random.SeedSequence
    spec: LinearTTSSpec
    schedule: StepsizeSchedule
    noise: NoiseRecipe
    n_start: int
    n_end: int
    theta0: np.ndarray
    w0: np.ndarray
    stride: int
    radii: Optional[Radii]


@dataclass(frozen=True, eq=False)
class TrialRecord:
    index: int
    n: np.ndarray
    err_theta: np.ndarray
    err_z: np.ndarray
    # step at which the iterate stopped being finite
    failed_at: Optional[int] = None

    @property
    def failed(self) -> bool:
        return self.failed_at is not None


def run_trial(task: TrialTask) -> TrialRecord:
    noise = task.noise.make(task.seed)
    try:
        traj = run_trajectory(task.spec, task.schedule, noise, task.n_start, task.theta0, task.w0,
                              task.n_end, stride=task.stride, radii=task.radii)
    except NonFinite as exc:
        logger.warning(f"trial {task.index} diverged at step {exc.index}")
        empty = np.zeros(0)
        return TrialRecord(task.index, np.zeros(0, dtype=np.int64), empty, empty, failed_at=exc.index)
    return TrialRecord(task.index, traj.n, traj.err_theta, traj.err_z)


def trial_tasks(cfg: ExperimentConfig, n_start: int, radii: Optional[Radii]) -> List[TrialTask]:
    seeds = trial_seeds(cfg.seed, cfg.trials)
    return [
        TrialTask(index=i, seed=seed, spec=cfg.spec, schedule=cfg.schedule, noise=cfg.noise,
                  n_start=n_start, n_end=cfg.horizon, theta0=cfg.theta0, w0=cfg.w0,
                  stride=cfg.stride, radii=radii)
        for i, seed in enumerate(seeds)
    ]


def spawn_keys(cfg: ExperimentConfig) -> List[List[int]]:
    return [list(s.spawn_key) for s in trial_seeds(cfg.seed, cfg.trials)]


def recorded_grid(records: List[TrialRecord]) -> Optional[np.ndarray]:
    """Recorded indices shared by every finished trial."""
    for rec in records:
        if not rec.failed:
            return rec.n
    return None
