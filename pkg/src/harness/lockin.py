"""Empirical lock-in frequency against the probability lower bounds."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import stats

from src.bounds.probability import lockin_bound, projected_bound
from src.bounds.thresholds import threshold_n1
from src.common.errors import ConfigError, DomainError
from src.model.schedule import PolynomialSchedule

from .config import ExperimentConfig, check_initialization, experiment_ledger
from .pool import run_trials
from .trials import TrialRecord, recorded_grid, run_trial, spawn_keys, trial_tasks

logger = logging.getLogger("harness.lockin")

CONFIDENCE = 0.95
EVENT_LABEL = "sampled forall n >= n1"
CURVE_COLUMNS = ["n", "inside_fraction", "median_err_theta", "median_err_z"]


@dataclass(frozen=True, eq=False)
class LockInResult:
    kind: str
    projected: bool
    trials: int
    locked: List[bool]
    failed: List[int]
    frequency: float
    ci_low: float
    ci_high: float
    bound: float
    vacuous: bool
    noiseless: bool
    n_start: int
    n1: int
    eps1: float
    eps2: float
    stride: int
    horizon: int
    bound_detail: dict = field(repr=False)
    ledger: dict = field(repr=False)
    n: np.ndarray = field(repr=False)
    inside_fraction: np.ndarray = field(repr=False)
    median_err_theta: np.ndarray = field(repr=False)
    median_err_z: np.ndarray = field(repr=False)
    spawn_keys: List[List[int]] = field(repr=False, default_factory=list)

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    @property
    def meets_bound(self) -> bool:
        """Frequency is no more than three half-widths below a non-vacuous bound."""
        if self.vacuous:
            return True
        return self.frequency >= self.bound - 3.0 * self.half_width

    @property
    def event(self) -> dict:
        return {"label": EVENT_LABEL, "n1": self.n1, "stride": self.stride, "horizon": self.horizon,
                "eps1": self.eps1, "eps2": self.eps2}

    curve_columns = CURVE_COLUMNS

    def curve_rows(self) -> list:
        return [
            [int(self.n[i]), float(self.inside_fraction[i]), float(self.median_err_theta[i]),
             float(self.median_err_z[i])]
            for i in range(len(self.n))
        ]

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "locked_in": int(sum(self.locked)),
            "failed_trials": list(self.failed),
            "frequency": self.frequency,
            "wilson_low": self.ci_low,
            "wilson_high": self.ci_high,
            "bound": self.bound,
            "vacuous": self.vacuous,
            "noiseless": self.noiseless,
            "meets_bound": self.meets_bound,
        }

    def bounds_dict(self) -> dict:
        return {"bound": self.bound_detail, "ledger": self.ledger, "event": self.event,
                "summary": self.summary()}


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE):
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def locked_in(record: TrialRecord, n1: int, eps1: float, eps2: float) -> bool:
    if record.failed:
        return False
    tail = record.n >= n1
    return bool(np.all(record.err_theta[tail] <= eps1) and np.all(record.err_z[tail] <= eps2))


def _bound(cfg: ExperimentConfig, ledger):
    if not cfg.projected:
        b = lockin_bound(ledger, cfg.schedule, cfg.n0, cfg.eps1, cfg.eps2, kappa=cfg.kappa)
        return b.bound, b.vacuous, b.noiseless, b.to_dict()
    if not isinstance(cfg.schedule, PolynomialSchedule):
        raise DomainError("projected lock-in experiments need a polynomial schedule")
    if cfg.eps1 != cfg.eps2:
        raise ConfigError("projected lock-in uses a single 'eps'")
    b = projected_bound(ledger, cfg.eps, cfg.schedule.alpha_exp, cfg.schedule.beta_exp, cfg.n0, kappa=cfg.kappa)
    return b.bound, b.vacuous, b.noiseless, b.to_dict()


def _monitor_from(cfg: ExperimentConfig, ledger) -> int:
    if cfg.n1 is not None:
        return cfg.n1
    if cfg.projected:
        return 2 * cfg.n0
    _, _, n1 = threshold_n1(ledger, cfg.schedule, cfg.n0, cfg.eps1, cfg.eps2)
    logger.info(f"N1 = {n1} for n0 = {cfg.n0}")
    return n1


def run_lock_in(cfg: ExperimentConfig, workers: int = 1) -> LockInResult:
    """Run cfg.trials seeded trajectories and count those that stay in the eps-balls from n1 on.

    Unprojected runs start at n0 from (theta0, w0), which must lie in the
    inner balls. Projected runs start at 0 from anywhere and are monitored
    from 2 n0' unless n1 is given.
    """
    ledger = experiment_ledger(cfg)
    bound, vacuous, noiseless, detail = _bound(cfg, ledger)
    n1 = _monitor_from(cfg, ledger)
    if n1 > cfg.horizon:
        raise ConfigError(f"monitoring starts at n1={n1}, past the horizon {cfg.horizon}; set 'n1' or a longer 'horizon'")

    if cfg.projected:
        n_start, radii = 0, cfg.radii
    else:
        check_initialization(cfg)
        n_start, radii = cfg.n0, None

    logger.info(f"running {cfg.trials} {'projected' if cfg.projected else 'unprojected'} trials "
                f"from n={n_start} to {cfg.horizon}, monitored from n1={n1}")
    records = run_trials(run_trial, trial_tasks(cfg, n_start, radii), workers)

    locked = [locked_in(r, n1, cfg.eps1, cfg.eps2) for r in records]
    failed = [i for i, r in enumerate(records) if r.failed]
    if failed:
        logger.warning(f"{len(failed)} of {cfg.trials} trials diverged and count as not locked in")
    k = int(sum(locked))
    lo, hi = wilson_interval(k, cfg.trials)
    frequency = k / cfg.trials

    grid = recorded_grid(records)
    finished = [r for r in records if not r.failed]
    if grid is None:
        ns = np.zeros(0, dtype=np.int64)
        inside = med_theta = med_z = np.zeros(0)
    else:
        err_theta = np.vstack([r.err_theta for r in finished])
        err_z = np.vstack([r.err_z for r in finished])
        ns = grid
        inside = np.mean((err_theta <= cfg.eps1) & (err_z <= cfg.eps2), axis=0)
        med_theta = np.median(err_theta, axis=0)
        med_z = np.median(err_z, axis=0)

    if vacuous:
        logger.info(f"lock-in frequency {frequency:.4f}; the bound {bound:.3e} is vacuous")
    else:
        logger.info(f"lock-in frequency {frequency:.4f} (95% Wilson [{lo:.4f}, {hi:.4f}]) vs bound {bound:.6f}")
    result = LockInResult(
        kind="lockin", projected=cfg.projected, trials=cfg.trials, locked=locked, failed=failed,
        frequency=frequency, ci_low=lo, ci_high=hi, bound=bound, vacuous=vacuous, noiseless=noiseless,
        n_start=n_start, n1=n1, eps1=cfg.eps1, eps2=cfg.eps2, stride=cfg.stride, horizon=cfg.horizon,
        bound_detail=detail, ledger=ledger.to_dict(), n=ns, inside_fraction=inside,
        median_err_theta=med_theta, median_err_z=med_z, spawn_keys=spawn_keys(cfg),
    )
    if not result.meets_bound:
        logger.warning(f"frequency {frequency:.4f} is more than three half-widths below the bound {bound:.6f}")
    if not math.isfinite(bound):
        logger.warning(f"bound evaluated to {bound}")
    return result
