"""Empirical convergence rate of sparsely projected iterates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from src.bounds.probability import rate_exponent
from src.common.errors import ConfigError, DomainError, WindowTooNoisy
from src.model.schedule import PolynomialSchedule

from .config import ExperimentConfig
from .pool import run_trials
from .trials import recorded_grid, run_trial, spawn_keys, trial_tasks

logger = logging.getLogger("harness.rate")

MIN_R_SQUARED = 0.5
WINDOW_START_FACTOR = 8
BOOTSTRAP_RESAMPLES = 2000
CURVE_COLUMNS = ["n", "median_error", "q25_error", "q75_error"]


@dataclass(frozen=True, eq=False)
class RateFit:
    kind: str
    trials: int
    failed: List[int]
    window: Tuple[int, int]
    slope: float
    intercept: float
    r_squared: float
    predicted_slope: float
    noisy: bool
    iqr_at_end: float
    median_iqr_at_end: float
    points: int
    stride: int
    horizon: int
    n: np.ndarray = field(repr=False)
    median: np.ndarray = field(repr=False)
    q25: np.ndarray = field(repr=False)
    q75: np.ndarray = field(repr=False)
    spawn_keys: List[List[int]] = field(repr=False, default_factory=list)

    curve_columns = CURVE_COLUMNS

    @property
    def event(self) -> dict:
        return {"label": "median of max(|theta'_n - theta*|, |z'_n|) over trials",
                "stride": self.stride, "horizon": self.horizon}

    def curve_rows(self) -> list:
        return [[int(self.n[i]), float(self.median[i]), float(self.q25[i]), float(self.q75[i])]
                for i in range(len(self.n))]

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "failed_trials": list(self.failed),
            "window": list(self.window),
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "predicted_slope": self.predicted_slope,
            "noisy": self.noisy,
            "iqr_at_end": self.iqr_at_end,
            "median_iqr_at_end": self.median_iqr_at_end,
            "points": self.points,
            # the log factor of the rate curve is not part of the fit
            "polylog_ignored": True,
        }

    def bounds_dict(self) -> dict:
        return {"rate_exponent": -self.predicted_slope, "event": self.event, "summary": self.summary()}


def fit_log_log(n: np.ndarray, err: np.ndarray):
    """Least-squares line through (log n, log err); returns (slope, intercept, R^2)."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual ** 2)) / total if total > 0 else 1.0
    return float(slope), float(intercept), r2


def median_spread(values: np.ndarray, seed: int) -> float:
    """Inter-quartile width of the bootstrap distribution of the sample median.

    Measures how much the median curve jitters at one index; it shrinks like
    1/sqrt(trials) while the spread of the errors themselves does not.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2 or np.ptp(values) == 0:
        return 0.0
    res = stats.bootstrap((values,), np.median, confidence_level=0.5, n_resamples=BOOTSTRAP_RESAMPLES,
                          method="percentile", random_state=np.random.default_rng(seed))
    return float(res.confidence_interval.high - res.confidence_interval.low)


def _window(cfg: ExperimentConfig) -> Tuple[int, int]:
    if cfg.fit_window is not None:
        return cfg.fit_window
    lo = WINDOW_START_FACTOR * max(cfg.n0, 1)
    if lo >= cfg.horizon:
        raise ConfigError(f"default fit window starts at {lo} = 8 n0', past the horizon {cfg.horizon}")
    return lo, cfg.horizon


def run_rate_fit(cfg: ExperimentConfig, workers: int = 1, strict: bool = False) -> RateFit:
    if not cfg.projected:
        raise ConfigError("rate fits run on projected iterates; set 'projected': true")
    if not isinstance(cfg.schedule, PolynomialSchedule):
        raise DomainError("rate fits need a polynomial schedule")
    predicted = -rate_exponent(cfg.schedule.alpha_exp, cfg.schedule.beta_exp)
    lo, hi = _window(cfg)

    records = run_trials(run_trial, trial_tasks(cfg, 0, cfg.radii), workers)
    failed = [i for i, r in enumerate(records) if r.failed]
    finished = [r for r in records if not r.failed]
    if failed:
        logger.warning(f"{len(failed)} of {cfg.trials} trials diverged and are left out of the error curves")
    grid = recorded_grid(records)
    if grid is None:
        raise ConfigError("every trial failed; there is no error curve to fit")

    err = np.vstack([np.maximum(r.err_theta, r.err_z) for r in finished])
    median = np.median(err, axis=0)
    q25, q75 = np.percentile(err, [25, 75], axis=0)

    inside = (grid >= lo) & (grid <= hi) & (median > 0)
    points = int(np.count_nonzero(inside))
    if points < 2:
        raise ConfigError(f"fit window [{lo}, {hi}] holds {points} usable recorded points; need at least 2")
    slope, intercept, r2 = fit_log_log(grid[inside], median[inside])
    last = int(np.nonzero(inside)[0][-1])
    noisy = r2 < MIN_R_SQUARED
    if noisy:
        message = f"fit over [{lo}, {hi}] has R^2 = {r2:.3f} < {MIN_R_SQUARED}"
        if strict:
            raise WindowTooNoisy(message)
        logger.warning(message)
    logger.info(f"fitted slope {slope:.4f} (R^2 {r2:.3f}) vs predicted {predicted:.4f} over [{lo}, {hi}]")

    return RateFit(
        kind="rate", trials=cfg.trials, failed=failed, window=(lo, hi), slope=slope, intercept=intercept,
        r_squared=r2, predicted_slope=predicted, noisy=noisy, iqr_at_end=float(q75[last] - q25[last]),
        median_iqr_at_end=median_spread(err[:, last], cfg.seed),
        points=points, stride=cfg.stride, horizon=cfg.horizon, n=grid, median=median, q25=q25, q75=q75,
        spawn_keys=spawn_keys(cfg),
    )
