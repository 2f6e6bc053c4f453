"""Variance accumulators and closed-form bounds on sub-exponential series."""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from src.common.errors import DomainError, ScanExhausted
from src.model.schedule import PolynomialSchedule, StepsizeSchedule

logger = logging.getLogger("bounds.series")

EXACT_LIMIT = 2 ** 22
SCAN_CAP = 10 ** 7
_NUMPY_WINDOW = 2 ** 20
_SCAN_CHUNK = 2 ** 16
# exp() of anything above this overflows a double
LOG_MAX = 709.0


def power_sum(p: float, lo: int, hi: int) -> float:
    """sum_{k=lo}^{hi-1} (k+1)^-p."""
    if hi <= lo:
        return 0.0
    if hi - lo <= _NUMPY_WINDOW and hi < 2 ** 52:
        return math.fsum(((np.arange(lo, hi, dtype=float) + 1.0) ** (-p)).tolist())
    with mpmath.workdps(40):
        return float(mpmath.zeta(p, lo + 1) - mpmath.zeta(p, hi + 1))


@dataclass(frozen=True, eq=False)
class SeriesAccumulators:
    """a_n and b_n for n in [0, n_end]."""

    a: np.ndarray
    b: np.ndarray
    q1: float
    q2: float

    @property
    def n_end(self) -> int:
        return self.a.shape[0] - 1


def _recurrence(steps: np.ndarray, q: float, start_value: float) -> np.ndarray:
    decay = np.exp(-2.0 * q * steps).tolist()
    sq = (steps * steps).tolist()
    out = [start_value]
    value = start_value
    for dk, sk in zip(decay, sq):
        value = value * dk + sk
        out.append(value)
    return np.asarray(out)


@functools.lru_cache(maxsize=8)
def _accumulate(schedule: StepsizeSchedule, q: float, which: str, lo: int, hi: int, start_value: float):
    steps = schedule.alpha_block(lo, hi) if which == "alpha" else schedule.beta_block(lo, hi)
    out = _recurrence(steps, q, start_value)
    out.setflags(write=False)
    return out


def accumulators(schedule: StepsizeSchedule, q1: float, q2: float, n_end: int) -> SeriesAccumulators:
    """Exact a_n, b_n from a_0 = b_0 = 0."""
    if n_end < 0:
        raise ValueError("n_end must be non-negative")
    return SeriesAccumulators(
        a=_accumulate(schedule, float(q1), "alpha", 0, n_end, 0.0),
        b=_accumulate(schedule, float(q2), "beta", 0, n_end, 0.0),
        q1=q1,
        q2=q2,
    )


def accumulator_ceiling(p: float, q_hat: float, n: int, cap: int = SCAN_CAP) -> float:
    """K_g e^q / q * n^-p, an upper bound on a_n for the schedule (n+1)^-p."""
    if n < 1:
        raise DomainError("the accumulator ceiling needs n >= 1")
    _, k_g = kg_constants(p, q_hat, cap)
    return k_g * math.exp(q_hat) / q_hat * n ** (-p)


def accumulator_window(schedule: StepsizeSchedule, q: float, which: str, lo: int, hi: int,
                       exact_limit: int = EXACT_LIMIT):
    """Accumulator values for n in [lo, hi) and whether they were warm-started.

    Past exact_limit a polynomial schedule starts the recurrence at lo from
    the closed-form ceiling; the recurrence is monotone in its start value so
    every later entry stays an upper bound.
    """
    if hi <= exact_limit or not isinstance(schedule, PolynomialSchedule) or lo < 1:
        return np.asarray(_accumulate(schedule, float(q), which, 0, hi, 0.0)[lo:hi]), False
    p = schedule.alpha_exp if which == "alpha" else schedule.beta_exp
    start = accumulator_ceiling(p, q, lo)
    logger.debug(f"{which} accumulator warm-started at n={lo} from {start:.3e}")
    return np.asarray(_accumulate(schedule, float(q), which, lo, hi, start)[:hi - lo]), True


def subexp_series_bound(b: float, p: float, n0: int, kappa: float) -> float:
    """Closed-form upper bound on sum_{n>=n0} exp(-b n^p)."""
    log_value = log_subexp_series_bound(b, p, n0, kappa)
    return math.exp(log_value) if log_value < LOG_MAX else math.inf


def log_subexp_series_bound(b: float, p: float, n0: int, kappa: float) -> float:
    if not b > 0 or not 0 < p < 1 or not 0 < kappa < 1 or n0 < 1:
        raise DomainError(f"need B > 0, p and kappa in (0, 1), n0 >= 1; got B={b}, p={p}, kappa={kappa}, n0={n0}")
    r = (1.0 - p) / p
    return (math.log(2.0 / (b * (1.0 - kappa) * p))
            + r * math.log((1.0 - p) / (b * kappa * p))
            + b * (2.0 - kappa) - r - b * (1.0 - kappa) * n0 ** p)


@functools.lru_cache(maxsize=64)
def kg_constants(p: float, q_hat: float, cap: int = SCAN_CAP):
    """(i1, K_g) for exp(-q S(n)) <= n^-p with S(n) = sum_{k=1}^{n-1} (k+1)^-p.

    g(n) = -q S(n) + p ln n starts at g(1) = 0. Its increments
    -q (n+1)^-p + p ln(1 + 1/n) change sign once, so after the first
    negative increment with g <= 0 nothing past the scan can be positive.
    """
    if not 0 < p < 1 or not q_hat > 0:
        raise DomainError(f"need p in (0, 1) and q > 0, got p={p}, q={q_hat}")
    last_positive = 0
    log_kg = 0.0
    s_lo = 0.0
    lo = 1
    while lo <= cap:
        hi = min(lo + _SCAN_CHUNK, cap + 1)
        ns = np.arange(lo, hi, dtype=float)
        # S(n) for n in [lo, hi): S(lo) plus (k+1)^-p for k in [lo, n)
        incr = (ns + 1.0) ** (-p)
        s = s_lo + np.concatenate(([0.0], np.cumsum(incr[:-1])))
        g = -q_hat * s + p * np.log(ns)
        positive = np.nonzero(g > 0)[0]
        if positive.size:
            last_positive = int(ns[positive[-1]])
            log_kg = max(log_kg, float(g.max()))
        n_last = hi - 1
        step = -q_hat * (n_last + 1.0) ** (-p) + p * math.log1p(1.0 / n_last)
        if step < 0 and g[-1] <= 0:
            return last_positive + 1, math.exp(log_kg)
        s_lo = float(s[-1] + incr[-1])
        lo = hi
    raise ScanExhausted("i1", cap)


@dataclass(frozen=True)
class SubexpConstants:
    c: float
    kappa: float
    p: float
    q_hat: float
    i1: int
    k_g: float
    c5: float
    c6: float
    log_c7: float

    @property
    def c7(self) -> float:
        return math.exp(self.log_c7) if self.log_c7 < LOG_MAX else math.inf

    def to_dict(self) -> dict:
        return {"c": self.c, "kappa": self.kappa, "p": self.p, "q_hat": self.q_hat, "i1": self.i1,
                "K_g": self.k_g, "c5": self.c5, "c6": self.c6, "c7": self.c7, "log_c7": self.log_c7}


def subexp_constants(c: float, kappa: float, p: float, q_hat: float, cap: int = SCAN_CAP) -> SubexpConstants:
    if not (c > 0 and math.isfinite(c)):
        raise DomainError(f"c must be positive and finite, got {c}")
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    i1, k_g = kg_constants(float(p), float(q_hat), cap)
    scale = c * q_hat / (k_g * math.exp(q_hat))
    r = (1.0 - p) / p
    log_c7 = (math.log(2.0) - math.log(scale) / p - math.log(1.0 - kappa) - math.log(p) / p
              + r * (math.log(1.0 - p) - 1.0 - math.log(kappa)))
    return SubexpConstants(c=c, kappa=kappa, p=p, q_hat=q_hat, i1=i1, k_g=k_g,
                           c5=scale * (2.0 - kappa), c6=scale * (1.0 - kappa), log_c7=log_c7)


def log_pre_delta_bound(sub: SubexpConstants, eps: float, n0: int) -> float:
    """log of c7 / eps^(2/p) * exp(c5 eps^2 - c6 eps^2 n0^p)."""
    if not eps > 0 or n0 < 1:
        raise DomainError(f"need eps > 0 and n0 >= 1, got eps={eps}, n0={n0}")
    e2 = eps * eps
    return sub.log_c7 - (2.0 / sub.p) * math.log(eps) + sub.c5 * e2 - sub.c6 * e2 * n0 ** sub.p


def pre_delta_bound(sub: SubexpConstants, eps: float, n0: int) -> float:
    """Upper bound on sum_{n>=n0} exp(-c eps^2 / c_n) for the schedule (n+1)^-p."""
    log_value = log_pre_delta_bound(sub, eps, n0)
    return math.exp(log_value) if log_value < LOG_MAX else math.inf

