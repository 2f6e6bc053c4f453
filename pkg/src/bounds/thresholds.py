"""Lock-in thresholds N0 = max(Na, Nb) and N1 = max(na, nb).

Stepsizes are non-increasing, so every tail supremum is the value at the
index itself and each threshold is the first index of a monotone predicate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from src.common.errors import EpsilonOutOfRange, ScanExhausted
from src.model.schedule import PolynomialSchedule, StepsizeSchedule

from .ledger import ConstantLedger
from .series import power_sum

logger = logging.getLogger("bounds.thresholds")

# largest power of two whose float conversion stays finite
INDEX_CAP = 2 ** 1000


def check_epsilons(ledger: ConstantLedger, eps1: float, eps2: float):
    r1in, r2in, r2out = ledger.radii.r1in, ledger.radii.r2in, ledger.radii.r2out
    la = ledger["La"]
    if not 0 < eps1 < min(r1in, 4.0 * la):
        raise EpsilonOutOfRange(f"eps1={eps1} must lie in (0, min(R1in={r1in}, 4 La={4.0 * la}))")
    if not 0 < eps2 < min(r2in, r2out - r2in):
        raise EpsilonOutOfRange(f"eps2={eps2} must lie in (0, min(R2in={r2in}, R2out - R2in={r2out - r2in}))")


def _first_true(pred: Callable[[int], bool], what: str, lo: int = 0, cap: int = INDEX_CAP) -> int:
    """Smallest n >= lo with pred(n), pred monotone in n."""
    if pred(lo):
        return lo
    step = 1
    bad = lo
    while True:
        hi = lo + step
        if hi > cap:
            raise ScanExhausted(what, cap)
        if pred(hi):
            break
        bad = hi
        step *= 2
    while hi - bad > 1:
        mid = (bad + hi) // 2
        if pred(mid):
            hi = mid
        else:
            bad = mid
    return hi


def _first_below(schedule: StepsizeSchedule, seq: str, level: float, what: str) -> int:
    if isinstance(schedule, PolynomialSchedule):
        if seq == "beta":
            return _first_true(lambda n: schedule.beta(n) <= level, what)
        return _first_true(lambda n: max(schedule.beta(n), schedule.eta(n)) <= level, what)
    horizon = schedule.horizon
    values = schedule.beta_block(0, horizon)
    if seq != "beta":
        values = np.maximum(values, schedule.eta_block(0, horizon))
    # suffix supremum; explicit sequences are validated non-increasing but the scan does not rely on it
    tail_sup = np.maximum.accumulate(values[::-1])[::-1]
    hits = np.nonzero(tail_sup <= level)[0]
    if hits.size == 0:
        raise ScanExhausted(what, horizon)
    return int(hits[0])


def threshold_n0(ledger: ConstantLedger, schedule: StepsizeSchedule, eps1: float, eps2: float):
    """(Na, Nb, N0): the first indices from which the stepsizes are small enough."""
    check_epsilons(ledger, eps1, eps2)
    level_a = min(eps1 / 8.0, eps2 / 3.0) / (ledger["Lz"] * max(ledger["Lc"], 1.0))
    level_b = eps1 / (4.0 * ledger["Lb"])
    na = _first_below(schedule, "beta_eta", level_a, "Na")
    nb = _first_below(schedule, "beta", level_b, "Nb")
    return na, nb, max(na, nb)


def _contraction_targets(ledger: ConstantLedger, eps1: float, eps2: float):
    """Elapsed times t_j - t_n0 and s_j - s_n0 after which the ODEs are inside the eps-balls."""
    ta = math.log(4.0 * (ledger["K1"] * ledger.radii.r1in + ledger["La"]) / eps1) / ledger["q"]
    tb = math.log(3.0 * ledger["K2"] * ledger.radii.r2in / eps2) / ledger["q2"]
    return max(ta, 0.0), max(tb, 0.0)


def _first_crossing(schedule: StepsizeSchedule, seq: str, n0: int, target: float, what: str) -> int:
    """Smallest j >= n0 with sum_{k=n0}^{j-1} step_k >= target."""
    if target <= 0:
        return n0
    if isinstance(schedule, PolynomialSchedule):
        p = schedule.alpha_exp if seq == "alpha" else schedule.beta_exp
        return _first_true(lambda j: power_sum(p, n0, j) >= target, what, lo=n0)
    if n0 > schedule.horizon:
        raise ScanExhausted(what, schedule.horizon)
    steps = schedule.alpha_block(n0, schedule.horizon) if seq == "alpha" else schedule.beta_block(n0, schedule.horizon)
    elapsed = np.cumsum(steps)
    hits = np.nonzero(elapsed >= target)[0]
    if hits.size == 0:
        raise ScanExhausted(what, schedule.horizon)
    return n0 + int(hits[0]) + 1


def threshold_n1(ledger: ConstantLedger, schedule: StepsizeSchedule, n0: int, eps1: float, eps2: float):
    """(na, nb, N1): the first indices after n0 at which the ODE solutions are eps-close."""
    check_epsilons(ledger, eps1, eps2)
    ta, tb = _contraction_targets(ledger, eps1, eps2)
    na = _first_crossing(schedule, "alpha", n0, ta, "na")
    nb = _first_crossing(schedule, "beta", n0, tb, "nb")
    return na, nb, max(na, nb)


def closed_form_thresholds(ledger: ConstantLedger, schedule: PolynomialSchedule, n0: int, eps1: float, eps2: float):
    """Integral-comparison inversions of na and nb for (n+1)^-p schedules.

    The partial sum dominates the integral of x^-p over [n0+1, j+1], so both
    values are at least the scanned thresholds.
    """
    if not isinstance(schedule, PolynomialSchedule):
        raise TypeError("closed-form thresholds need a polynomial schedule")
    check_epsilons(ledger, eps1, eps2)
    ta, tb = _contraction_targets(ledger, eps1, eps2)

    def invert(p, elapsed):
        if elapsed <= 0:
            return n0
        base = (n0 + 1.0) ** (1.0 - p) + (1.0 - p) * elapsed
        return max(n0, math.ceil(base ** (1.0 / (1.0 - p))))

    return invert(schedule.alpha_exp, ta), invert(schedule.beta_exp, tb)


@dataclass(frozen=True)
class ThresholdTerms:
    eps1: float
    eps2: float
    Na: int
    Nb: int
    N0: int
    n0: int
    na: int
    nb: int
    N1: int
    na_closed: Optional[int] = None
    nb_closed: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_terms(ledger: ConstantLedger, schedule: StepsizeSchedule, eps1: float, eps2: float,
                    n0: Optional[int] = None) -> ThresholdTerms:
    na_big, nb_big, n0_min = threshold_n0(ledger, schedule, eps1, eps2)
    if n0 is None:
        n0 = n0_min
    elif n0 < n0_min:
        logger.warning(f"n0={n0} is below N0={n0_min}; N1 is reported but the lock-in bound does not apply")
    na, nb, n1 = threshold_n1(ledger, schedule, n0, eps1, eps2)
    closed = (None, None)
    if isinstance(schedule, PolynomialSchedule):
        closed = closed_form_thresholds(ledger, schedule, n0, eps1, eps2)
    return ThresholdTerms(eps1=eps1, eps2=eps2, Na=na_big, Nb=nb_big, N0=n0_min, n0=n0,
                          na=na, nb=nb, N1=n1, na_closed=closed[0], nb_closed=closed[1])
