"""Lock-in probability bounds and the convergence-rate curve.

Probability bounds are returned raw. A bound at or below zero is vacuous and
is flagged, never clamped. Zero noise bounds make every exponent infinite and
the bound exactly 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from src.common.errors import (
    AssumptionViolated,
    DomainError,
    EpsilonOutOfRange,
    NonSummable,
    ScanExhausted,
)
from src.model.schedule import PolynomialSchedule, StepsizeSchedule
from src.model.spec import spectral_norm

from .ledger import ConstantLedger
from .series import (
    LOG_MAX,
    SCAN_CAP,
    SubexpConstants,
    accumulator_window,
    log_pre_delta_bound,
    subexp_constants,
)
from .thresholds import check_epsilons, threshold_n0

logger = logging.getLogger("bounds.probability")

DIRECT_TERMS = 2 ** 18
KAPPA = 0.5
RELATIVE_CUTOFF = 1e-16


def _enc(x):
    if x is None or isinstance(x, (bool, int)):
        return x
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < LOG_MAX else math.inf


@dataclass(frozen=True)
class LockInBound:
    bound: float
    vacuous: bool
    noiseless: bool
    truncation: str
    n0: int
    direct: float
    tail: float
    direct_end: Optional[int]
    cutoff_index: Optional[int]
    warm_start: bool
    N0: Optional[int]
    valid_n0: bool

    @property
    def total(self) -> float:
        return self.direct + self.tail

    def to_dict(self) -> dict:
        return {
            "bound": _enc(self.bound),
            "vacuous": self.vacuous,
            "noiseless": self.noiseless,
            "truncation": self.truncation,
            "n0": self.n0,
            "direct": _enc(self.direct),
            "tail": _enc(self.tail),
            "total": _enc(self.total),
            "direct_end": self.direct_end,
            "cutoff_index": self.cutoff_index,
            "warm_start": self.warm_start,
            "N0": self.N0,
            "valid_n0": self.valid_n0,
        }


def _families(ledger: ConstantLedger, eps1: float, eps2: float):
    """(c, eps, stepsize sequence, rate) for each exponential family in the lock-in sum."""
    rows = [
        (ledger["c1"], eps1, "alpha", ledger["q1"]),
        (ledger["c2"], eps1, "beta", ledger["q2"]),
        (ledger["c3"], eps2, "beta", ledger["q2"]),
    ]
    return [row for row in rows if math.isfinite(row[0])]


def _exponent(schedule: PolynomialSchedule, which: str) -> float:
    return schedule.alpha_exp if which == "alpha" else schedule.beta_exp


def _n0_status(ledger, schedule, eps1, eps2, n0):
    try:
        _, _, n0_min = threshold_n0(ledger, schedule, eps1, eps2)
    except ScanExhausted as exc:
        logger.warning(f"N0 could not be located ({exc}); the bound is reported without its n0 precondition")
        return None, False
    if n0 < n0_min:
        logger.warning(f"n0={n0} is below N0={n0_min}; the bound is evaluated but its precondition fails")
    return n0_min, n0 >= n0_min


def lockin_bound(ledger: ConstantLedger, schedule: StepsizeSchedule, n0: int, eps1: float, eps2: float,
                 truncation: str = "direct", direct_terms: int = DIRECT_TERMS, kappa: float = KAPPA,
                 scan_cap: int = SCAN_CAP) -> LockInBound:
    """Lower bound on the probability that the iterates lock in after n0.

    truncation="direct" sums the series over [n0, N) and adds the closed-form
    tail from N on (polynomial schedules), where N = direct_terms, or
    n0 + direct_terms once n0 passes it. For explicit schedules N is the
    horizon and the terms must have died out by then. truncation="closed_form"
    bounds the whole series in closed form.
    """
    if truncation not in ("direct", "closed_form"):
        raise DomainError(f"unknown truncation '{truncation}'")
    if n0 < 0:
        raise DomainError("n0 must be non-negative")
    check_epsilons(ledger, eps1, eps2)
    n0_min, valid = _n0_status(ledger, schedule, eps1, eps2, n0)
    families = _families(ledger, eps1, eps2)
    polynomial = isinstance(schedule, PolynomialSchedule)

    if not families:
        return LockInBound(bound=1.0, vacuous=False, noiseless=True, truncation=truncation, n0=n0,
                           direct=0.0, tail=0.0, direct_end=None, cutoff_index=None, warm_start=False,
                           N0=n0_min, valid_n0=valid)

    scale = 2.0 * ledger.d ** 2
    direct = 0.0
    tail = 0.0
    direct_end = None
    cutoff = None
    warm = False

    if truncation == "closed_form":
        if not polynomial:
            raise DomainError("closed-form truncation needs a polynomial schedule")
        logs = [log_pre_delta_bound(subexp_constants(c, kappa, _exponent(schedule, which), q, scan_cap), eps, max(n0, 1))
                for c, eps, which, q in families]
        tail = math.fsum(_exp(v) for v in logs)
    else:
        if polynomial:
            hi = direct_terms if n0 < direct_terms else n0 + direct_terms
        else:
            hi = schedule.horizon
            if n0 >= hi:
                raise DomainError(f"n0={n0} is not below the explicit schedule horizon {hi}")
        direct_end = hi
        windows = {}
        for which, q in {(row[2], row[3]) for row in families}:
            windows[which], started_warm = accumulator_window(schedule, q, which, n0, hi)
            warm = warm or started_warm
        terms = np.zeros(hi - n0)
        pieces = []
        with np.errstate(divide="ignore"):
            for c, eps, which, _ in families:
                piece = np.exp(-c * eps * eps / windows[which])
                pieces.append(piece)
                terms += piece
        direct = math.fsum(np.concatenate(pieces).tolist())
        live = np.nonzero(terms >= RELATIVE_CUTOFF * direct)[0] if direct > 0 else np.array([], dtype=int)
        cutoff = n0 + int(live[-1]) + 1 if live.size else n0
        if polynomial:
            logs = [log_pre_delta_bound(subexp_constants(c, kappa, _exponent(schedule, which), q, scan_cap), eps, hi)
                    for c, eps, which, q in families]
            tail = math.fsum(_exp(v) for v in logs)
        elif direct > 0 and terms[-1] > RELATIVE_CUTOFF * direct:
            raise NonSummable(
                f"series terms have not decayed by the schedule horizon {hi} "
                f"(last term {terms[-1]:.3e}, running total {direct:.3e})"
            )

    total = direct + tail
    bound = 1.0 - scale * total if math.isfinite(total) else -math.inf
    if bound <= 0:
        logger.info(f"lock-in bound at n0={n0} is vacuous ({bound:.3e})")
    return LockInBound(bound=bound, vacuous=bound <= 0, noiseless=False, truncation=truncation, n0=n0,
                       direct=direct, tail=tail, direct_end=direct_end, cutoff_index=cutoff, warm_start=warm,
                       N0=n0_min, valid_n0=valid)


# sparsely projected iterates with polynomial stepsizes

def projected_epsilon_limit(ledger: ConstantLedger) -> float:
    r = ledger.radii
    return min(r.r1in / 4.0, r.r2in / 4.0, 4.0 * ledger["La"], r.r2out - r.r2in)


def _check_eps(ledger: ConstantLedger, eps: float):
    limit = projected_epsilon_limit(ledger)
    if not 0 < eps < limit:
        raise EpsilonOutOfRange(
            f"eps={eps} must lie in (0, min(R1in/4, R2in/4, 4 La, R2out - R2in) = {limit})"
        )


def _check_exponents(alpha_exp: float, beta_exp: float):
    if not 1.0 > alpha_exp > beta_exp > 0.0:
        raise DomainError(f"need 1 > alpha > beta > 0, got alpha={alpha_exp}, beta={beta_exp}")


def radius_assumptions(ledger: ConstantLedger) -> dict:
    """Structural assumptions on the inner radii, checked and reported.

    theta: |theta*| <= R1in / 4.
    w: |lambda(theta)| <= R2in / 4 whenever |theta| <= R1in / 2, verified
    through |W2^-1 v2| + (R1in / 2) |W2^-1 Gamma2| <= R2in / 4. The simpler
    R2in >= 4 |W2^-1 v2| + 2 R1in |Gamma2| is reported alongside.
    """
    spec = ledger.spec
    r1in, r2in = ledger.radii.r1in, ledger.radii.r2in
    theta_norm = spectral_norm(spec.theta_star)
    offset = spectral_norm(spec.lam_offset)
    reach = offset + 0.5 * r1in * spectral_norm(spec.lam_slope)
    simple = 4.0 * offset + 2.0 * r1in * spectral_norm(spec.gamma2)
    return {
        "theta_star_norm": theta_norm,
        "theta_limit": r1in / 4.0,
        "theta_ok": theta_norm <= r1in / 4.0,
        "lambda_reach": reach,
        "lambda_limit": r2in / 4.0,
        "w_ok": reach <= r2in / 4.0,
        "r2in_simple_min": simple,
        "w_simple_ok": r2in >= simple,
    }


def check_radius_assumptions(ledger: ConstantLedger) -> dict:
    report = radius_assumptions(ledger)
    if not report["theta_ok"]:
        raise AssumptionViolated(
            "fixed-point radius assumption",
            f"|theta*| = {report['theta_star_norm']:.6g} exceeds R1in/4 = {report['theta_limit']:.6g}",
        )
    if not report["w_ok"]:
        raise AssumptionViolated(
            "fast-equilibrium radius assumption",
            f"|lambda(theta)| can reach {report['lambda_reach']:.6g} on |theta| <= R1in/2, "
            f"above R2in/4 = {report['lambda_limit']:.6g}",
        )
    return report


@dataclass(frozen=True)
class N0Prime:
    eps: float
    terms: Tuple[float, float, float, float]
    value: float
    power_of_two: int
    assumptions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "terms": [_enc(t) for t in self.terms], "value": _enc(self.value),
                "power_of_two": self.power_of_two, "assumptions": self.assumptions}


def _n0_prime_terms(ledger: ConstantLedger, eps: float, alpha_exp: float, beta_exp: float):
    k1, k2, la = ledger["K1"], ledger["K2"], ledger["La"]
    r1in, r2in = ledger.radii.r1in, ledger.radii.r2in

    def power(base, exponent):
        return 0.0 if base <= 0 else base ** exponent

    first = power(8.0 * ledger["Lz"] * max(ledger["Lc"], 1.0) / eps, 1.0 / min(beta_exp, alpha_exp - beta_exp))
    second = power(4.0 * ledger["Lb"] / eps, 1.0 / beta_exp)
    third = power((1.0 - alpha_exp) / ((1.5 ** (1.0 - alpha_exp) - 1.0) * ledger["q"])
                  * math.log(4.0 * (k1 * r1in + la) / eps), 1.0 / (1.0 - alpha_exp))
    fourth = power((1.0 - beta_exp) / ((1.5 ** (1.0 - beta_exp) - 1.0) * ledger["q2"])
                   * math.log(3.0 * k2 * r2in / eps), 1.0 / (1.0 - beta_exp))
    return first, second, third, fourth


def next_power_of_two(x: float) -> int:
    if x <= 1:
        return 1
    n = 1 << max(0, math.ceil(math.log2(x)) - 1)
    while n < x:
        n <<= 1
    return n


def projected_n0_prime(ledger: ConstantLedger, eps: float, alpha_exp: float, beta_exp: float) -> N0Prime:
    """The starting index from which the projected iterates lock in, and the power of two at or above it."""
    _check_exponents(alpha_exp, beta_exp)
    _check_eps(ledger, eps)
    report = check_radius_assumptions(ledger)
    terms = _n0_prime_terms(ledger, eps, alpha_exp, beta_exp)
    value = max(*terms, 3.0)
    return N0Prime(eps=eps, terms=terms, value=value, power_of_two=next_power_of_two(value), assumptions=report)


def projected_subexp(ledger: ConstantLedger, alpha_exp: float, beta_exp: float, kappa: float = KAPPA,
                     cap: int = SCAN_CAP):
    """(a-side, b-side) closed-form constants; a side is None when c1 is infinite, b side when c4 is."""
    c4 = min(ledger["c2"], ledger["c3"])
    sub_a = subexp_constants(ledger["c1"], kappa, alpha_exp, ledger["q1"], cap) if math.isfinite(ledger["c1"]) else None
    sub_b = subexp_constants(c4, kappa, beta_exp, ledger["q2"], cap) if math.isfinite(c4) else None
    return sub_a, sub_b


@dataclass(frozen=True)
class ProjectedBound:
    bound: float
    vacuous: bool
    noiseless: bool
    eps: float
    n0_prime: int
    N0_prime: float
    valid_n0: bool
    a_term: float
    b_term: float
    subexp_a: Optional[SubexpConstants]
    subexp_b: Optional[SubexpConstants]

    def to_dict(self) -> dict:
        return {
            "bound": _enc(self.bound),
            "vacuous": self.vacuous,
            "noiseless": self.noiseless,
            "eps": self.eps,
            "n0_prime": self.n0_prime,
            "N0_prime": _enc(self.N0_prime),
            "valid_n0": self.valid_n0,
            "a_term": _enc(self.a_term),
            "b_term": _enc(self.b_term),
            "subexp_a": None if self.subexp_a is None else self.subexp_a.to_dict(),
            "subexp_b": None if self.subexp_b is None else self.subexp_b.to_dict(),
        }


def projected_bound(ledger: ConstantLedger, eps: float, alpha_exp: float, beta_exp: float, n0_prime: int,
                     kappa: float = KAPPA, cap: int = SCAN_CAP) -> ProjectedBound:
    """Lower bound on the probability that iterates projected at powers of two lock in after n0'."""
    if n0_prime < 1 or n0_prime & (n0_prime - 1):
        raise DomainError(f"n0' must be a power of two, got {n0_prime}")
    threshold = projected_n0_prime(ledger, eps, alpha_exp, beta_exp)
    valid = n0_prime >= threshold.value
    if not valid:
        logger.warning(f"n0'={n0_prime} is below N0'={threshold.value:.6g}; the bound is evaluated anyway")
    sub_a, sub_b = projected_subexp(ledger, alpha_exp, beta_exp, kappa, cap)
    log_d2 = math.log(ledger.d ** 2)
    a_term = 0.0 if sub_a is None else _exp(math.log(2.0) + log_d2 + log_pre_delta_bound(sub_a, eps, n0_prime))
    b_term = 0.0 if sub_b is None else _exp(math.log(4.0) + log_d2 + log_pre_delta_bound(sub_b, eps, n0_prime))
    noiseless = sub_a is None and sub_b is None
    bound = 1.0 - a_term - b_term
    return ProjectedBound(bound=bound, vacuous=bound <= 0, noiseless=noiseless, eps=eps, n0_prime=n0_prime,
                          N0_prime=threshold.value, valid_n0=valid, a_term=a_term, b_term=b_term,
                          subexp_a=sub_a, subexp_b=sub_b)


def _n0_double_prime(ledger, sub_a, sub_b, eps, delta, alpha_exp, beta_exp) -> float:
    e2 = eps * eps
    log_d2 = math.log(ledger.d ** 2)

    def side(sub, factor, p):
        if sub is None:
            return 0.0
        inner = (math.log(factor) + log_d2 + sub.log_c7 + sub.c5 * e2
                 - (2.0 / p) * math.log(eps) - math.log(delta))
        if inner <= 0:
            return 0.0
        return (inner / (sub.c6 * e2)) ** (1.0 / p)

    return max(side(sub_a, 4.0, alpha_exp), side(sub_b, 8.0, beta_exp))


def n0_double_prime(ledger: ConstantLedger, eps: float, delta: float, alpha_exp: float, beta_exp: float,
                    kappa: float = KAPPA, cap: int = SCAN_CAP) -> float:
    """Starting index past which the projected-iterate bound is at least 1 - delta."""
    _check_exponents(alpha_exp, beta_exp)
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    _check_eps(ledger, eps)
    sub_a, sub_b = projected_subexp(ledger, alpha_exp, beta_exp, kappa, cap)
    return _n0_double_prime(ledger, sub_a, sub_b, eps, delta, alpha_exp, beta_exp)


def epsilon_for_horizon(ledger: ConstantLedger, n: int, delta: float, alpha_exp: float, beta_exp: float,
                        kappa: float = KAPPA, cap: int = SCAN_CAP, tol: float = 1e-10) -> float:
    """Smallest eps with 4 max(N0'(eps), N0''(eps, delta)) <= n, by bisection on log eps.

    Both indices shrink as eps grows, which is all the bisection relies on.
    """
    _check_exponents(alpha_exp, beta_exp)
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    check_radius_assumptions(ledger)
    sub_a, sub_b = projected_subexp(ledger, alpha_exp, beta_exp, kappa, cap)

    def needed(eps):
        n0p = max(*_n0_prime_terms(ledger, eps, alpha_exp, beta_exp), 3.0)
        return 4.0 * max(n0p, _n0_double_prime(ledger, sub_a, sub_b, eps, delta, alpha_exp, beta_exp))

    hi = projected_epsilon_limit(ledger) * (1.0 - 1e-9)
    if needed(hi) > n:
        raise DomainError(f"horizon n={n} is too short: even eps={hi:.6g} needs n >= {needed(hi):.6g}")
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if needed(lo) > n:
            break
    else:
        return lo
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if needed(mid) > n:
            lo = mid
        else:
            hi = mid
    return hi


def rate_exponent(alpha_exp: float, beta_exp: float) -> float:
    """Decay exponent of the rate curve, min(beta/2, alpha - beta)."""
    _check_exponents(alpha_exp, beta_exp)
    return min(beta_exp / 2.0, alpha_exp - beta_exp)


def rate_curve(alpha_exp: float, beta_exp: float, c: float, delta: float, ns: Iterable[int]) -> List[Tuple[int, float]]:
    """C max(n^(-beta/2) sqrt(ln(n/delta)), n^-(alpha-beta)) at each n > 3."""
    _check_exponents(alpha_exp, beta_exp)
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not c > 0:
        raise DomainError(f"C must be positive, got {c}")
    out = []
    for n in ns:
        if n <= 3:
            raise DomainError(f"the rate curve needs n > 3, got {n}")
        value = c * max(n ** (-beta_exp / 2.0) * math.sqrt(math.log(n / delta)), n ** (-(alpha_exp - beta_exp)))
        out.append((int(n), value))
    return out
