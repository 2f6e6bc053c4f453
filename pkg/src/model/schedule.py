from __future__ import annotations

import logging
import threading
from typing import NamedTuple, Optional

import numpy as np

from src.common.errors import HorizonExceeded, ScheduleError

logger = logging.getLogger("model.schedule")

_CHUNK = 4096


class Stepsizes(NamedTuple):
    alpha: float
    beta: float
    eta: float
    t: float
    s: float


class StepsizeSchedule:
    """Non-increasing stepsize pair (alpha_n, beta_n) with alpha_n / beta_n <= 1.

    t_n and s_n are prefix sums of alpha and beta. They are cached and the
    cache only ever grows; growth happens under a lock so concurrent readers
    see a consistent prefix.
    """

    kind = "abstract"
    horizon: Optional[int] = None

    def __init__(self):
        self._lock = threading.Lock()
        self._t = np.zeros(1)
        self._s = np.zeros(1)

    # pickling drops the lock and the cache
    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        state["_t"] = np.zeros(1)
        state["_s"] = np.zeros(1)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def _params(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, StepsizeSchedule) and self._params() == other._params()

    def __hash__(self):
        return hash(self._params())

    def alpha_block(self, lo: int, hi: int) -> np.ndarray:
        raise NotImplementedError

    def beta_block(self, lo: int, hi: int) -> np.ndarray:
        raise NotImplementedError

    def eta_block(self, lo: int, hi: int) -> np.ndarray:
        return self.alpha_block(lo, hi) / self.beta_block(lo, hi)

    def alpha(self, n: int) -> float:
        return float(self.alpha_block(n, n + 1)[0])

    def beta(self, n: int) -> float:
        return float(self.beta_block(n, n + 1)[0])

    def eta(self, n: int) -> float:
        return self.alpha(n) / self.beta(n)

    def _grow(self, n: int):
        with self._lock:
            have = self._t.shape[0] - 1
            if have >= n:
                return
            target = max(n, 2 * have, _CHUNK)
            if self.horizon is not None:
                target = min(max(target, n), self.horizon)
            a = self.alpha_block(have, target)
            b = self.beta_block(have, target)
            self._t = np.concatenate([self._t, self._t[-1] + np.cumsum(a)])
            self._s = np.concatenate([self._s, self._s[-1] + np.cumsum(b)])

    def t(self, n: int) -> float:
        if n < 0:
            raise ValueError("n must be non-negative")
        if self.horizon is not None and n > self.horizon:
            raise HorizonExceeded(n, self.horizon)
        if n >= self._t.shape[0]:
            self._grow(n)
        return float(self._t[n])

    def s(self, n: int) -> float:
        if n < 0:
            raise ValueError("n must be non-negative")
        if self.horizon is not None and n > self.horizon:
            raise HorizonExceeded(n, self.horizon)
        if n >= self._s.shape[0]:
            self._grow(n)
        return float(self._s[n])

    def times(self, lo: int, hi: int):
        """t_n and s_n for n in [lo, hi]."""
        self.t(hi)
        self.s(hi)
        return self._t[lo:hi + 1].copy(), self._s[lo:hi + 1].copy()

    def to_dict(self) -> dict:
        raise NotImplementedError


class PolynomialSchedule(StepsizeSchedule):
    kind = "polynomial"

    def __init__(self, alpha_exp: float, beta_exp: float):
        super().__init__()
        alpha_exp = float(alpha_exp)
        beta_exp = float(beta_exp)
        if alpha_exp == beta_exp:
            raise ScheduleError("alpha and beta exponents are equal; that is a single-timescale iteration")
        if not (1.0 > alpha_exp > beta_exp > 0.0):
            raise ScheduleError(f"need 1 > alpha > beta > 0, got alpha={alpha_exp}, beta={beta_exp}")
        self.alpha_exp = alpha_exp
        self.beta_exp = beta_exp

    def _params(self):
        return (self.kind, self.alpha_exp, self.beta_exp)

    def alpha_block(self, lo, hi):
        return (np.arange(lo, hi, dtype=float) + 1.0) ** (-self.alpha_exp)

    def beta_block(self, lo, hi):
        return (np.arange(lo, hi, dtype=float) + 1.0) ** (-self.beta_exp)

    def alpha(self, n):
        return (n + 1.0) ** (-self.alpha_exp)

    def beta(self, n):
        return (n + 1.0) ** (-self.beta_exp)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha_exp, "beta": self.beta_exp}

    def __repr__(self):
        return f"PolynomialSchedule(alpha={self.alpha_exp}, beta={self.beta_exp})"


class ExplicitSchedule(StepsizeSchedule):
    kind = "explicit"

    def __init__(self, alphas, betas):
        super().__init__()
        a = np.asarray(alphas, dtype=float)
        b = np.asarray(betas, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ScheduleError("explicit alphas and betas must be non-empty sequences of equal length")
        if np.any(a <= 0) or np.any(b <= 0) or np.any(a > 1) or np.any(b > 1):
            raise ScheduleError("explicit stepsizes must lie in (0, 1]")
        eta = a / b
        if np.any(eta > 1):
            raise ScheduleError(f"alpha_n / beta_n exceeds 1 at n={int(np.argmax(eta > 1))}")
        for name, seq in (("alpha", a), ("beta", b), ("eta", eta)):
            if np.any(np.diff(seq) > 0):
                raise ScheduleError(f"explicit {name} sequence must be non-increasing")
        self._alphas = a
        self._betas = b
        self.horizon = int(a.size)

    def _params(self):
        return (self.kind, tuple(self._alphas.tolist()), tuple(self._betas.tolist()))

    def _check(self, hi):
        if hi > self.horizon:
            raise HorizonExceeded(hi - 1, self.horizon)

    def alpha_block(self, lo, hi):
        self._check(hi)
        return self._alphas[lo:hi].copy()

    def beta_block(self, lo, hi):
        self._check(hi)
        return self._betas[lo:hi].copy()

    def to_dict(self):
        return {"kind": self.kind, "alphas": self._alphas.tolist(), "betas": self._betas.tolist()}

    def __repr__(self):
        return f"ExplicitSchedule(horizon={self.horizon})"


def stepsizes_at(schedule: StepsizeSchedule, n: int) -> Stepsizes:
    if n < 0:
        raise ValueError("n must be non-negative")
    alpha = schedule.alpha(n)
    beta = schedule.beta(n)
    return Stepsizes(alpha, beta, alpha / beta, schedule.t(n), schedule.s(n))


def schedule_from_dict(data: dict) -> StepsizeSchedule:
    kind = data.get("kind", "polynomial")
    if kind == "polynomial":
        unknown = sorted(set(data) - {"kind", "alpha", "beta"})
        if unknown:
            raise ScheduleError(f"unknown schedule key '{unknown[0]}'")
        if "alpha" not in data or "beta" not in data:
            raise ScheduleError("polynomial schedule needs 'alpha' and 'beta'")
        return PolynomialSchedule(data["alpha"], data["beta"])
    if kind == "explicit":
        unknown = sorted(set(data) - {"kind", "alphas", "betas"})
        if unknown:
            raise ScheduleError(f"unknown schedule key '{unknown[0]}'")
        return ExplicitSchedule(data.get("alphas", []), data.get("betas", []))
    raise ScheduleError(f"unknown schedule kind '{kind}'")
