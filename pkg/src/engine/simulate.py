from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.common.errors import ConfigError, NonFinite
from src.model.radii import Radii
from src.model.schedule import StepsizeSchedule
from src.model.spec import LinearTTSSpec, lambda_map

logger = logging.getLogger("engine.simulate")


@dataclass(frozen=True, eq=False)
class IterateState:
    n: int
    theta: np.ndarray
    w: np.ndarray
    z: np.ndarray
    projected: Tuple[bool, bool] = (False, False)
    # noise that produced this state from its predecessor
    m1: Optional[np.ndarray] = field(default=None, repr=False)
    m2: Optional[np.ndarray] = field(default=None, repr=False)


def initial_state(spec: LinearTTSSpec, n: int, theta, w) -> IterateState:
    theta = np.array(theta, dtype=float).reshape(spec.d)
    w = np.array(w, dtype=float).reshape(spec.d)
    return IterateState(n=n, theta=theta, w=w, z=w - lambda_map(spec, theta))


def is_power_of_two(n: int) -> bool:
    # 1 = 2**0 counts
    return n > 0 and (n & (n - 1)) == 0


def _ball(x: np.ndarray, radius: float) -> Tuple[np.ndarray, bool]:
    norm = float(np.linalg.norm(x))
    if norm <= radius:
        return x, False
    return x * (radius / norm), True


def sparse_project(n: int, radius: float, x) -> np.ndarray:
    if radius <= 0:
        raise ValueError("projection radius must be positive")
    x = np.asarray(x, dtype=float)
    if not is_power_of_two(n):
        return x
    return _ball(x, radius)[0]


def _advance(spec: LinearTTSSpec, alpha: float, beta: float, theta, w, m1, m2):
    theta_next = theta + alpha * (spec.v1 - spec.gamma1 @ theta - spec.w1 @ w + m1)
    w_next = w + beta * (spec.v2 - spec.gamma2 @ theta - spec.w2 @ w + m2)
    return theta_next, w_next


def _check_finite(index: int, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite(index)


def step_unprojected(spec: LinearTTSSpec, schedule: StepsizeSchedule, noise, state: IterateState) -> IterateState:
    m1, m2 = noise.draw(state.theta, state.w)
    theta, w = _advance(spec, schedule.alpha(state.n), schedule.beta(state.n), state.theta, state.w, m1, m2)
    _check_finite(state.n + 1, theta, w)
    return IterateState(n=state.n + 1, theta=theta, w=w, z=w - lambda_map(spec, theta), m1=m1, m2=m2)


def z_update_direct(spec: LinearTTSSpec, schedule: StepsizeSchedule, m1, m2, state: IterateState) -> np.ndarray:
    """z_{n+1} from the transformed recurrence, driven by the same noise samples."""
    alpha, beta = schedule.alpha(state.n), schedule.beta(state.n)
    theta_next, _ = _advance(spec, alpha, beta, state.theta, state.w, m1, m2)
    return (state.z - beta * (spec.w2 @ state.z) + beta * np.asarray(m2)
            + lambda_map(spec, state.theta) - lambda_map(spec, theta_next))


def step_projected(spec: LinearTTSSpec, schedule: StepsizeSchedule, noise, radii: Radii,
                   state: IterateState) -> IterateState:
    nxt = step_unprojected(spec, schedule, noise, state)
    if not is_power_of_two(nxt.n):
        return nxt
    theta, moved_theta = _ball(nxt.theta, radii.r1in / 2.0)
    w, moved_w = _ball(nxt.w, radii.r2in / 2.0)
    return IterateState(n=nxt.n, theta=theta, w=w, z=w - lambda_map(spec, theta),
                        projected=(moved_theta, moved_w), m1=nxt.m1, m2=nxt.m2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    n: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    z: np.ndarray
    projected: np.ndarray
    theta_star: np.ndarray
    stride: int
    projected_mode: bool
    m1: Optional[np.ndarray] = field(default=None, repr=False)
    m2: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return int(self.n.shape[0])

    @property
    def has_noise_record(self) -> bool:
        return self.m1 is not None and self.m2 is not None

    @property
    def err_theta(self) -> np.ndarray:
        return np.linalg.norm(self.theta - self.theta_star, axis=1)

    @property
    def err_z(self) -> np.ndarray:
        return np.linalg.norm(self.z, axis=1)

    def index_of(self, n: int) -> int:
        i = int(np.searchsorted(self.n, n))
        if i >= len(self) or self.n[i] != n:
            raise KeyError(f"step {n} was not recorded")
        return i

    def records(self) -> List[IterateState]:
        out = []
        for i in range(len(self)):
            out.append(IterateState(
                n=int(self.n[i]),
                theta=self.theta[i],
                w=self.w[i],
                z=self.z[i],
                projected=(bool(self.projected[i, 0]), bool(self.projected[i, 1])),
                m1=None if self.m1 is None else self.m1[i],
                m2=None if self.m2 is None else self.m2[i],
            ))
        return out


def run_trajectory(spec: LinearTTSSpec, schedule: StepsizeSchedule, noise, n_start: int, theta_start, w_start,
                   n_end: int, stride: int = 1, radii: Optional[Radii] = None,
                   record_noise: bool = False) -> Trajectory:
    """Iterate from n_start to n_end, projecting at powers of two when radii are given.

    Records n_start, every stride-th step after it, n_end and every
    power-of-two index. With record_noise the noise that produced
    each record is kept, which needs stride 1.
    """
    if n_end <= n_start:
        raise ConfigError(f"n_end ({n_end}) must exceed n_start ({n_start})")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if record_noise and stride != 1:
        raise ConfigError("recording noise needs stride 1")

    d = spec.d
    theta = np.array(theta_start, dtype=float).reshape(d)
    w = np.array(w_start, dtype=float).reshape(d)
    alphas = schedule.alpha_block(n_start, n_end)
    betas = schedule.beta_block(n_start, n_end)
    r1 = r2 = None
    if radii is not None:
        r1, r2 = radii.r1in / 2.0, radii.r2in / 2.0

    ns, thetas, ws, flags = [n_start], [theta.copy()], [w.copy()], [(False, False)]
    m1s, m2s = [np.zeros(d)], [np.zeros(d)]

    for i in range(n_end - n_start):
        m1, m2 = noise.draw(theta, w)
        theta, w = _advance(spec, alphas[i], betas[i], theta, w, m1, m2)
        k = n_start + i + 1
        flag = (False, False)
        pow2 = is_power_of_two(k)
        if pow2 and radii is not None:
            theta, moved_theta = _ball(theta, r1)
            w, moved_w = _ball(w, r2)
            flag = (moved_theta, moved_w)
        _check_finite(k, theta, w)
        if (k - n_start) % stride == 0 or k == n_end or pow2:
            ns.append(k)
            thetas.append(theta.copy())
            ws.append(w.copy())
            flags.append(flag)
            if record_noise:
                m1s.append(np.asarray(m1, dtype=float).copy())
                m2s.append(np.asarray(m2, dtype=float).copy())

    theta_arr = np.array(thetas)
    w_arr = np.array(ws)
    z_arr = w_arr - (spec.lam_offset[None, :] - theta_arr @ spec.lam_slope.T)
    return Trajectory(
        n=np.array(ns, dtype=np.int64),
        theta=theta_arr,
        w=w_arr,
        z=z_arr,
        projected=np.array(flags, dtype=bool).reshape(-1, 2),
        theta_star=np.array(spec.theta_star),
        stride=stride,
        projected_mode=radii is not None,
        m1=np.array(m1s) if record_noise else None,
        m2=np.array(m2s) if record_noise else None,
    )
