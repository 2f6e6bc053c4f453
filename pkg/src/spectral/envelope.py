"""Exponential decay envelopes |exp(-M t)| <= K exp(-q t).

K is obtained constructively: the normalized norm |exp(-(M - qI) t)| is
maximized over a geometric time grid, the best grid point is refined with a
bounded scalar search, and the result is inflated by a slack factor.
Normal matrices take an exact fast path with K = 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from src.common.errors import ConfigError, MatrixExpOverflow, NotStable
from src.model.spec import LinearTTSSpec, min_real_eigenvalue

logger = logging.getLogger("spectral.envelope")

T_MIN = 1e-6
HORIZON_DECAYS = 50.0


@dataclass(frozen=True)
class Envelope:
    q: float
    k: float
    q_prime: float
    t_max: float
    grid_points: int
    fast_path: bool

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "K": self.k,
            "q_prime": self.q_prime,
            "t_max": self.t_max,
            "grid_points": self.grid_points,
            "fast_path": self.fast_path,
        }


@dataclass(frozen=True)
class SpectralConstants:
    q1: float
    q2: float
    k1: float
    k2: float
    q: float
    x1_envelope: Optional[Envelope] = None
    w2_envelope: Optional[Envelope] = None

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ConfigError(f"envelope constants must be >= 1, got K1={self.k1}, K2={self.k2}")
        if not (0 < self.q < self.q_min):
            raise ConfigError(f"joint rate q must lie in (0, q_min={self.q_min}), got {self.q}")

    @property
    def q_min(self) -> float:
        return min(self.q1, self.q2)

    def to_dict(self) -> dict:
        out = {"q1": self.q1, "q2": self.q2, "K1": self.k1, "K2": self.k2, "qMin": self.q_min, "q": self.q}
        if self.x1_envelope is not None:
            out["x1_envelope"] = self.x1_envelope.to_dict()
        if self.w2_envelope is not None:
            out["w2_envelope"] = self.w2_envelope.to_dict()
        return out


def matrix_exp(m, t: float = 1.0) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(m)) or not np.isfinite(t):
        raise MatrixExpOverflow("matrix exponential of non-finite input")
    with np.errstate(over="ignore", invalid="ignore"):
        out = linalg.expm(m * t)
    if not np.all(np.isfinite(out)):
        raise MatrixExpOverflow(f"exp(M t) overflows for |M t| = {np.linalg.norm(m * t, 1):.3e}")
    return out


def _is_normal(m: np.ndarray) -> bool:
    scale = max(1.0, float(np.linalg.norm(m, "fro")) ** 2)
    return float(np.linalg.norm(m @ m.T - m.T @ m, "fro")) <= 1e-12 * scale


def envelope(m, safety: float = 0.9, grid_points: int = 512, slack: float = 1.05) -> Envelope:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not 0 < safety < 1:
        raise ConfigError(f"safety must lie in (0, 1), got {safety}")
    q_prime = min_real_eigenvalue(m)
    if q_prime <= 0:
        raise NotStable(q_prime)
    q = safety * q_prime
    t_max = HORIZON_DECAYS / ((1.0 - safety) * q_prime)

    if _is_normal(m):
        return Envelope(q=q, k=1.0, q_prime=q_prime, t_max=t_max, grid_points=0, fast_path=True)

    shifted = -(m - q * np.eye(m.shape[0]))

    def normalized(t: float) -> float:
        return float(np.linalg.norm(matrix_exp(shifted, t), 2))

    grid = np.concatenate([[0.0], np.geomspace(T_MIN, t_max, max(grid_points, 512))])
    values = np.array([normalized(t) for t in grid])
    best = int(np.argmax(values))
    peak = float(values[best])

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -normalized(t), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * max(hi, 1.0)})
        peak = max(peak, -float(res.fun))

    k = max(1.0, slack * peak)
    logger.debug(f"envelope q'={q_prime:.6g} q={q:.6g} K={k:.6g} over {grid.size} grid points up to t={t_max:.4g}")
    return Envelope(q=q, k=k, q_prime=q_prime, t_max=t_max, grid_points=int(grid.size), fast_path=False)


def spectral_constants(spec: LinearTTSSpec, safety: float = 0.9, q_fraction: float = 0.5,
                       grid_points: int = 512, slack: float = 1.05) -> SpectralConstants:
    if not 0 < q_fraction < 1:
        raise ConfigError(f"q_fraction must lie in (0, 1), got {q_fraction}")
    env1 = envelope(spec.x1, safety, grid_points, slack)
    env2 = envelope(spec.w2, safety, grid_points, slack)
    q = q_fraction * min(env1.q, env2.q)
    return SpectralConstants(q1=env1.q, q2=env2.q, k1=env1.k, k2=env2.k, q=q, x1_envelope=env1, w2_envelope=env2)


if __name__ == "__main__":
    jordan = np.array([[1.0, 10.0], [0.0, 1.0]])
    env = envelope(jordan, safety=0.5)
    print(env)
    rng = np.random.default_rng(0)
    ts = np.exp(rng.uniform(np.log(T_MIN), np.log(env.t_max), 1000))
    worst = max(np.linalg.norm(matrix_exp(-jordan, t), 2) * np.exp(env.q * t) for t in ts)
    assert worst <= env.k, worst
    print(f"max normalized norm on 1000 random times: {worst:.4f} <= K = {env.k:.4f}")
