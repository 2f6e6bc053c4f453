"""Linear two-timescale SA instances.

A spec holds the six arrays of the mean fields

    h1(theta, w) = v1 - gamma1 @ theta - w1 @ w
    h2(theta, w) = v2 - gamma2 @ theta - w2 @ w

together with the quantities derived from them once at construction time:
the slow-scale matrix X1 = gamma1 - w1 W2^-1 gamma2, the offset b1, the
fixed point theta_star and the fast equilibrium map lambda.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from src.common.errors import NotPositiveDefinite, SingularW2, SpecError

logger = logging.getLogger("model.spec")

MAX_CONDITION = 1e12

SPEC_KEYS = ("d", "v1", "gamma1", "w1", "v2", "gamma2", "w2")


def spectral_norm(m) -> float:
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    return float(np.linalg.norm(m, 2))


def min_real_eigenvalue(m: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvals(m).real))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DerivedEquilibria:
    x1: np.ndarray
    b1: np.ndarray
    theta_star: np.ndarray
    w2inv: np.ndarray
    w2_cond: float
    x1_cond: float
    x1_min_eig: float
    w2_min_eig: float


@dataclass(frozen=True, eq=False)
class LinearTTSSpec:
    d: int
    v1: np.ndarray
    gamma1: np.ndarray
    w1: np.ndarray
    v2: np.ndarray
    gamma2: np.ndarray
    w2: np.ndarray
    derived: DerivedEquilibria = field(repr=False)

    # lambda(theta) = lam_offset - lam_slope @ theta
    lam_offset: np.ndarray = field(repr=False)
    lam_slope: np.ndarray = field(repr=False)

    @property
    def x1(self) -> np.ndarray:
        return self.derived.x1

    @property
    def b1(self) -> np.ndarray:
        return self.derived.b1

    @property
    def theta_star(self) -> np.ndarray:
        return self.derived.theta_star

    @property
    def w2inv(self) -> np.ndarray:
        return self.derived.w2inv

    def h1(self, theta, w) -> np.ndarray:
        return self.v1 - self.gamma1 @ theta - self.w1 @ w

    def h2(self, theta, w) -> np.ndarray:
        return self.v2 - self.gamma2 @ theta - self.w2 @ w

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "v1": self.v1.tolist(),
            "gamma1": self.gamma1.tolist(),
            "w1": self.w1.tolist(),
            "v2": self.v2.tolist(),
            "gamma2": self.gamma2.tolist(),
            "w2": self.w2.tolist(),
        }


def _vector(name, value, d):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape != (d,):
        raise SpecError(f"{name} must have shape ({d},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{name} has non-finite entries")
    return arr


def _matrix(name, value, d):
    arr = np.asarray(value, dtype=float)
    if d == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.shape != (d, d):
        raise SpecError(f"{name} must have shape ({d}, {d}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{name} has non-finite entries")
    return arr


def build_spec(v1, gamma1, w1, v2, gamma2, w2) -> LinearTTSSpec:
    d = np.atleast_1d(np.asarray(v1, dtype=float)).shape[0]
    if d < 1:
        raise SpecError("dimension must be positive")

    v1 = _vector("v1", v1, d)
    v2 = _vector("v2", v2, d)
    gamma1 = _matrix("gamma1", gamma1, d)
    w1 = _matrix("w1", w1, d)
    gamma2 = _matrix("gamma2", gamma2, d)
    w2 = _matrix("w2", w2, d)

    w2_cond = float(np.linalg.cond(w2))
    if not np.isfinite(w2_cond) or w2_cond > MAX_CONDITION:
        raise SingularW2(w2_cond)
    w2_lu = linalg.lu_factor(w2)

    w2_min = min_real_eigenvalue(w2)
    if w2_min <= 0:
        raise NotPositiveDefinite("W2", w2_min)

    w2inv_gamma2 = linalg.lu_solve(w2_lu, gamma2)
    w2inv_v2 = linalg.lu_solve(w2_lu, v2)
    x1 = gamma1 - w1 @ w2inv_gamma2
    b1 = v1 - w1 @ w2inv_v2

    x1_min = min_real_eigenvalue(x1)
    if x1_min <= 0:
        raise NotPositiveDefinite("X1", x1_min)

    x1_cond = float(np.linalg.cond(x1))
    if not np.isfinite(x1_cond) or x1_cond > MAX_CONDITION:
        raise SpecError(f"X1 is ill-conditioned (condition number {x1_cond:.3e} > 1e12)")
    theta_star = linalg.solve(x1, b1)
    w2inv = linalg.lu_solve(w2_lu, np.eye(d))

    derived = DerivedEquilibria(
        x1=_frozen(x1),
        b1=_frozen(b1),
        theta_star=_frozen(theta_star),
        w2inv=_frozen(w2inv),
        w2_cond=w2_cond,
        x1_cond=x1_cond,
        x1_min_eig=x1_min,
        w2_min_eig=w2_min,
    )
    logger.debug(f"built spec d={d}, cond(W2)={w2_cond:.3g}, cond(X1)={x1_cond:.3g}")
    return LinearTTSSpec(
        d=d,
        v1=_frozen(v1),
        gamma1=_frozen(gamma1),
        w1=_frozen(w1),
        v2=_frozen(v2),
        gamma2=_frozen(gamma2),
        w2=_frozen(w2),
        derived=derived,
        lam_offset=_frozen(w2inv_v2),
        lam_slope=_frozen(w2inv_gamma2),
    )


def lambda_map(spec: LinearTTSSpec, theta) -> np.ndarray:
    """Fast-scale equilibrium W2^-1 (v2 - gamma2 theta)."""
    return spec.lam_offset - spec.lam_slope @ np.asarray(theta, dtype=float)


def spec_from_dict(data: dict) -> LinearTTSSpec:
    missing = [k for k in SPEC_KEYS if k not in data]
    if missing:
        raise SpecError(f"spec is missing '{missing[0]}'")
    unknown = sorted(set(data) - set(SPEC_KEYS))
    if unknown:
        raise SpecError(f"unknown spec key '{unknown[0]}'")
    spec = build_spec(data["v1"], data["gamma1"], data["w1"], data["v2"], data["gamma2"], data["w2"])
    if spec.d != int(data["d"]):
        raise SpecError(f"declared d={data['d']} does not match vector length {spec.d}")
    return spec
