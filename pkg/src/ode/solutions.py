from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.model.spec import LinearTTSSpec
from src.spectral.envelope import matrix_exp


def theta_ode_at(spec: LinearTTSSpec, t: float, t_n0: float, theta_n0) -> np.ndarray:
    if t < t_n0:
        raise ValueError(f"t={t} precedes the start time {t_n0}")
    theta_n0 = np.asarray(theta_n0, dtype=float)
    if t == t_n0:
        return theta_n0.copy()
    return spec.theta_star + matrix_exp(-spec.x1, t - t_n0) @ (theta_n0 - spec.theta_star)


def z_ode_at(spec: LinearTTSSpec, s: float, s_n0: float, z_n0) -> np.ndarray:
    if s < s_n0:
        raise ValueError(f"s={s} precedes the start time {s_n0}")
    z_n0 = np.asarray(z_n0, dtype=float)
    if s == s_n0:
        return z_n0.copy()
    return matrix_exp(-spec.w2, s - s_n0) @ z_n0


@dataclass(frozen=True, eq=False)
class OdeSolution:
    spec: LinearTTSSpec
    kind: str
    start: float
    point: np.ndarray

    def __call__(self, time: float) -> np.ndarray:
        if self.kind == "theta":
            return theta_ode_at(self.spec, time, self.start, self.point)
        return z_ode_at(self.spec, time, self.start, self.point)


def theta_solution(spec, t_n0, theta_n0) -> OdeSolution:
    return OdeSolution(spec, "theta", float(t_n0), np.array(theta_n0, dtype=float))


def z_solution(spec, s_n0, z_n0) -> OdeSolution:
    return OdeSolution(spec, "z", float(s_n0), np.array(z_n0, dtype=float))
