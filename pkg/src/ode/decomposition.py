"""Error decomposition of the interpolated iterates around the limiting ODEs.

On each step interval the perturbation terms are either constant or linear
in time, so every component integral is propagated exactly with the top
block row of one augmented matrix exponential:

    expm([[-M, I, 0], [0, 0, I], [0, 0, 0]] h)
      = [[exp(-M h), int_0^h exp(-M u) du, int_0^h exp(-M u) (h - u) du], ...]
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.common.errors import DecompositionError, MissingNoiseRecord
from src.engine.simulate import Trajectory
from src.model.schedule import StepsizeSchedule
from src.model.spec import LinearTTSSpec, lambda_map
from src.spectral.envelope import matrix_exp

logger = logging.getLogger("ode.decomposition")

SUBGRID = 33

DECOMPOSITION_COLUMNS = ["n", "e1de", "e1te", "e1md", "e2de", "e2sd", "e2md",
                         "rho", "rho_star", "nu", "nu_star", "good_event"]


def interval_propagators(m: np.ndarray, h: float):
    d = m.shape[0]
    block = np.zeros((3 * d, 3 * d))
    block[:d, :d] = -m
    block[:d, d:2 * d] = np.eye(d)
    block[d:2 * d, 2 * d:] = np.eye(d)
    e = matrix_exp(block, h)
    return e[:d, :d], e[:d, d:2 * d], e[:d, 2 * d:]


@dataclass(frozen=True)
class SupDistances:
    rho: float
    rho_star: float
    nu: float
    nu_star: float


@dataclass(frozen=True, eq=False)
class ErrorDecomposition:
    n: np.ndarray
    e1de: np.ndarray
    e1te: np.ndarray
    e1md: np.ndarray
    e2de: np.ndarray
    e2sd: np.ndarray
    e2md: np.ndarray
    theta_gap: np.ndarray
    z_gap: np.ndarray
    theta_ode: np.ndarray
    z_ode: np.ndarray
    rho: np.ndarray
    rho_star: np.ndarray
    nu: np.ndarray
    nu_star: np.ndarray
    good_event: Optional[np.ndarray]
    subgrid: int

    def theta_residual(self) -> np.ndarray:
        return np.linalg.norm(self.theta_gap - (self.e1de + self.e1te + self.e1md), axis=1)

    def z_residual(self) -> np.ndarray:
        return np.linalg.norm(self.z_gap - (self.e2de + self.e2sd + self.e2md), axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(DECOMPOSITION_COLUMNS)
        norms = [np.linalg.norm(a, axis=1) for a in (self.e1de, self.e1te, self.e1md, self.e2de, self.e2sd, self.e2md)]
        for i in range(self.n.shape[0]):
            row = [int(self.n[i])]
            row += [repr(float(col[i])) for col in norms]
            row += [repr(float(v[i])) for v in (self.rho, self.rho_star, self.nu, self.nu_star)]
            row.append("" if self.good_event is None else int(self.good_event[i]))
            writer.writerow(row)
        return buf.getvalue()


def _segment_sup(start_bar, slope_bar, ode_start, ode_step, anchor, h, subgrid):
    """max over the sub-grid of |bar(x) - ode(x)| on one interval of length h."""
    best = 0.0
    ode_dev = ode_start - anchor
    for j in range(subgrid):
        x = h * j / (subgrid - 1)
        gap = start_bar + slope_bar * x - (anchor + ode_dev)
        best = max(best, float(np.linalg.norm(gap)))
        ode_dev = ode_step @ ode_dev
    return best


def _interval_sups(spec, alpha, beta, theta_k, theta_k1, theta_ode_k, z_k, z_k1, z_ode_k, subgrid) -> SupDistances:
    step_t = matrix_exp(-spec.x1, alpha / (subgrid - 1))
    step_s = matrix_exp(-spec.w2, beta / (subgrid - 1))
    rho = _segment_sup(theta_k, (theta_k1 - theta_k) / alpha, theta_ode_k, step_t, spec.theta_star, alpha, subgrid)
    nu = _segment_sup(z_k, (z_k1 - z_k) / beta, z_ode_k, step_s, np.zeros(spec.d), beta, subgrid)
    # distances to a fixed point along a segment peak at an endpoint
    rho_star = max(float(np.linalg.norm(theta_k - spec.theta_star)), float(np.linalg.norm(theta_k1 - spec.theta_star)))
    nu_star = max(float(np.linalg.norm(z_k)), float(np.linalg.norm(z_k1)))
    return SupDistances(rho=rho, rho_star=rho_star, nu=nu, nu_star=nu_star)


def record_window(trajectory: Trajectory, n0: int, n: int):
    if n < n0:
        raise ValueError(f"n ({n}) must be >= n0 ({n0})")
    i0 = trajectory.index_of(n0)
    i1 = trajectory.index_of(n)
    if np.any(np.diff(trajectory.n[i0:i1 + 1]) != 1):
        raise DecompositionError("decomposition needs every step between n0 and n recorded")
    return i0, i1


def decompose(spec: LinearTTSSpec, schedule: StepsizeSchedule, trajectory: Trajectory, n0: int, n: int,
              radii=None, subgrid: int = SUBGRID) -> ErrorDecomposition:
    if not trajectory.has_noise_record:
        raise MissingNoiseRecord("trajectory was run without record_noise")
    i0, i1 = record_window(trajectory, n0, n)
    if np.any(trajectory.projected[i0 + 1:i1 + 1]):
        raise DecompositionError("a projection moved the iterates inside the window; the identity does not apply")

    d = spec.d
    count = i1 - i0 + 1
    comps = {key: np.zeros((count, d)) for key in ("e1de", "e1te", "e1md", "e2de", "e2sd", "e2md")}
    theta_ode = np.zeros((count, d))
    z_ode = np.zeros((count, d))
    sups = np.zeros((4, count))

    theta = trajectory.theta
    z = trajectory.z
    theta_ode[0] = theta[i0]
    z_ode[0] = z[i0]
    acc = {key: np.zeros(d) for key in comps}

    for j in range(1, count):
        k = n0 + j - 1
        a = schedule.alpha(k)
        b = schedule.beta(k)
        p0, p1, p2 = interval_propagators(spec.x1, a)
        s0, s1, s2 = interval_propagators(spec.w2, b)
        th_k, th_k1 = theta[i0 + j - 1], theta[i0 + j]
        z_k, z_k1 = z[i0 + j - 1], z[i0 + j]

        acc["e1de"] = p0 @ acc["e1de"] + p2 @ (spec.x1 @ ((th_k1 - th_k) / a))
        acc["e1te"] = p0 @ acc["e1te"] + p1 @ (-(spec.w1 @ z_k))
        acc["e1md"] = p0 @ acc["e1md"] + p1 @ trajectory.m1[i0 + j]
        acc["e2de"] = s0 @ acc["e2de"] + s2 @ (spec.w2 @ ((z_k1 - z_k) / b))
        acc["e2sd"] = s0 @ acc["e2sd"] + s1 @ ((lambda_map(spec, th_k) - lambda_map(spec, th_k1)) / b)
        acc["e2md"] = s0 @ acc["e2md"] + s1 @ trajectory.m2[i0 + j]
        for key in comps:
            comps[key][j] = acc[key]

        sd = _interval_sups(spec, a, b, th_k, th_k1, theta_ode[j - 1], z_k, z_k1, z_ode[j - 1], subgrid)
        sups[:, j] = (sd.rho, sd.rho_star, sd.nu, sd.nu_star)
        theta_ode[j] = spec.theta_star + p0 @ (theta_ode[j - 1] - spec.theta_star)
        z_ode[j] = s0 @ z_ode[j - 1]

    good = None
    if radii is not None:
        good = _good_flags(trajectory, spec.theta_star, radii, i0, i1)

    return ErrorDecomposition(
        n=trajectory.n[i0:i1 + 1].copy(),
        theta_gap=theta[i0:i1 + 1] - theta_ode,
        z_gap=z[i0:i1 + 1] - z_ode,
        theta_ode=theta_ode,
        z_ode=z_ode,
        rho=sups[0],
        rho_star=sups[1],
        nu=sups[2],
        nu_star=sups[3],
        good_event=good,
        subgrid=subgrid,
        **comps,
    )


def sup_distances(spec: LinearTTSSpec, schedule: StepsizeSchedule, trajectory: Trajectory, n0: int, n: int,
                  subgrid: int = SUBGRID) -> SupDistances:
    """rho, rho*, nu, nu* on the interval from step n to step n+1, ODEs started at n0."""
    i0, i1 = record_window(trajectory, n0, n + 1)
    t_n0, t_n, s_n0, s_n = schedule.t(n0), schedule.t(n), schedule.s(n0), schedule.s(n)
    theta_ode_n = spec.theta_star + matrix_exp(-spec.x1, t_n - t_n0) @ (trajectory.theta[i0] - spec.theta_star)
    z_ode_n = matrix_exp(-spec.w2, s_n - s_n0) @ trajectory.z[i0]
    k = i1 - 1
    return _interval_sups(spec, schedule.alpha(n), schedule.beta(n),
                          trajectory.theta[k], trajectory.theta[k + 1], theta_ode_n,
                          trajectory.z[k], trajectory.z[k + 1], z_ode_n, subgrid)


def _good_flags(trajectory, theta_star, radii, i0, i1):
    inside = ((np.linalg.norm(trajectory.theta[i0:i1 + 1] - theta_star, axis=1) <= radii.r1out)
              & (np.linalg.norm(trajectory.z[i0:i1 + 1], axis=1) <= radii.r2out))
    return np.logical_and.accumulate(inside)


def good_event(trajectory: Trajectory, radii, n0: int, n: int) -> bool:
    """Whether the interpolated iterates stay in the outer balls over [n0, n].

    The interpolants are linear between knots and the balls are convex, so
    checking the knots is exact.
    """
    i0, i1 = record_window(trajectory, n0, n)
    return bool(_good_flags(trajectory, trajectory.theta_star, radii, i0, i1)[-1])
