"""Numerical checks of the deterministic estimates used in the lock-in argument."""
from __future__ import annotations

import math

import numpy as np

from src.engine.simulate import Trajectory
from src.model.schedule import StepsizeSchedule

from .decomposition import record_window


def dominating_decay_integral(schedule: StepsizeSchedule, q1: float, q2: float, q: float, n0: int, n: int):
    """Sum over steps of int exp(-q1 (t_n - tau)) exp(-q2 (xi(tau) - s_n0)) dtau, and its ceiling.

    The ceiling exp(-q (t_n - t_n0)) / ((q_min - q) e) holds whenever beta_k >= alpha_k.
    """
    if n < n0:
        raise ValueError(f"n ({n}) must be >= n0 ({n0})")
    q_min = min(q1, q2)
    if not 0 < q < q_min:
        raise ValueError(f"q must lie in (0, {q_min})")
    t, s = schedule.times(n0, n)
    alphas = schedule.alpha_block(n0, n)
    betas = schedule.beta_block(n0, n)
    total = 0.0
    for k in range(n - n0):
        a, b = alphas[k], betas[k]
        rate = q1 - q2 * b / a
        log_pref = -q1 * (t[-1] - t[k]) - q2 * (s[k] - s[0])
        piece = math.expm1(rate * a) / rate if rate != 0 else a
        total += math.exp(log_pref) * piece
    ceiling = math.exp(-q * (t[-1] - t[0])) / ((q_min - q) * math.e)
    return total, ceiling


def increment_norms(schedule: StepsizeSchedule, trajectory: Trajectory, n0: int, n: int):
    """|theta_{k+1} - theta_k| / alpha_k and |z_{k+1} - z_k| / beta_k for k in [n0, n)."""
    i0, i1 = record_window(trajectory, n0, n)
    alphas = schedule.alpha_block(n0, n)
    betas = schedule.beta_block(n0, n)
    d_theta = np.linalg.norm(np.diff(trajectory.theta[i0:i1 + 1], axis=0), axis=1) / alphas
    d_z = np.linalg.norm(np.diff(trajectory.z[i0:i1 + 1], axis=0), axis=1) / betas
    return d_theta, d_z


def perturbation_ceilings(ledger, schedule: StepsizeSchedule, n0: int, n: int) -> dict:
    """Ceilings on the discretization and slow-drift components over steps [n0, n)."""
    alphas = schedule.alpha_block(n0, max(n, n0 + 1))
    betas = schedule.beta_block(n0, max(n, n0 + 1))
    return {
        "e1de": ledger["L1de"] * float(alphas.max()),
        "e2de": ledger["L2de"] * float(betas.max()),
        "e2sd": ledger["L2sd"] * float((alphas / betas).max()),
    }
