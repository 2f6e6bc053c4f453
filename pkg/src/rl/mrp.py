"""Finite Markov reward processes with linear features."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from src.common.errors import ConfigError, NonErgodic, RankDeficientFeatures

logger = logging.getLogger("rl.mrp")

UNIFORM_MIX = 0.01
MAX_ATTEMPTS = 100
ROW_TOL = 1e-12
MRP_KEYS = ("P", "r", "gamma", "Phi", "seed")


@dataclass(frozen=True, eq=False)
class MDPSpec:
    p: np.ndarray
    r: np.ndarray
    gamma: float
    phi: np.ndarray
    pi: np.ndarray
    seed: Optional[int] = field(default=None)

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    def to_dict(self) -> dict:
        return mrp_to_dict(self)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Left eigenvector of P for eigenvalue 1, normalized to a distribution."""
    values, vectors = linalg.eig(p.T)
    unit = np.nonzero(np.abs(values - 1.0) < 1e-8)[0]
    if unit.size == 0:
        raise NonErgodic("transition matrix has no eigenvalue 1; is it row-stochastic?")
    if unit.size > 1:
        raise NonErgodic(f"eigenvalue 1 has multiplicity {unit.size}; the chain has no unique stationary distribution")
    pi = np.real(vectors[:, unit[0]])
    pi = pi / pi.sum()
    # eigenvector round-off can leave entries like -1e-17
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _validate(p, r, gamma, phi):
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
        raise ConfigError(f"P must be a non-empty square matrix, got shape {p.shape}")
    n = p.shape[0]
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_TOL):
        raise ConfigError("P must be row-stochastic (non-negative rows summing to 1)")
    if r.shape != (n,):
        raise ConfigError(f"r must have {n} entries, got shape {r.shape}")
    if np.any(np.abs(r) > 1.0):
        raise ConfigError("rewards must satisfy |r(s)| <= 1")
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must lie in [0, 1), got {gamma}")
    if phi.ndim != 2 or phi.shape[0] != n:
        raise ConfigError(f"Phi must have {n} rows, got shape {phi.shape}")
    if np.any(np.linalg.norm(phi, axis=1) > 1.0 + ROW_TOL):
        raise ConfigError("feature vectors must satisfy |phi(s)| <= 1")
    if np.linalg.matrix_rank(phi) < phi.shape[1]:
        raise RankDeficientFeatures(f"Phi has rank {np.linalg.matrix_rank(phi)} < d={phi.shape[1]}")


def _random_features(rng: np.random.Generator, n_states: int, d: int) -> np.ndarray:
    for attempt in range(MAX_ATTEMPTS):
        phi = rng.standard_normal((n_states, d))
        norms = np.linalg.norm(phi, axis=1, keepdims=True)
        phi = phi / np.maximum(norms, 1.0)
        if np.linalg.matrix_rank(phi) == d:
            return phi
        logger.debug(f"feature draw {attempt} was rank deficient, retrying")
    raise RankDeficientFeatures(f"no full-rank {n_states}x{d} feature matrix after {MAX_ATTEMPTS} draws")


def random_mrp(n_states: int, d: int, gamma: float, seed: int) -> MDPSpec:
    if n_states < 1 or d < 1:
        raise ConfigError("n_states and d must be positive")
    if d > n_states:
        raise RankDeficientFeatures(f"d={d} features cannot have full rank over {n_states} states")
    rng = np.random.default_rng(seed)
    rows = rng.dirichlet(np.ones(n_states), size=n_states)
    p = (1.0 - UNIFORM_MIX) * rows + UNIFORM_MIX / n_states
    p = p / p.sum(axis=1, keepdims=True)
    r = rng.uniform(-1.0, 1.0, size=n_states)
    phi = _random_features(rng, n_states, d)
    return build_mrp(p, r, gamma, phi, seed=seed)


def build_mrp(p, r, gamma: float, phi, seed: Optional[int] = None) -> MDPSpec:
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    gamma = float(gamma)
    _validate(p, r, gamma, phi)
    pi = stationary_distribution(p)
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > 1e-10:
        logger.warning(f"stationary distribution residual {residual:.2e} exceeds 1e-10")
    logger.debug(f"built MRP with {p.shape[0]} states, d={phi.shape[1]}, gamma={gamma}")
    return MDPSpec(p=_frozen(p), r=_frozen(r), gamma=gamma, phi=_frozen(phi), pi=_frozen(pi), seed=seed)


def mrp_to_dict(mdp: MDPSpec) -> dict:
    return {"P": mdp.p.tolist(), "r": mdp.r.tolist(), "gamma": mdp.gamma, "Phi": mdp.phi.tolist(), "seed": mdp.seed}


def mrp_from_dict(data: dict) -> MDPSpec:
    unknown = sorted(set(data) - set(MRP_KEYS))
    if unknown:
        raise ConfigError(f"unknown MRP key '{unknown[0]}'")
    missing = [k for k in ("P", "r", "gamma", "Phi") if k not in data]
    if missing:
        raise ConfigError(f"MRP is missing '{missing[0]}'")
    return build_mrp(data["P"], data["r"], data["gamma"], data["Phi"], seed=data.get("seed"))
