"""Gradient temporal-difference methods as linear two-timescale iterations.

With A = E[phi (phi - gamma phi')^T], C = E[phi phi^T] and b = E[r phi]
under the stationary distribution, each method's expected update is one of
the linear mean fields, and the sampled update minus its expectation is the
martingale difference noise.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.common.errors import ConfigError
from src.model.radii import NoiseBounds
from src.model.spec import LinearTTSSpec, build_spec, spectral_norm

from .mrp import MDPSpec

logger = logging.getLogger("rl.gtd")


class GTDVariant(str, enum.Enum):
    GTD0 = "gtd0"
    GTD2 = "gtd2"
    TDC = "tdc"

    @classmethod
    def parse(cls, value) -> "GTDVariant":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown GTD variant '{value}' (expected gtd0, gtd2 or tdc)") from None


@dataclass(frozen=True, eq=False)
class GTDMatrices:
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray


def exact_matrices(mdp: MDPSpec) -> GTDMatrices:
    weighted = mdp.phi * mdp.pi[:, None]
    next_phi = mdp.p @ mdp.phi
    a = weighted.T @ (mdp.phi - mdp.gamma * next_phi)
    c = weighted.T @ mdp.phi
    b = weighted.T @ mdp.r
    return GTDMatrices(a=a, c=c, b=b)


def noise_bounds(matrices: GTDMatrices, gamma: float, variant: GTDVariant) -> NoiseBounds:
    a_norm = spectral_norm(matrices.a)
    b_norm = spectral_norm(matrices.b)
    c_norm = spectral_norm(matrices.c)
    if variant is GTDVariant.GTD0:
        return NoiseBounds(m1=1.0 + gamma + a_norm, m2=1.0 + max(b_norm, gamma + a_norm))
    if variant is GTDVariant.GTD2:
        return NoiseBounds(m1=1.0 + gamma + a_norm, m2=1.0 + max(b_norm, gamma + a_norm, c_norm))
    m = 2.0 + gamma + a_norm + c_norm
    return NoiseBounds(m1=m, m2=m)


def closed_form_x1(matrices: GTDMatrices, variant: GTDVariant) -> np.ndarray:
    """A^T A for GTD(0), A^T C^-1 A for GTD2 and TDC."""
    if variant is GTDVariant.GTD0:
        return matrices.a.T @ matrices.a
    return matrices.a.T @ np.linalg.solve(matrices.c, matrices.a)


def gtd_spec(mdp: MDPSpec, variant: GTDVariant,
             matrices: Optional[GTDMatrices] = None) -> Tuple[LinearTTSSpec, NoiseBounds]:
    variant = GTDVariant.parse(variant)
    m = matrices or exact_matrices(mdp)
    d = mdp.d
    if variant is GTDVariant.TDC:
        spec = build_spec(m.b, m.a, m.c - m.a.T, m.b, m.a, m.c)
    else:
        w2 = np.eye(d) if variant is GTDVariant.GTD0 else m.c
        spec = build_spec(np.zeros(d), np.zeros((d, d)), -m.a.T, m.b, m.a, w2)
    bounds = noise_bounds(m, mdp.gamma, variant)
    logger.debug(f"{variant.value} spec: m1={bounds.m1:.4g}, m2={bounds.m2:.4g}")
    return spec, bounds


class Transition(NamedTuple):
    state: int
    next_state: int
    phi: np.ndarray
    phi_next: np.ndarray
    reward: float


def sample_transition(mdp: MDPSpec, rng: np.random.Generator, state: Optional[int] = None) -> Transition:
    """s ~ pi (or the given state) and s' ~ P(s, .)."""
    s = int(rng.choice(mdp.n_states, p=mdp.pi)) if state is None else int(state)
    s_next = int(rng.choice(mdp.n_states, p=mdp.p[s]))
    return Transition(s, s_next, mdp.phi[s], mdp.phi[s_next], float(mdp.r[s]))


def td_error(gamma: float, tr: Transition, theta: np.ndarray) -> float:
    return tr.reward + gamma * float(theta @ tr.phi_next) - float(theta @ tr.phi)


def sampled_directions(variant: GTDVariant, gamma: float, tr: Transition, theta: np.ndarray, w: np.ndarray):
    """Sampled (theta, w) update directions and the TD error."""
    delta = td_error(gamma, tr, theta)
    phi_w = float(tr.phi @ w)
    if variant is GTDVariant.TDC:
        g1 = delta * tr.phi - gamma * tr.phi_next * phi_w
    else:
        g1 = (tr.phi - gamma * tr.phi_next) * phi_w
    if variant is GTDVariant.GTD0:
        g2 = delta * tr.phi - w
    else:
        g2 = (delta - phi_w) * tr.phi
    return g1, g2, delta


class SampleStep(NamedTuple):
    g1: np.ndarray
    g2: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    td_error: float
    transition: Transition


def sample_step(mdp: MDPSpec, variant: GTDVariant, rng: np.random.Generator, theta, w,
                spec: Optional[LinearTTSSpec] = None, state: Optional[int] = None) -> SampleStep:
    variant = GTDVariant.parse(variant)
    if spec is None:
        spec, _ = gtd_spec(mdp, variant)
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    tr = sample_transition(mdp, rng, state)
    g1, g2, delta = sampled_directions(variant, mdp.gamma, tr, theta, w)
    return SampleStep(g1=g1, g2=g2, m1=g1 - spec.h1(theta, w), m2=g2 - spec.h2(theta, w),
                      td_error=delta, transition=tr)


class SamplingNoise:
    """Martingale differences of a GTD method, drawn one transition per step.

    With markov=True the next transition starts from the previous s' instead
    of a fresh draw from the stationary distribution; the differences are
    then no longer conditionally centred.
    """

    kind = "sampling"

    def __init__(self, mdp: MDPSpec, variant: GTDVariant, seed, markov: bool = False,
                 spec: Optional[LinearTTSSpec] = None):
        self.mdp = mdp
        self.variant = GTDVariant.parse(variant)
        self.seed = seed
        self.markov = bool(markov)
        self.spec = spec if spec is not None else gtd_spec(mdp, self.variant)[0]
        self.d = mdp.d
        self.rng = np.random.default_rng(seed)
        self._state: Optional[int] = None
        self.last_td_error: Optional[float] = None

    def draw(self, theta, w):
        step = sample_step(self.mdp, self.variant, self.rng, theta, w, spec=self.spec,
                           state=self._state if self.markov else None)
        self._state = step.transition.next_state
        self.last_td_error = step.td_error
        return step.m1, step.m2

    def describe(self) -> dict:
        return {"kind": self.kind, "variant": self.variant.value, "markov": self.markov}


def mspbe(matrices: GTDMatrices, theta) -> float:
    """1/2 (b - A theta)^T C^-1 (b - A theta)."""
    residual = matrices.b - matrices.a @ np.asarray(theta, dtype=float)
    return 0.5 * float(residual @ np.linalg.solve(matrices.c, residual))


def neu(matrices: GTDMatrices, theta) -> float:
    """1/2 |b - A theta|^2."""
    residual = matrices.b - matrices.a @ np.asarray(theta, dtype=float)
    return 0.5 * float(residual @ residual)
