from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from src.common.errors import ConfigError

from .spec import LinearTTSSpec, spectral_norm


@dataclass(frozen=True)
class NoiseBounds:
    """Affine bounds on the martingale differences: |M_i| <= m_i (1 + |theta| + |w|)."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (self.m1 >= 0 and self.m2 >= 0) or not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise ConfigError(f"noise bounds must be finite and non-negative, got m1={self.m1}, m2={self.m2}")

    @property
    def noiseless(self) -> bool:
        return self.m1 == 0 and self.m2 == 0


@dataclass(frozen=True)
class Radii:
    r1in: float
    r2in: float
    r2out: float

    def __post_init__(self):
        for name in ("r1in", "r2in", "r2out"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        if self.r2out <= self.r2in:
            raise ConfigError(f"r2out must exceed r2in, got r2out={self.r2out}, r2in={self.r2in}")

    def to_dict(self) -> dict:
        return {"r1in": self.r1in, "r2in": self.r2in, "r2out": self.r2out}


@dataclass(frozen=True)
class DerivedRadii:
    r1in: float
    r2in: float
    r2out: float
    r1out: float
    r1gap: float
    r2gap: float
    r_star: float
    r2w: float


def r1_out(r1in, k1, k2, w1_norm, r2in, q_min, q) -> float:
    return r1in + 4.0 * k1 * w1_norm * k2 * r2in / ((q_min - q) * math.e)


def r_star(spec: LinearTTSSpec) -> float:
    return spectral_norm(np.linalg.inv(spec.x1)) * spectral_norm(spec.b1)


def r2_w(spec: LinearTTSSpec, r2out, rstar, r1out) -> float:
    return r2out + spectral_norm(spec.w2inv) * (
        spectral_norm(spec.v2) + spectral_norm(spec.gamma2) * (rstar + r1out)
    )


def derive_radii(spec: LinearTTSSpec, spectral, radii: Radii) -> DerivedRadii:
    """Outer radii implied by the inner ones and the decay envelopes."""
    r1out = r1_out(radii.r1in, spectral.k1, spectral.k2, spectral_norm(spec.w1), radii.r2in, spectral.q_min, spectral.q)
    rstar = r_star(spec)
    return DerivedRadii(
        r1in=radii.r1in,
        r2in=radii.r2in,
        r2out=radii.r2out,
        r1out=r1out,
        r1gap=r1out - radii.r1in,
        r2gap=radii.r2out - radii.r2in,
        r_star=rstar,
        r2w=r2_w(spec, radii.r2out, rstar, r1out),
    )
