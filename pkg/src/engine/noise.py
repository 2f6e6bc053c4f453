from __future__ import annotations

import numpy as np

from src.common.errors import ConfigError


def unit_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform direction on the unit sphere in R^d (a random sign when d = 1)."""
    while True:
        g = rng.standard_normal(d)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


class NoNoise:
    kind = "none"

    def __init__(self, d: int, seed=None):
        self.d = d
        self.seed = seed

    def draw(self, theta, w):
        zero = np.zeros(self.d)
        return zero, zero.copy()

    def describe(self) -> dict:
        return {"kind": self.kind}


class UniformSphereNoise:
    """M_i = c_i u_i (1 + |theta| + |w|) with u_i uniform on the sphere.

    Symmetric in u, so the conditional mean is zero; the norm attains the
    affine bound with c_i in place of m_i.
    """

    kind = "sphere"

    def __init__(self, d: int, c1: float, c2: float, seed):
        if c1 < 0 or c2 < 0:
            raise ConfigError(f"sphere noise scales must be non-negative, got c1={c1}, c2={c2}")
        self.d = d
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def draw(self, theta, w):
        scale = 1.0 + np.linalg.norm(theta) + np.linalg.norm(w)
        m1 = self.c1 * scale * unit_sphere(self.rng, self.d)
        m2 = self.c2 * scale * unit_sphere(self.rng, self.d)
        return m1, m2

    def describe(self) -> dict:
        return {"kind": self.kind, "c1": self.c1, "c2": self.c2}
