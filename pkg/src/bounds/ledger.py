"""The constant ledger.

Entries are evaluated in a fixed order, left column first. Each entry keeps
the formula it was computed from. Overrides replace an entry's value and
every later entry is recomputed from it, which is how tests build ledgers
with inflated exponents and how the dependency order is audited.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from src.common.errors import ConfigError
from src.model.radii import DerivedRadii, NoiseBounds, Radii
from src.model.spec import LinearTTSSpec, spectral_norm
from src.spectral.envelope import SpectralConstants

logger = logging.getLogger("bounds.ledger")


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    column: str
    formula: str
    compute: Callable[[Mapping[str, float]], float] = field(repr=False)


def _inv(x: float) -> float:
    return math.inf if x == 0 else 1.0 / x


def _spread(e):
    return 1.0 + e["Rstar"] + e["R1out"] + e["R2w"]


ENTRIES = [
    LedgerEntry("K1", "left", "envelope constant of X1", lambda e: e["_k1"]),
    LedgerEntry("K2", "left", "envelope constant of W2", lambda e: e["_k2"]),
    LedgerEntry("q1", "left", "envelope rate of X1", lambda e: e["_q1"]),
    LedgerEntry("q2", "left", "envelope rate of W2", lambda e: e["_q2"]),
    LedgerEntry("qMin", "left", "min(q1, q2)", lambda e: min(e["q1"], e["q2"])),
    LedgerEntry("q", "left", "joint rate in (0, qMin)", lambda e: e["_q"]),
    LedgerEntry("L1a", "left", "K1 |W1| K2 R2in / ((qMin - q) e)",
                lambda e: e["K1"] * e["|W1|"] * e["K2"] * e["R2in"] / ((e["qMin"] - e["q"]) * math.e)),
    LedgerEntry("R1out", "left", "R1in + 4 L1a", lambda e: e["R1in"] + 4.0 * e["L1a"]),
    LedgerEntry("Rstar", "left", "|X1^-1| |b1|", lambda e: e["|X1^-1|"] * e["|b1|"]),
    LedgerEntry("R2w", "left", "R2out + |W2^-1| (|v2| + |G2| (R* + R1out))",
                lambda e: e["R2out"] + e["|W2^-1|"] * (e["|v2|"] + e["|G2|"] * (e["Rstar"] + e["R1out"]))),
    LedgerEntry("R1gap", "left", "R1out - R1in", lambda e: e["R1out"] - e["R1in"]),
    LedgerEntry("R2gap", "left", "R2out - R2in", lambda e: e["R2out"] - e["R2in"]),
    LedgerEntry("Jtheta", "left", "|v1| + |G1| (R* + R1out) + |W1| R2w + m1 (1 + R* + R1out + R2w)",
                lambda e: e["|v1|"] + e["|G1|"] * (e["Rstar"] + e["R1out"]) + e["|W1|"] * e["R2w"] + e["m1"] * _spread(e)),
    LedgerEntry("Jz", "left", "|W2| R2out + |W2^-1| |G2| Jtheta + m2 (1 + R* + R1out + R2w)",
                lambda e: e["|W2|"] * e["R2out"] + e["|W2^-1|"] * e["|G2|"] * e["Jtheta"] + e["m2"] * _spread(e)),

    LedgerEntry("L1b", "right", "K1 |W1| |W2| R2in / q1", lambda e: e["K1"] * e["|W1|"] * e["|W2|"] * e["R2in"] / e["q1"]),
    LedgerEntry("L1c", "right", "K1 |W1| / q1", lambda e: e["K1"] * e["|W1|"] / e["q1"]),
    LedgerEntry("L1md", "right", "K1 m1 (1 + R* + R1out + R2w)", lambda e: e["K1"] * e["m1"] * _spread(e)),
    LedgerEntry("L1de", "right", "K1 |X1| Jtheta / q1", lambda e: e["K1"] * e["|X1|"] * e["Jtheta"] / e["q1"]),
    LedgerEntry("La", "right", "L1a", lambda e: e["L1a"]),
    LedgerEntry("Lc", "right", "L1c", lambda e: e["L1c"]),
    LedgerEntry("Lb", "right", "L1de + L1md + |X1| R1in + L1b",
                lambda e: e["L1de"] + e["L1md"] + e["|X1|"] * e["R1in"] + e["L1b"]),
    LedgerEntry("L2md", "right", "K2 m2 (1 + R* + R1out + R2w)", lambda e: e["K2"] * e["m2"] * _spread(e)),
    LedgerEntry("L2sd", "right", "K2 |W2^-1| |G2| Jtheta / q2",
                lambda e: e["K2"] * e["|W2^-1|"] * e["|G2|"] * e["Jtheta"] / e["q2"]),
    LedgerEntry("L2de", "right", "K2 |W2| Jz / q2", lambda e: e["K2"] * e["|W2|"] * e["Jz"] / e["q2"]),
    LedgerEntry("Lz", "right", "|W2| R2in + L2de + L2sd + L2md",
                lambda e: e["|W2|"] * e["R2in"] + e["L2de"] + e["L2sd"] + e["L2md"]),
    LedgerEntry("c1", "right", "1 / (16 K1^2 d^3 L1md^2)",
                lambda e: _inv(16.0 * e["K1"] ** 2 * e["d"] ** 3 * e["L1md"] ** 2)),
    LedgerEntry("c2", "right", "1 / (9 K2^2 d^3 L2md^2)",
                lambda e: _inv(9.0 * e["K2"] ** 2 * e["d"] ** 3 * e["L2md"] ** 2)),
    LedgerEntry("c3", "right", "1 / (64 K2^2 Lc^2 d^3 L2md^2)",
                lambda e: _inv(64.0 * e["K2"] ** 2 * e["Lc"] ** 2 * e["d"] ** 3 * e["L2md"] ** 2)),
]

ENTRY_NAMES = [entry.name for entry in ENTRIES]


@dataclass(frozen=True, eq=False)
class ConstantLedger:
    spec: LinearTTSSpec = field(repr=False)
    radii: Radii
    noise: NoiseBounds
    inputs: Dict[str, float] = field(repr=False)
    values: Dict[str, float]
    provenance: Dict[str, str] = field(repr=False)
    columns: Dict[str, str] = field(repr=False)
    overridden: tuple = ()

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def degenerate_noiseless(self) -> bool:
        return self.noise.noiseless

    def derived_radii(self) -> DerivedRadii:
        v = self.values
        return DerivedRadii(
            r1in=self.radii.r1in,
            r2in=self.radii.r2in,
            r2out=self.radii.r2out,
            r1out=v["R1out"],
            r1gap=v["R1gap"],
            r2gap=v["R2gap"],
            r_star=v["Rstar"],
            r2w=v["R2w"],
        )

    def to_dict(self) -> dict:
        def enc(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "entries": [
                {"name": name, "value": enc(self.values[name]), "column": self.columns[name],
                 "formula": self.provenance[name]}
                for name in ENTRY_NAMES
            ],
            "inputs": {k: enc(v) for k, v in self.inputs.items()},
            "degenerate_noiseless": self.degenerate_noiseless,
            "overridden": list(self.overridden),
        }


def _inputs(spec: LinearTTSSpec, spectral: SpectralConstants, radii: Radii, noise: NoiseBounds) -> Dict[str, float]:
    return {
        "d": float(spec.d),
        "|W1|": spectral_norm(spec.w1),
        "|W2|": spectral_norm(spec.w2),
        "|W2^-1|": spectral_norm(spec.w2inv),
        "|G1|": spectral_norm(spec.gamma1),
        "|G2|": spectral_norm(spec.gamma2),
        "|X1|": spectral_norm(spec.x1),
        "|X1^-1|": spectral_norm(np.linalg.inv(spec.x1)),
        "|v1|": spectral_norm(spec.v1),
        "|v2|": spectral_norm(spec.v2),
        "|b1|": spectral_norm(spec.b1),
        "R1in": radii.r1in,
        "R2in": radii.r2in,
        "R2out": radii.r2out,
        "m1": noise.m1,
        "m2": noise.m2,
        "_k1": spectral.k1,
        "_k2": spectral.k2,
        "_q1": spectral.q1,
        "_q2": spectral.q2,
        "_q": spectral.q,
    }


def build_ledger(spec: LinearTTSSpec, spectral: SpectralConstants, radii: Radii, noise: NoiseBounds,
                 overrides: Optional[Mapping[str, float]] = None) -> ConstantLedger:
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(ENTRY_NAMES))
    if unknown:
        raise ConfigError(f"unknown ledger entry '{unknown[0]}'")

    inputs = _inputs(spec, spectral, radii, noise)
    env: Dict[str, float] = dict(inputs)
    values: Dict[str, float] = {}
    for entry in ENTRIES:
        value = float(overrides[entry.name]) if entry.name in overrides else float(entry.compute(env))
        env[entry.name] = value
        values[entry.name] = value

    if noise.noiseless:
        logger.info("noise bounds are zero; exponents are infinite and every probability bound is 1")
    return ConstantLedger(
        spec=spec,
        radii=radii,
        noise=noise,
        inputs={k: v for k, v in inputs.items() if not k.startswith("_")},
        values=values,
        provenance={entry.name: entry.formula for entry in ENTRIES},
        columns={entry.name: entry.column for entry in ENTRIES},
        overridden=tuple(sorted(overrides)),
    )
