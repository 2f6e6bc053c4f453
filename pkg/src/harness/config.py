"""Experiment configuration and the instance it describes.

A config is a JSON object. Run manifests embed the config they came from, so
a manifest can be fed back in unchanged.
"""
from __future__ import annotations

import copy
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.common.config_loader import load_json_config
from src.common.errors import ConfigError, InvalidInitialization
from src.engine.noise import NoNoise, UniformSphereNoise
from src.model.radii import NoiseBounds, Radii
from src.model.schedule import ExplicitSchedule, StepsizeSchedule, schedule_from_dict
from src.model.spec import LinearTTSSpec, lambda_map, spec_from_dict
from src.rl.gtd import GTDVariant, gtd_spec
from src.rl.mrp import MDPSpec, mrp_from_dict, random_mrp

logger = logging.getLogger("harness.config")

CONFIG_KEYS = (
    "spec", "gtd", "schedule", "radii", "noise", "eps", "eps1", "eps2", "n0", "n1", "trials",
    "horizon", "stride", "seed", "out", "theta0", "w0", "fit_window", "safety", "q_fraction",
    "kappa", "projected", "delta",
)
GTD_KEYS = ("variant", "states", "dim", "gamma", "seed", "mrp", "markov")
NOISE_KEYS = ("kind", "c1", "c2")


@dataclass(frozen=True)
class NoiseRecipe:
    """Picklable description of a per-trial noise source."""

    kind: str
    d: int
    c1: float = 0.0
    c2: float = 0.0
    mdp: Optional[MDPSpec] = field(default=None, repr=False)
    variant: Optional[GTDVariant] = None
    markov: bool = False
    spec: Optional[LinearTTSSpec] = field(default=None, repr=False)

    def make(self, seed):
        if self.kind == "none":
            return NoNoise(self.d, seed)
        if self.kind == "sphere":
            return UniformSphereNoise(self.d, self.c1, self.c2, seed)
        from src.rl.gtd import SamplingNoise
        return SamplingNoise(self.mdp, self.variant, seed, markov=self.markov, spec=self.spec)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    spec: LinearTTSSpec
    schedule: StepsizeSchedule
    radii: Radii
    noise: NoiseRecipe
    noise_bounds: NoiseBounds
    eps1: float
    eps2: float
    n0: int
    n1: Optional[int]
    trials: int
    horizon: int
    stride: int
    seed: int
    out: Optional[str]
    theta0: np.ndarray
    w0: np.ndarray
    fit_window: Optional[Tuple[int, int]]
    safety: float
    q_fraction: float
    kappa: float
    projected: bool
    delta: float
    mdp: Optional[MDPSpec] = None

    @property
    def eps(self) -> float:
        return min(self.eps1, self.eps2)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _resolve(path: str, base_dir: Optional[str]) -> str:
    if base_dir and not os.path.isabs(path):
        return os.path.join(base_dir, path)
    return path


def _load_part(value, base_dir, what):
    if isinstance(value, str):
        return load_json_config(_resolve(value, base_dir))
    if isinstance(value, dict):
        return value
    raise ConfigError(f"'{what}' must be an object or a path to a JSON file")


def _positive_int(data, key, default=None, minimum=1):
    value = data.get(key, default)
    if value is None:
        raise ConfigError(f"'{key}' is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < minimum:
        raise ConfigError(f"'{key}' must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _number(data, key, default=None):
    value = data.get(key, default)
    if value is None:
        raise ConfigError(f"'{key}' is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"'{key}' must be a finite number, got {value!r}")
    return float(value)


def _gtd_instance(gtd: dict, base_dir):
    unknown = sorted(set(gtd) - set(GTD_KEYS))
    if unknown:
        raise ConfigError(f"unknown gtd key '{unknown[0]}'")
    variant = GTDVariant.parse(gtd.get("variant", "gtd0"))
    if "mrp" in gtd:
        gtd["mrp"] = _load_part(gtd["mrp"], base_dir, "gtd.mrp")
        mdp = mrp_from_dict(gtd["mrp"])
    else:
        mdp = random_mrp(_positive_int(gtd, "states", 5), _positive_int(gtd, "dim", 3),
                         _number(gtd, "gamma", 0.9), _positive_int(gtd, "seed", 0, minimum=0))
    spec, bounds = gtd_spec(mdp, variant)
    recipe = NoiseRecipe(kind="sampling", d=spec.d, mdp=mdp, variant=variant,
                         markov=bool(gtd.get("markov", False)), spec=spec)
    if recipe.markov:
        logger.warning("Markov sampling is on; the noise is no longer a martingale difference sequence")
    return spec, recipe, bounds, mdp


def _explicit_noise(noise: dict, d: int):
    unknown = sorted(set(noise) - set(NOISE_KEYS))
    if unknown:
        raise ConfigError(f"unknown noise key '{unknown[0]}'")
    kind = noise.get("kind", "sphere")
    if kind == "none":
        return NoiseRecipe(kind="none", d=d), NoiseBounds(0.0, 0.0)
    if kind != "sphere":
        raise ConfigError(f"unknown noise kind '{kind}' (expected none or sphere)")
    c1, c2 = _number(noise, "c1", 0.0), _number(noise, "c2", 0.0)
    return NoiseRecipe(kind="sphere", d=d, c1=c1, c2=c2), NoiseBounds(c1, c2)


def build_instance(data: dict, base_dir: Optional[str] = None):
    """(spec, noise recipe, noise bounds, MRP or None) from the spec or gtd part of data.

    Referenced files are inlined into data so the stored config stands alone.
    """
    if ("spec" in data) == ("gtd" in data):
        raise ConfigError("exactly one of 'spec' and 'gtd' must be given")
    if "gtd" in data:
        data["gtd"] = _load_part(data["gtd"], base_dir, "gtd")
        if "noise" in data:
            raise ConfigError("'noise' does not apply to GTD instances; their noise comes from sampling")
        return _gtd_instance(data["gtd"], base_dir)
    data["spec"] = _load_part(data["spec"], base_dir, "spec")
    spec = spec_from_dict(data["spec"])
    recipe, bounds = _explicit_noise(data.get("noise", {"kind": "none"}), spec.d)
    return spec, recipe, bounds, None


def parse_experiment(data: dict, base_dir: Optional[str] = None) -> ExperimentConfig:
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'")
    data = copy.deepcopy(data)
    spec, recipe, bounds, mdp = build_instance(data, base_dir)

    if "schedule" not in data:
        raise ConfigError("'schedule' is required")
    data["schedule"] = _load_part(data["schedule"], base_dir, "schedule")
    schedule = schedule_from_dict(data["schedule"])
    radii_data = data.get("radii")
    if not isinstance(radii_data, dict):
        raise ConfigError("'radii' must be an object with r1in, r2in and r2out")
    radii = Radii(_number(radii_data, "r1in"), _number(radii_data, "r2in"), _number(radii_data, "r2out"))

    if "eps" in data:
        eps1 = eps2 = _number(data, "eps")
    else:
        eps1, eps2 = _number(data, "eps1"), _number(data, "eps2")

    n0 = _positive_int(data, "n0", minimum=0)
    horizon = _positive_int(data, "horizon")
    if horizon <= n0:
        raise ConfigError(f"'horizon' ({horizon}) must exceed 'n0' ({n0})")
    if isinstance(schedule, ExplicitSchedule) and horizon > schedule.horizon:
        raise ConfigError(f"'horizon' ({horizon}) runs past the explicit schedule's {schedule.horizon} stepsizes")
    n1 = data.get("n1")
    if n1 is not None:
        n1 = _positive_int(data, "n1", minimum=n0)
    projected = bool(data.get("projected", False))
    if projected and horizon < 2 * n0:
        raise ConfigError(f"'horizon' ({horizon}) must be at least 2 n0' = {2 * n0} for projected runs")

    theta0 = np.asarray(data.get("theta0", spec.theta_star), dtype=float).reshape(-1)
    w0 = np.asarray(data.get("w0", lambda_map(spec, theta0)), dtype=float).reshape(-1)
    if theta0.shape != (spec.d,) or w0.shape != (spec.d,):
        raise ConfigError(f"'theta0' and 'w0' must have {spec.d} entries")

    fit_window = data.get("fit_window")
    if fit_window is not None:
        if not isinstance(fit_window, list) or len(fit_window) != 2 or not fit_window[0] < fit_window[1]:
            raise ConfigError("'fit_window' must be [lo, hi] with lo < hi")
        if fit_window[0] < n0 or fit_window[1] > horizon:
            raise ConfigError(f"'fit_window' must lie inside the recorded range [{n0}, {horizon}]")
        fit_window = (int(fit_window[0]), int(fit_window[1]))

    delta = _number(data, "delta", 0.05)
    if not 0 < delta < 1:
        raise ConfigError(f"'delta' must lie in (0, 1), got {delta}")

    return ExperimentConfig(
        raw=data,
        spec=spec,
        schedule=schedule,
        radii=radii,
        noise=recipe,
        noise_bounds=bounds,
        eps1=eps1,
        eps2=eps2,
        n0=n0,
        n1=n1,
        trials=_positive_int(data, "trials", 1),
        horizon=horizon,
        stride=_positive_int(data, "stride", 1),
        seed=_positive_int(data, "seed", 0, minimum=0),
        out=data.get("out"),
        theta0=theta0,
        w0=w0,
        fit_window=fit_window,
        safety=_number(data, "safety", 0.9),
        q_fraction=_number(data, "q_fraction", 0.5),
        kappa=_number(data, "kappa", 0.5),
        projected=projected,
        delta=delta,
        mdp=mdp,
    )


def load_experiment(path: str) -> ExperimentConfig:
    data = load_json_config(path, allowed_keys=CONFIG_KEYS)
    return parse_experiment(data, base_dir=os.path.dirname(os.path.abspath(path)))


def check_initialization(cfg: ExperimentConfig):
    """The start point must lie in the inner balls around theta* and z = 0."""
    dist = float(np.linalg.norm(cfg.theta0 - cfg.spec.theta_star))
    if dist > cfg.radii.r1in:
        raise InvalidInitialization("R1in", dist, cfg.radii.r1in)
    z0 = float(np.linalg.norm(cfg.w0 - lambda_map(cfg.spec, cfg.theta0)))
    if z0 > cfg.radii.r2in:
        raise InvalidInitialization("R2in", z0, cfg.radii.r2in)


def experiment_ledger(cfg: ExperimentConfig):
    from src.bounds.ledger import build_ledger
    from src.spectral.envelope import spectral_constants

    spectral = spectral_constants(cfg.spec, safety=cfg.safety, q_fraction=cfg.q_fraction)
    return build_ledger(cfg.spec, spectral, cfg.radii, cfg.noise_bounds)
