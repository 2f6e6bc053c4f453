import json
import os

import numpy as np
import pytest

from src.model import PolynomialSchedule, build_spec
from src.rl import build_mrp, random_mrp

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def stable_spec(rng: np.random.Generator, d: int, offset=None):
    """Random instance with X1 and W2 comfortably stable."""
    for _ in range(100):
        w2 = np.eye(d) * 2.0 + 0.3 * rng.standard_normal((d, d))
        gamma2 = 0.5 * rng.standard_normal((d, d))
        w1 = 0.3 * rng.standard_normal((d, d))
        # pick gamma1 so that X1 = gamma1 - w1 W2^-1 gamma2 = I + small
        x1 = np.eye(d) * 1.5 + 0.2 * rng.standard_normal((d, d))
        gamma1 = x1 + w1 @ np.linalg.solve(w2, gamma2)
        v1 = rng.standard_normal(d) if offset is None else np.full(d, offset)
        v2 = rng.standard_normal(d) if offset is None else np.full(d, offset)
        if (np.min(np.linalg.eigvals(w2).real) > 0.5 and np.min(np.linalg.eigvals(x1).real) > 0.5):
            return build_spec(v1, gamma1, w1, v2, gamma2, w2)
    raise RuntimeError("could not draw a stable instance")


@pytest.fixture
def scalar_spec():
    # X1 = W2 = Gamma2 = 1, W1 = -1, v = 0, so theta* = 0 and lambda(theta) = -theta
    return build_spec([0.0], [[0.0]], [[-1.0]], [0.0], [[1.0]], [[1.0]])


@pytest.fixture
def poly():
    return PolynomialSchedule(0.75, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_specs():
    rng = np.random.default_rng(2024)
    return [stable_spec(rng, d) for d in (1, 3, 5)]


@pytest.fixture
def two_state_mrp():
    return build_mrp([[0.5, 0.5], [0.5, 0.5]], [1.0, -1.0], 0.9, np.eye(2))


@pytest.fixture
def five_state_mrp():
    return random_mrp(5, 3, 0.9, seed=7)


@pytest.fixture
def write_json(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)

    return write


@pytest.fixture
def scalar_spec_dict():
    with open(os.path.join(CONFIGS, "scalar_spec.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def noiseless_lockin(scalar_spec_dict):
    return {
        "spec": scalar_spec_dict,
        "schedule": {"kind": "polynomial", "alpha": 0.75, "beta": 0.5},
        "radii": {"r1in": 1.0, "r2in": 1.0, "r2out": 2.0},
        "noise": {"kind": "none"},
        "eps": 0.5,
        "n0": 16,
        "n1": 2000,
        "theta0": [0.9],
        "w0": [-0.9],
        "trials": 3,
        "horizon": 4000,
        "stride": 50,
        "seed": 2024,
    }


@pytest.fixture
def sphere_lockin(noiseless_lockin):
    cfg = dict(noiseless_lockin)
    cfg.update({"noise": {"kind": "sphere", "c1": 0.05, "c2": 0.05}, "trials": 6, "horizon": 3000, "n1": 1000,
                "seed": 99})
    return cfg
