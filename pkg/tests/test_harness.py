import json
import os
import pickle

import numpy as np
import pytest

from src.common.errors import ConfigError, HorizonExceeded, InvalidInitialization, WindowTooNoisy
from src.harness import (
    check_initialization,
    emit_report,
    fit_log_log,
    jsonable,
    load_experiment,
    locked_in,
    median_spread,
    parse_experiment,
    run_lock_in,
    run_rate_fit,
    run_trials,
    trial_seeds,
    wilson_interval,
)
from src.harness.trials import TrialRecord

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def _square(x):
    return x * x


def _fail_on_two(x):
    if x == 2:
        raise HorizonExceeded(x, 2)
    return x


@pytest.fixture
def diverging_lockin(noiseless_lockin):
    cfg = dict(noiseless_lockin)
    # a unit fast step multiplies w by -9 when W2 = 10
    cfg["spec"] = dict(noiseless_lockin["spec"], w2=[[10.0]])
    cfg.update({
        "schedule": {"kind": "explicit", "alphas": [1.0] * 600, "betas": [1.0] * 600},
        "n0": 0, "n1": 100, "horizon": 500, "stride": 10, "theta0": [0.5], "w0": [0.5],
    })
    return cfg


@pytest.fixture
def projected_scalar(noiseless_lockin):
    cfg = dict(noiseless_lockin)
    del cfg["n1"]
    cfg.update({"projected": True, "n0": 4, "horizon": 2000, "stride": 10, "trials": 2,
                "radii": {"r1in": 2.0, "r2in": 6.0, "r2out": 12.0}, "fit_window": [100, 2000]})
    return cfg


def test_trial_seeds_are_distinct_streams():
    seeds = trial_seeds(2024, 4)
    assert [s.spawn_key for s in seeds] == [(0,), (1,), (2,), (3,)]
    states = {tuple(s.generate_state(4)) for s in seeds}
    assert len(states) == 4
    again = trial_seeds(2024, 4)
    assert [tuple(s.generate_state(4)) for s in again] == [tuple(s.generate_state(4)) for s in seeds]


def test_trial_streams_do_not_collide():
    firsts = {np.random.default_rng(s).bit_generator.random_raw() for s in trial_seeds(7, 10_000)}
    assert len(firsts) == 10_000


def test_run_trials_keeps_task_order():
    assert run_trials(_square, list(range(6)), workers=1) == [0, 1, 4, 9, 16, 25]
    assert run_trials(_square, list(range(6)), workers=2) == [0, 1, 4, 9, 16, 25]
    assert run_trials(_square, [], workers=2) == []


@pytest.mark.parametrize("workers", [1, 2])
def test_run_trials_raises_the_failure(workers):
    with pytest.raises(HorizonExceeded) as err:
        run_trials(_fail_on_two, [0, 1, 2, 3], workers=workers)
    assert err.value.n == 2 and err.value.horizon == 2
    assert err.value.qualified_name == "model.HorizonExceeded"


def test_errors_survive_pickling():
    err = pickle.loads(pickle.dumps(InvalidInitialization("R2in", 3.5, 1.0)))
    assert isinstance(err, InvalidInitialization)
    assert err.radius == "R2in"
    assert str(err) == "initial point violates R2in: distance 3.5 > 1"


def test_wilson_interval():
    lo, hi = wilson_interval(10, 10)
    assert hi == pytest.approx(1.0)
    assert lo == pytest.approx(10.0 / (10.0 + 1.959963984540054 ** 2), rel=1e-6)
    lo, hi = wilson_interval(0, 10)
    assert lo == pytest.approx(0.0, abs=1e-12)
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert 0.5 - lo == pytest.approx(hi - 0.5)


def test_locked_in():
    rec = TrialRecord(0, np.array([10, 20, 30]), np.array([0.9, 0.4, 0.1]), np.array([0.9, 0.2, 0.3]))
    assert locked_in(rec, 20, 0.5, 0.5)
    assert not locked_in(rec, 10, 0.5, 0.5)
    assert not locked_in(rec, 20, 0.5, 0.25)
    failed = TrialRecord(1, np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0), failed_at=7)
    assert not locked_in(failed, 0, 0.5, 0.5)


def test_parse_experiment_defaults(noiseless_lockin):
    cfg = parse_experiment(noiseless_lockin)
    assert cfg.eps1 == cfg.eps2 == 0.5
    assert cfg.n1 == 2000 and not cfg.projected
    assert cfg.safety == 0.9 and cfg.kappa == 0.5 and cfg.delta == 0.05
    assert cfg.noise_bounds.noiseless
    assert cfg.to_dict() == noiseless_lockin


@pytest.mark.parametrize("patch,message", [
    ({"colour": "red"}, "colour"),
    ({"horizon": 16}, "horizon"),
    ({"n1": 3}, "n1"),
    ({"trials": 0}, "trials"),
    ({"eps": "big"}, "eps"),
    ({"delta": 1.5}, "delta"),
    ({"fit_window": [50, 10]}, "fit_window"),
    ({"theta0": [0.1, 0.2]}, "theta0"),
    ({"noise": {"kind": "laplace"}}, "laplace"),
    ({"gtd": {"variant": "gtd0"}}, "exactly one"),
    ({"schedule": {"kind": "explicit", "alphas": [0.1] * 100, "betas": [0.2] * 100}}, "explicit schedule"),
])
def test_parse_experiment_rejects(noiseless_lockin, patch, message):
    with pytest.raises(ConfigError, match=message):
        parse_experiment(dict(noiseless_lockin, **patch))


def test_gtd_instances_take_no_explicit_noise(noiseless_lockin):
    data = dict(noiseless_lockin, gtd={"variant": "tdc", "states": 4, "dim": 2, "seed": 1},
                theta0=[0.0, 0.0], w0=[0.0, 0.0])
    del data["spec"]
    with pytest.raises(ConfigError, match="noise"):
        parse_experiment(data)
    del data["noise"]
    cfg = parse_experiment(data)
    assert cfg.spec.d == 2 and cfg.noise.kind == "sampling"
    assert cfg.mdp is not None


def test_referenced_files_are_inlined():
    cfg = load_experiment(os.path.join(CONFIGS, "lockin_noiseless.json"))
    assert isinstance(cfg.raw["spec"], dict)
    assert cfg.raw["spec"]["w1"] == [[-1.0]]


def test_initialization_is_checked(noiseless_lockin):
    cfg = parse_experiment(dict(noiseless_lockin, theta0=[2.0]))
    with pytest.raises(InvalidInitialization) as err:
        check_initialization(cfg)
    assert err.value.radius == "R1in"
    cfg = parse_experiment(dict(noiseless_lockin, w0=[3.0]))
    with pytest.raises(InvalidInitialization):
        run_lock_in(cfg)


def test_noiseless_runs_always_lock_in(noiseless_lockin):
    result = run_lock_in(parse_experiment(noiseless_lockin))
    assert result.frequency == 1.0
    assert result.bound == 1.0 and result.noiseless and not result.vacuous
    assert result.meets_bound
    assert result.n_start == 16 and result.n1 == 2000
    assert result.n[0] == 16 and result.n[-1] == 4000
    assert np.all(result.inside_fraction[result.n >= 2000] == 1.0)
    assert result.spawn_keys == [[0], [1], [2]]


def test_seeded_runs_match_across_worker_counts(sphere_lockin, tmp_path):
    cfg = parse_experiment(sphere_lockin)
    one = run_lock_in(cfg, workers=1)
    two = run_lock_in(cfg, workers=2)
    assert one.locked == two.locked
    assert one.curve_rows() == two.curve_rows()
    first = emit_report(one, cfg, str(tmp_path / "one"))
    second = emit_report(two, cfg, str(tmp_path / "two"))
    for name in ("curves.csv", "manifest.json", "bounds.json"):
        with open(first[name], "rb") as a, open(second[name], "rb") as b:
            assert a.read() == b.read()


def test_failed_trials_leave_a_header_only_curve(diverging_lockin, tmp_path):
    cfg = parse_experiment(diverging_lockin)
    result = run_lock_in(cfg)
    assert result.frequency == 0.0
    assert result.failed == [0, 1, 2]
    assert len(result.n) == 0
    paths = emit_report(result, cfg, str(tmp_path))
    with open(paths["curves.csv"], encoding="utf-8") as fh:
        assert fh.read() == "n,inside_fraction,median_err_theta,median_err_z\n"


def test_report_files_and_manifest_round_trip(noiseless_lockin, tmp_path):
    cfg = parse_experiment(noiseless_lockin)
    result = run_lock_in(cfg)
    paths = emit_report(result, cfg, str(tmp_path / "run"))
    assert sorted(os.listdir(tmp_path / "run")) == ["bounds.json", "curves.csv", "manifest.json", "plot_data.json"]
    with open(paths["manifest.json"], encoding="utf-8") as fh:
        doc = json.load(fh)
    assert doc["kind"] == "lockin" and doc["master_seed"] == 2024
    assert doc["summary"]["frequency"] == 1.0
    assert doc["event"]["n1"] == 2000
    with open(paths["bounds.json"], encoding="utf-8") as fh:
        bounds = json.load(fh)
    assert bounds["bound"]["noiseless"] is True
    assert [e["name"] for e in bounds["ledger"]["entries"]][:2] == ["K1", "K2"]
    with open(paths["plot_data.json"], encoding="utf-8") as fh:
        assert "vega-lite" in json.load(fh)["$schema"]

    again = load_experiment(paths["manifest.json"])
    assert again.raw == cfg.raw
    replay = run_lock_in(again)
    assert replay.curve_rows() == result.curve_rows()


def test_jsonable():
    doc = jsonable({"a": np.float64(np.inf), "b": [np.int64(3), np.bool_(True)], "c": np.array([0.5, -np.inf]),
                    "d": float("nan")})
    assert doc == {"a": "inf", "b": [3, True], "c": [0.5, "-inf"], "d": "nan"}
    json.dumps(doc, allow_nan=False)


def test_fit_log_log_recovers_a_power_law():
    n = np.array([10.0, 100.0, 1000.0, 10000.0])
    slope, intercept, r2 = fit_log_log(n, 3.0 * n ** -0.5)
    assert slope == pytest.approx(-0.5)
    assert intercept == pytest.approx(np.log(3.0))
    assert r2 == pytest.approx(1.0)


def test_rate_fit_needs_projection(noiseless_lockin):
    with pytest.raises(ConfigError, match="projected"):
        run_rate_fit(parse_experiment(noiseless_lockin))


def test_rate_fit_on_a_noiseless_projected_run(projected_scalar, tmp_path):
    cfg = parse_experiment(projected_scalar)
    fit = run_rate_fit(cfg)
    assert fit.window == (100, 2000)
    assert fit.predicted_slope == pytest.approx(-0.25)
    # without noise the iterates contract like exp(-t_n), well past the noisy rate
    assert fit.slope < fit.predicted_slope - 1.0
    assert fit.points >= 2
    assert fit.median_iqr_at_end == 0.0
    paths = emit_report(fit, cfg, str(tmp_path))
    with open(paths["bounds.json"], encoding="utf-8") as fh:
        assert json.load(fh)["rate_exponent"] == pytest.approx(0.25)


def test_noisy_fit_windows(projected_scalar, monkeypatch):
    cfg = parse_experiment(projected_scalar)
    monkeypatch.setattr("src.harness.rate.fit_log_log", lambda n, err: (-0.1, 0.0, 0.2))
    assert run_rate_fit(cfg).noisy
    with pytest.raises(WindowTooNoisy):
        run_rate_fit(cfg, strict=True)


def test_noiseless_slope_tracks_the_timescale_gap(projected_scalar):
    # alpha near 1 makes t_n close to log n, so exp(-X1 t_n) is a power law;
    # X1 = 0.33 puts it at the alpha - beta exponent
    cfg = dict(projected_scalar)
    cfg.update({"spec": dict(projected_scalar["spec"], w1=[[-0.33]]),
                "schedule": {"kind": "polynomial", "alpha": 0.99, "beta": 0.66},
                "theta0": [0.4], "trials": 1, "horizon": 100_000, "stride": 500, "fit_window": [1000, 100_000]})
    fit = run_rate_fit(parse_experiment(cfg))
    assert fit.predicted_slope == pytest.approx(-0.33)
    assert fit.slope == pytest.approx(-0.33, abs=0.1)
    assert fit.r_squared > 0.99


def test_median_spread():
    assert median_spread(np.full(10, 0.3), seed=1) == 0.0
    assert median_spread(np.array([0.5]), seed=1) == 0.0
    values = np.random.default_rng(3).lognormal(size=200)
    assert median_spread(values, seed=1) == median_spread(values, seed=1)
    assert 0 < median_spread(values, seed=1) < np.subtract(*np.percentile(values, [75, 25]))


def test_doubling_trials_steadies_the_median_curve(projected_scalar):
    noisy = dict(projected_scalar, noise={"kind": "sphere", "c1": 0.05, "c2": 0.05}, trials=24)
    small = run_rate_fit(parse_experiment(noisy))
    large = run_rate_fit(parse_experiment(dict(noisy, trials=48)))
    assert large.spawn_keys[:24] == small.spawn_keys
    assert 0 < large.median_iqr_at_end <= small.median_iqr_at_end


@pytest.mark.slow
def test_rate_fit_on_gtd0():
    cfg = load_experiment(os.path.join(CONFIGS, "rate_gtd0.json"))
    fit = run_rate_fit(cfg, workers=os.cpu_count() or 1)
    assert fit.trials == 100 and not fit.failed
    assert fit.window == (1000, 100_000)
    assert fit.predicted_slope == pytest.approx(-0.25)
    assert -0.45 <= fit.slope <= -0.15
    assert fit.summary()["polylog_ignored"] is True
