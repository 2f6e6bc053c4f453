import numpy as np
import pytest

from src.common.errors import ConfigError, NonErgodic, RankDeficientFeatures
from src.rl import (
    GTDVariant,
    SamplingNoise,
    Transition,
    build_mrp,
    closed_form_x1,
    exact_matrices,
    gtd_spec,
    mrp_from_dict,
    mrp_to_dict,
    mspbe,
    neu,
    random_mrp,
    sample_step,
    sampled_directions,
    stationary_distribution,
)

VARIANTS = list(GTDVariant)


def test_two_state_matrices(two_state_mrp):
    np.testing.assert_allclose(two_state_mrp.pi, [0.5, 0.5], atol=1e-12)
    m = exact_matrices(two_state_mrp)
    np.testing.assert_allclose(m.c, 0.5 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(m.a, 0.5 * np.eye(2) - 0.225 * np.ones((2, 2)), atol=1e-14)
    np.testing.assert_allclose(m.b, [0.5, -0.5], atol=1e-14)


def test_stationary_distribution_is_invariant(five_state_mrp):
    pi = five_state_mrp.pi
    assert pi.sum() == pytest.approx(1.0)
    assert np.all(pi >= 0)
    np.testing.assert_allclose(pi @ five_state_mrp.p, pi, atol=1e-10)


def test_reducible_chain_is_rejected():
    with pytest.raises(NonErgodic):
        stationary_distribution(np.eye(2))
    with pytest.raises(NonErgodic):
        build_mrp(np.eye(3), [0.0, 0.0, 0.0], 0.5, np.eye(3))


def test_mrp_validation():
    p = [[0.5, 0.5], [0.5, 0.5]]
    with pytest.raises(ConfigError, match="rewards"):
        build_mrp(p, [2.0, 0.0], 0.9, np.eye(2))
    with pytest.raises(ConfigError, match="feature"):
        build_mrp(p, [0.0, 0.0], 0.9, [[2.0], [0.0]])
    with pytest.raises(ConfigError, match="gamma"):
        build_mrp(p, [0.0, 0.0], 1.0, np.eye(2))
    with pytest.raises(ConfigError, match="row-stochastic"):
        build_mrp([[0.5, 0.6], [0.5, 0.5]], [0.0, 0.0], 0.9, np.eye(2))
    with pytest.raises(RankDeficientFeatures):
        build_mrp(p, [0.0, 0.0], 0.9, [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(RankDeficientFeatures):
        random_mrp(2, 3, 0.9, seed=1)


def test_zero_discount_makes_a_equal_c(five_state_mrp):
    flat = build_mrp(five_state_mrp.p, five_state_mrp.r, 0.0, five_state_mrp.phi)
    m = exact_matrices(flat)
    np.testing.assert_allclose(m.a, m.c, atol=1e-14)


def test_random_mrp_is_seeded():
    a = random_mrp(6, 3, 0.8, seed=11)
    b = random_mrp(6, 3, 0.8, seed=11)
    np.testing.assert_array_equal(a.p, b.p)
    np.testing.assert_array_equal(a.phi, b.phi)
    assert np.all(np.linalg.norm(a.phi, axis=1) <= 1.0 + 1e-12)
    assert np.all(np.abs(a.r) <= 1.0)


def test_mrp_dict_round_trip(five_state_mrp):
    again = mrp_from_dict(mrp_to_dict(five_state_mrp))
    np.testing.assert_array_equal(again.p, five_state_mrp.p)
    np.testing.assert_array_equal(again.phi, five_state_mrp.phi)
    assert again.gamma == five_state_mrp.gamma and again.seed == 7
    with pytest.raises(ConfigError, match="unknown"):
        mrp_from_dict(dict(mrp_to_dict(five_state_mrp), mu=[1.0]))
    doc = mrp_to_dict(five_state_mrp)
    del doc["Phi"]
    with pytest.raises(ConfigError, match="Phi"):
        mrp_from_dict(doc)


def test_variant_parsing():
    assert GTDVariant.parse("TDC") is GTDVariant.TDC
    assert GTDVariant.parse(GTDVariant.GTD2) is GTDVariant.GTD2
    with pytest.raises(ConfigError, match="gtd0, gtd2 or tdc"):
        GTDVariant.parse("gtd3")


@pytest.mark.parametrize("variant", VARIANTS)
def test_slow_matrix_has_closed_form(five_state_mrp, variant):
    m = exact_matrices(five_state_mrp)
    spec, _ = gtd_spec(five_state_mrp, variant)
    np.testing.assert_allclose(spec.x1, closed_form_x1(m, variant), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(spec.theta_star, np.linalg.solve(m.a, m.b), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_sampled_directions_average_to_the_mean_field(five_state_mrp, variant, rng):
    mdp = five_state_mrp
    spec, _ = gtd_spec(mdp, variant)
    for _ in range(5):
        theta = rng.standard_normal(mdp.d)
        w = rng.standard_normal(mdp.d)
        mean1 = np.zeros(mdp.d)
        mean2 = np.zeros(mdp.d)
        for s in range(mdp.n_states):
            for s_next in range(mdp.n_states):
                weight = mdp.pi[s] * mdp.p[s, s_next]
                tr = Transition(s, s_next, mdp.phi[s], mdp.phi[s_next], float(mdp.r[s]))
                g1, g2, _ = sampled_directions(variant, mdp.gamma, tr, theta, w)
                mean1 += weight * g1
                mean2 += weight * g2
        np.testing.assert_allclose(mean1, spec.h1(theta, w), atol=1e-12)
        np.testing.assert_allclose(mean2, spec.h2(theta, w), atol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_per_sample_noise_bounds(five_state_mrp, variant, rng):
    spec, bounds = gtd_spec(five_state_mrp, variant)
    for _ in range(2000):
        theta = rng.standard_normal(five_state_mrp.d) * 3.0
        w = rng.standard_normal(five_state_mrp.d) * 3.0
        step = sample_step(five_state_mrp, variant, rng, theta, w, spec=spec)
        scale = 1.0 + np.linalg.norm(theta) + np.linalg.norm(w)
        assert np.linalg.norm(step.m1) <= bounds.m1 * scale * (1 + 1e-12)
        assert np.linalg.norm(step.m2) <= bounds.m2 * scale * (1 + 1e-12)


def test_sampling_noise_is_centred(five_state_mrp, rng):
    spec, _ = gtd_spec(five_state_mrp, "tdc")
    noise = SamplingNoise(five_state_mrp, "tdc", seed=21, spec=spec)
    theta = rng.standard_normal(five_state_mrp.d)
    w = rng.standard_normal(five_state_mrp.d)
    draws = np.array([np.concatenate(noise.draw(theta, w)) for _ in range(20_000)])
    mean = draws.mean(axis=0)
    sigma = draws.std(axis=0)
    assert np.all(np.abs(mean) <= 5.0 * sigma / np.sqrt(draws.shape[0]) + 1e-12)
    assert noise.last_td_error is not None
    assert noise.describe() == {"kind": "sampling", "variant": "tdc", "markov": False}


def test_markov_sampling_follows_the_chain(two_state_mrp):
    noise = SamplingNoise(two_state_mrp, "gtd2", seed=4, markov=True)
    noise.draw(np.zeros(2), np.zeros(2))
    first = noise._state
    assert first in (0, 1)
    noise.draw(np.zeros(2), np.zeros(2))
    assert noise.describe()["markov"] is True


def test_sampling_is_seeded(five_state_mrp):
    def draws(seed):
        noise = SamplingNoise(five_state_mrp, "gtd0", seed=seed)
        return [noise.draw(np.ones(3), np.ones(3))[0] for _ in range(50)]

    np.testing.assert_array_equal(draws(3), draws(3))


@pytest.mark.parametrize("variant", VARIANTS)
def test_objectives_vanish_at_the_fixed_point(five_state_mrp, variant):
    m = exact_matrices(five_state_mrp)
    spec, _ = gtd_spec(five_state_mrp, variant)
    assert mspbe(m, spec.theta_star) == pytest.approx(0.0, abs=1e-20)
    assert neu(m, spec.theta_star) == pytest.approx(0.0, abs=1e-20)
    off = spec.theta_star + 0.1
    assert mspbe(m, off) > 0 and neu(m, off) > 0
