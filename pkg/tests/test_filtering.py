import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperfilter.density import ChartGrid, DensityGrid, MatrixTransfer
from hyperfilter.filtering import (DegenerateFilterError, FilterState, ParticleCloud, filter_run, filter_step,
                                   particle_filter_step, posterior_expectation, posterior_mean, pullback_run,
                                   systematic_resample)
from hyperfilter.manifold import circ_diff
from hyperfilter.observation import TableLikelihood, VonMises, random_initial_state, simulate_joint

from oracles import TOY_EVIDENCE_01, TOY_KERNEL, TOY_POSTERIOR_01, TOY_TABLE, enumerate_posterior


@pytest.fixture
def toy():
    g = ChartGrid("discrete", (3,))
    return g, MatrixTransfer(TOY_KERNEL, g), TableLikelihood(TOY_TABLE)


def test_toy_frozen_posterior(toy):
    g, T, lik = toy
    states = filter_run(DensityGrid.uniform(g), np.array([[0.0], [1.0]]), T, lik)
    probs = states[-1].density.values * g.cell_volume
    assert np.allclose(probs, [float(f) for f in TOY_POSTERIOR_01], atol=1e-15)
    assert states[-1].log_normalizer == pytest.approx(math.log(TOY_EVIDENCE_01), abs=1e-14)


def test_toy_matches_enumeration(toy, rng):
    g, T, lik = toy
    prior = np.array([0.2, 0.5, 0.3])
    ys = rng.integers(0, 2, size=8)
    post, z = enumerate_posterior(TOY_KERNEL, TOY_TABLE, prior, ys)
    states = filter_run(DensityGrid(g, prior / g.cell_volume), ys[:, None].astype(float), T, lik)
    assert np.allclose(states[-1].density.values * g.cell_volume, post, atol=1e-14)
    assert states[-1].log_normalizer == pytest.approx(math.log(z), abs=1e-12)


def test_constant_channel_is_transfer_step(lab32, rng):
    lik = VonMises((0.0, 0.0))
    g = lab32.grid
    p = DensityGrid(g, rng.random(g.size) + 0.5).normalize()
    st = filter_step(FilterState(p), np.array([0.3, 0.3]), lab32.transfer, lik)
    expected = DensityGrid(g, lab32.transfer.apply(p.values)).normalize().values
    assert np.allclose(st.density.values, expected, atol=1e-14)
    assert st.log_normalizer == pytest.approx(lik.log_const, abs=1e-12)


def test_uninformative_uniform_stays_uniform(lab32):
    lik = VonMises((0.0, 0.0))
    obs = simulate_joint(lab32.fmap, lik, np.array([0.1, 0.2]), 15, seed=0)
    for st in filter_run(DensityGrid.uniform(lab32.grid), obs, lab32.transfer, lik):
        assert np.allclose(st.density.values, 1.0, atol=1e-12)


def test_mass_after_every_step(lab32, priors32):
    obs = lab32.simulate(30, seed=1)
    for st in filter_run(priors32[0], obs, lab32.transfer, lab32.lik):
        assert abs(st.density.mass - 1.0) < 1e-12


def test_zero_and_one_step(lab32, priors32):
    obs = lab32.simulate(1, seed=2)
    states = filter_run(priors32[0], obs.y_values[:0], lab32.transfer, lab32.lik)
    assert len(states) == 1 and np.allclose(states[0].density.values, priors32[0].normalize().values)
    one = filter_run(priors32[0], obs, lab32.transfer, lab32.lik)[-1]
    direct = filter_step(FilterState(priors32[0].normalize()), obs.y_values[0], lab32.transfer, lab32.lik)
    assert np.array_equal(one.density.values, direct.density.values)


def test_posterior_tracks_truth(cat):
    from hyperfilter.density import ulam_build
    g = ChartGrid("torus", (64, 64))
    U = ulam_build(cat, g, subsamples=16)
    lik = VonMises((4.0, 4.0))
    prior_d, post_d = [], []
    for s in range(20):
        obs = simulate_joint(cat, lik, random_initial_state(cat, s), 50, s)
        states = filter_run(DensityGrid.uniform(g), obs, U, lik)
        d = np.linalg.norm(circ_diff(g.centers, obs.x_truth[-1]), axis=1)
        prior_d.append(posterior_expectation(states[0], lambda x: d))
        post_d.append(posterior_expectation(states[-1], lambda x: d))
    assert np.mean(post_d) < np.mean(prior_d)


def test_degenerate_filter_reports_step():
    g = ChartGrid("discrete", (3,))
    T = MatrixTransfer(TOY_KERNEL, g)
    lik = TableLikelihood(np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(DegenerateFilterError) as err:
        filter_run(DensityGrid.uniform(g), np.array([[0.0], [0.0], [1.0]]), T, lik)
    assert err.value.step == 3


def test_pullback_depth_zero_is_uniform(lab32):
    obs = lab32.simulate(5, seed=0)
    assert np.all(pullback_run(obs, 0, lab32.transfer, lab32.lik).values == 1.0)


def test_pullback_cocycle(lab32):
    obs = lab32.simulate(12, seed=3)
    n = 10
    shifted = pullback_run(obs.y_values[:-1], n, lab32.transfer, lab32.lik)
    stepped = filter_step(FilterState(shifted), obs.y_values[-1], lab32.transfer, lab32.lik).density.values
    direct = pullback_run(obs, n + 1, lab32.transfer, lab32.lik).values
    assert np.array_equal(stepped, direct)


def test_pullback_depth_bounds(lab32):
    obs = lab32.simulate(5, seed=0)
    with pytest.raises(ValueError):
        pullback_run(obs, 6, lab32.transfer, lab32.lik)


def test_posterior_expectation_examples(lab32, priors32):
    st = FilterState(priors32[1].normalize())
    assert posterior_expectation(st, lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-14)
    f1 = lambda x: np.cos(6 * x[:, 0])
    f2 = lambda x: x[:, 1]
    lin = posterior_expectation(st, lambda x: 2 * f1(x) - 3 * f2(x))
    assert lin == pytest.approx(2 * posterior_expectation(st, f1) - 3 * posterior_expectation(st, f2), abs=1e-14)


def test_posterior_mean_circular(grid32):
    v = np.zeros(grid32.size)
    v[grid32.cell_index(np.array([[0.99, 0.01]]))] = 1.0
    m = posterior_mean(FilterState(DensityGrid(grid32, v).normalize()))
    assert np.all(np.abs(circ_diff(m, [0.99, 0.01])) < 1 / 32)


# -- particle filter ---------------------------------------------------------------

def test_constant_channel_keeps_weights(cat, rng):
    lik = VonMises((0.0, 0.0))
    w = rng.random(100)
    cloud = ParticleCloud(rng.random((100, 2)), w / w.sum())
    out = particle_filter_step(cloud, np.array([0.5, 0.5]), cat, lik, rng, resample_threshold=0.0)
    assert np.allclose(out.weights, cloud.weights, atol=1e-15)


def test_resampling_is_unbiased(rng):
    n = 500
    x = rng.random(n)
    w = rng.random(n) ** 3
    w /= w.sum()
    target = float(w @ x)
    shifts = [x[systematic_resample(w, rng)].mean() - target for _ in range(200)]
    se = np.std(shifts, ddof=1) / math.sqrt(len(shifts))
    assert abs(np.mean(shifts)) < 3 * se + 1e-15


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50).filter(lambda w: sum(w) > 0))
def test_systematic_resample_indices(w):
    w = np.array(w) / np.sum(w)
    idx = systematic_resample(w, np.random.default_rng(0))
    assert len(idx) == len(w)
    assert np.all(w[idx] > 0)


def test_particle_expectation(rng):
    cloud = ParticleCloud.from_samples(rng.random((20, 2)))
    assert posterior_expectation(cloud, lambda x: np.ones(len(x))) == pytest.approx(1.0)
