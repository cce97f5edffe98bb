import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from hyperfilter.observation import (TableLikelihood, VonMises, WrappedGaussian, bessel_i0, lipschitz_bound,
                                     random_initial_state, seed_rng, simulate_joint)

I0_2 = 2.2795853023360673  # I_0(2), tabulated


def test_bessel_i0():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(2.0) == pytest.approx(I0_2, rel=1e-14)


def test_uniform_channel_density():
    lik = VonMises((0.0, 0.0))
    x = np.random.default_rng(0).random((5, 2))
    assert np.allclose(lik.pdf(np.array([0.3, 0.9]), x), (2 * math.pi) ** -2)
    assert lik.G == 0.0


def test_density_at_mode():
    lik = VonMises((2.0, 2.0))
    x = np.array([[0.25, 0.75]])
    expected = (math.exp(2) / (2 * math.pi * I0_2)) ** 2
    assert lik.pdf(np.array([0.25, 0.75]), x)[0] == pytest.approx(expected, rel=1e-13)


def test_uniform_channel_ks():
    lik = VonMises((0.0,), (0,))
    rng = seed_rng(0, 0)
    x = np.tile([0.3, 0.6], (10_000, 1))
    y = lik.sample(x, rng)[:, 0]
    assert stats.kstest(y, "uniform").pvalue > 0.01


def test_G_values():
    assert VonMises((2.0, 2.0)).G == pytest.approx(8 * math.pi)
    assert VonMises((1.5,), (0,)).G * 2 == pytest.approx(VonMises((3.0,), (0,)).G)
    assert lipschitz_bound(VonMises((2.0, 2.0))) == pytest.approx(8 * math.pi)


@given(st.floats(0, 5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_log_lipschitz_bound(kappa, y, x1, x2):
    lik = VonMises((kappa,), (0,))
    a, b = np.array([[x1, 0.0]]), np.array([[x2, 0.0]])
    d = abs((x1 - x2 + 0.5) % 1.0 - 0.5)
    gap = abs(lik.log_pdf(np.array([y]), a)[0] - lik.log_pdf(np.array([y]), b)[0])
    assert gap <= lik.G * d + 1e-12


def test_wrapped_gaussian_bound(rng):
    lik = WrappedGaussian((0.1, 0.2), (0, 1))
    G = lik.G
    for _ in range(200):
        y, x1, x2 = rng.random(2), rng.random((1, 2)), rng.random((1, 2))
        d = np.abs((x1 - x2 + 0.5) % 1.0 - 0.5).sum()
        assert abs(lik.log_pdf(y, x1)[0] - lik.log_pdf(y, x2)[0]) <= G * d + 1e-9


def test_weights_in_unit_interval(rng):
    lik = VonMises((2.0, 3.0))
    w = lik.weights(rng.random(2), rng.random((100, 2)))
    assert np.all((w > 0) & (w <= 1))


def test_scaled_keeps_weights_bitwise(rng):
    lik = VonMises((2.0, 2.0))
    y, x = rng.random(2), rng.random((50, 2))
    s = lik.scaled(17.0)
    assert np.array_equal(s.weights(y, x), lik.weights(y, x))
    assert s.log_const == pytest.approx(lik.log_const + math.log(17.0))


def test_simulation_is_deterministic(cat):
    lik = VonMises((2.0, 2.0))
    a = simulate_joint(cat, lik, np.array([0.1, 0.2]), 30, seed=5)
    b = simulate_joint(cat, lik, np.array([0.1, 0.2]), 30, seed=5)
    c = simulate_joint(cat, lik, np.array([0.1, 0.2]), 30, seed=6)
    assert np.array_equal(a.y_values, b.y_values)
    assert not np.array_equal(a.y_values, c.y_values)


def test_fixed_point_truth_constant(cat):
    obs = simulate_joint(cat, VonMises((2.0, 2.0)), np.array([0.0, 0.0]), 10, seed=0)
    assert np.all(obs.x_truth == 0.0)


def test_initial_state_streams(cat, solenoid):
    a = random_initial_state(cat, 3, 0)
    b = random_initial_state(cat, 3, 1)
    assert not np.array_equal(a, b)
    x = random_initial_state(solenoid, 3, 0, burn_in=5)
    assert solenoid.in_domain(x)


def test_table_likelihood():
    lik = TableLikelihood(np.array([[0.5, 0.2, 0.1], [0.5, 0.8, 0.9]]))
    x = np.array([[0.0], [1.0], [2.0]])
    assert np.allclose(lik.pdf(np.array([1.0]), x), [0.5, 0.8, 0.9])
    with pytest.raises(ValueError):
        TableLikelihood(np.array([[-1.0]]))


def test_window(cat):
    obs = simulate_joint(cat, VonMises((2.0, 2.0)), np.array([0.1, 0.2]), 10, seed=0)
    w = obs.window(3, 7)
    assert len(w) == 4 and np.array_equal(w.y_values, obs.y_values[3:7])


def test_validation():
    with pytest.raises(ValueError):
        VonMises((2.0,), (0, 1))
    with pytest.raises(ValueError):
        VonMises((-1.0,), (0,))
    with pytest.raises(ValueError):
        VonMises((1.0,), (0,)).scaled(0.0)
