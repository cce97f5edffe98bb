import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperfilter.density import ChartGrid, DensityGrid, ulam_build
from hyperfilter.lab import (FitError, Lab, abs_continuity_ratio, attractor_neighborhood, box_panel,
                             covariance_residual, expectation_identity_check, fit_rate, forward_vs_pullback,
                             log_lipschitz_constant, log_trig_prior, solenoid_panel, support_check, torus_panel,
                             tv_distance, twin_experiment)
from hyperfilter.manifold import TWO_PI
from hyperfilter.observation import VonMises

EXTRA_PRIORS = ([[2, 0, 0.8, 0.0]], [[0, 2, 1.2, 0.5]])


@pytest.fixture(scope="module")
def stress_lab(cat, grid32, ulam32):
    return Lab(cat, grid32, ulam32, VonMises((2.0, 2.0)), torus_panel(stress=True))


# -- rate fits ---------------------------------------------------------------------

def test_fit_exact_geometric():
    n = np.arange(100)
    assert fit_rate(-0.3 * n, window=(0, 100)).beta_tilde == pytest.approx(0.3, abs=1e-10)


def test_fit_constant():
    f = fit_rate(np.full(30, -2.0))
    assert f.beta_tilde == pytest.approx(0.0, abs=1e-14) and f.r2 == 1.0


def test_fit_noisy(rng):
    errs = []
    for _ in range(100):
        n = np.arange(50)
        f = fit_rate(-0.3 * n + rng.normal(0, 0.1, 50))
        errs.append(abs(f.beta_tilde - 0.3) / 0.3)
    assert max(errs) < 0.1


def test_fit_rejects_short_or_nonfinite():
    with pytest.raises(FitError):
        fit_rate(np.zeros(3))
    with pytest.raises(FitError):
        fit_rate(np.array([0.0, -1.0, -np.inf, -3.0, -4.0, -5.0]))


@given(st.floats(0.01, 2.0), st.floats(-5, 5))
def test_fit_recovers_any_line(beta, c):
    logs = c - beta * np.arange(40)
    assert fit_rate(logs).beta_tilde == pytest.approx(beta, rel=1e-9, abs=1e-12)


# -- twin experiment ----------------------------------------------------------------

def test_identical_priors_zero_distance(lab32, priors32):
    rep = twin_experiment(lab32, [priors32[0], priors32[0]], 20, seed=0, fit_window=(10, 20))[0]
    assert all(v == 0.0 for v in rep.tv) and all(v == 0.0 for v in rep.panel_gap)


def test_uninformative_channel_still_mixes(cat, grid32, ulam32, priors32):
    lab = Lab(cat, grid32, ulam32, VonMises((0.0, 0.0)), torus_panel())
    rep = twin_experiment(lab, priors32, 60, seed=0, fit_window=(10, 60))[0]
    assert rep.fit.beta_tilde > 0


def test_rate_stable_across_seeds(lab32, priors32):
    betas = [twin_experiment(lab32, priors32, 100, s, fit_window=(10, 60))[0].fit.beta_tilde for s in range(20)]
    assert np.std(betas) < 0.5 * abs(np.mean(betas))


def test_report_serializes(lab32, priors32):
    d = twin_experiment(lab32, priors32, 30, seed=0, fit_window=(10, 30))[0].to_dict()
    assert set(d) >= {"tv", "theta_plus", "psi_gaps", "panel_gap", "fit"}
    assert len(d["tv"]) == 31


def test_tv_distance(grid32):
    u = DensityGrid.uniform(grid32)
    v = np.zeros(grid32.size)
    v[: grid32.size // 2] = 2.0
    assert tv_distance(u, DensityGrid(grid32, v)) == pytest.approx(0.5)


def test_log_trig_prior_lipschitz(grid32):
    terms = [[1, 0, 1.0, 0.3], [0, 1, 0.5, 1.0]]
    p = log_trig_prior(terms, grid32)
    assert p.mass == pytest.approx(1.0)
    assert log_lipschitz_constant(terms) == pytest.approx(TWO_PI * 1.5)


# -- pullback ---------------------------------------------------------------------

def test_forward_vs_pullback(stress_lab, grid32):
    priors = [DensityGrid.uniform(grid32)] + [log_trig_prior(t, grid32)
                                              for t in ([[1, 0, 1.0, 0.3]],) + EXTRA_PRIORS]
    out = forward_vs_pullback(stress_lab, priors, 30, 30, seed=0)
    assert out["gaps"][0][30] == 0.0
    for series in out["gaps"][1:]:
        assert np.all(np.diff(series[::5]) < 0)


def test_stress_function_gap_vanishes(stress_lab, priors32):
    rep = twin_experiment(stress_lab, priors32, 100, seed=1, fit_window=(10, 60))[0]
    stress = np.array(rep.psi_gaps["stress_log"])
    assert stress[-1] < 1e-6 * stress[0]


def test_covariance_residual(lab32):
    out = covariance_residual(lab32, seed=0)
    r = [out["r"][n] for n in (10, 20, 40)]
    assert r[0] > r[1] > r[2]
    assert out["cocycle_residual"] == 0.0


def test_expectation_identity_trivial_cases(cat, grid32, ulam32):
    ones = torus_panel()[:1]
    ones[0].fn = lambda x: np.ones(len(x))
    lab = Lab(cat, grid32, ulam32, VonMises((2.0, 2.0)), ones)
    out = expectation_identity_check(lab, 5, 10, seed=0, reference=[1.0])
    assert out["z"][0] == 0.0
    flat = Lab(cat, grid32, ulam32, VonMises((0.0, 0.0)), torus_panel())
    ref = flat.panel_values() @ np.ones(grid32.size) * grid32.cell_volume
    out = expectation_identity_check(flat, 5, 10, seed=0, reference=ref)
    assert np.allclose(out["mean"], ref, atol=1e-12)


def test_support_depth_zero(solenoid):
    g = ChartGrid("solid_torus", (16, 32, 32))
    lab = Lab(solenoid, g, ulam_build(solenoid, g, (2, 2, 2)), VonMises((2.0,), (0,)), solenoid_panel())
    nb = attractor_neighborhood(solenoid, g, seed=0, n_orbits=2000, length=50)
    out = support_check(lab, 3, seed=0, neighborhood=nb)
    assert out["outside_mass"][0] == pytest.approx(1.0 - out["neighborhood_volume"], abs=1e-12)
    assert out["outside_mass"][3] < out["outside_mass"][0]


def test_box_ratio(lab32, cat):
    panel = box_panel(cat, n_functions=3, seed=0)
    out = abs_continuity_ratio(lab32, panel, R=2, depth=10, seed=0)
    assert out["finite"] and out["positive"]
    assert out["C"] >= 1.0


def test_box_panel_constant_along_stable_segments(cat, rng):
    psi = box_panel(cat, n_functions=1, seed=4)[0]
    x = rng.random((4000, 2))
    y = (x + 0.01 * cat.v_s) % 1.0
    vx, vy = psi(x), psi(y)
    both = (vx > 0) & (vy > 0)
    assert both.sum() > 50
    assert np.allclose(vx[both], vy[both], atol=1e-12)
