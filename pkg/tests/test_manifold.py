import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperfilter.manifold import (GOLDEN, NOT_IN_IMAGE, DomainError, ManifoldPoint, circ_diff, make_map,
                                  wrap01)

unit = st.floats(0, 1, exclude_max=True, allow_nan=False)


def test_cat_fixed_point(cat):
    assert np.array_equal(cat.forward(np.array([0.0, 0.0])), [0.0, 0.0])


def test_cat_half_point(cat):
    assert np.allclose(cat.forward(np.array([0.5, 0.5])), [0.5, 0.0], atol=0)


def test_cat_inverse_example(cat):
    assert np.allclose(cat.inverse(np.array([0.5, 0.0])), [0.5, 0.5], atol=0)


def test_solenoid_example(solenoid):
    out = solenoid.forward(np.array([0.0, 0.5, 0.0]))
    assert np.allclose(out, [0.0, 0.55, 0.0], atol=1e-15)


def test_solenoid_not_in_image(solenoid):
    # the image disks over angle 0 are centred at (+-0.5, 0) with radius 0.1
    y = np.array([0.0, 0.0, 0.0])
    x, ok = solenoid.preimage(y[None, :])
    assert not ok[0]
    assert solenoid.inverse(y) is NOT_IN_IMAGE
    assert not NOT_IN_IMAGE


def test_forward_rejects_points_outside_q(solenoid):
    with pytest.raises(DomainError):
        solenoid.forward(np.array([0.1, 0.9, 0.9]))


def test_manifold_point_validation():
    ManifoldPoint((0.2, 0.3))
    with pytest.raises(DomainError):
        ManifoldPoint((1.0, 0.3))
    with pytest.raises(DomainError):
        ManifoldPoint((0.2, 0.9, 0.9), chart="solid_torus")


def test_jacobians(cat, solenoid, rng):
    x = rng.random((10, 2))
    assert np.all(cat.jacobian_det(x) == 1.0)
    p = np.column_stack([rng.random(10), 0.3 * rng.random(10), np.zeros(10)])
    assert np.allclose(solenoid.jacobian_det(p), 0.02)
    assert np.allclose(np.linalg.det(solenoid.jacobian(p)), 0.02)
    assert cat.K1 == 0.0


def test_cat_stable_eigenvalue(cat):
    assert cat.lambda_s == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-15)
    assert cat.lambda_s == pytest.approx(0.381966, abs=1e-6)
    assert np.allclose(cat.A @ cat.v_s, cat.lambda_s * cat.v_s)
    assert np.allclose(cat.v_s * np.sign(cat.v_s[0]), np.array([1, -GOLDEN]) / np.hypot(1, GOLDEN))


@given(unit, unit, st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_cat_contracts_stable_leaf_exactly(x1, x2, s1, s2):
    cat = make_map("cat")
    x = np.array([x1, x2])
    p, q = wrap01(x + s1 * cat.v_s), wrap01(x + s2 * cat.v_s)
    d0 = cat.distance(p, q)
    d1 = cat.distance(cat.forward(p), cat.forward(q))
    assert d1 == pytest.approx(cat.lambda_s * d0, abs=1e-12)


@given(unit, unit)
def test_cat_inverse_roundtrip(x1, x2):
    cat = make_map("cat")
    x = np.array([x1, x2])
    back = cat.inverse(cat.forward(x))
    assert np.all(np.abs(circ_diff(back, x)) < 1e-12)


@given(unit, st.floats(0, 1), st.floats(0, 2 * np.pi))
def test_solenoid_preimage_roundtrip(t, r, phi):
    sol = make_map("solenoid")
    x = np.array([t, r * np.cos(phi), r * np.sin(phi)])
    y = sol.forward(x)
    back, ok = sol.preimage(y[None, :])
    assert ok[0]
    assert np.allclose(sol.forward(back[0]), y, atol=1e-12)


def test_leaf_spans_twice_half_length(cat):
    leaf = cat.stable_leaf_through(np.array([0.3, 0.4]), 0.05, 33)
    assert leaf.length == pytest.approx(0.1)
    assert leaf.n == 33


def test_leaf_image_contracts(cat, solenoid):
    leaf = cat.stable_leaf_through(np.array([0.3, 0.4]), 0.1)
    img = cat.leaf_image(leaf)
    assert img.length == pytest.approx(cat.lambda_s * leaf.length)
    sl = solenoid.stable_leaf_through(np.array([0.2, 0.1, 0.0]), 0.3)
    assert solenoid.leaf_image(sl).length == pytest.approx(0.1 * sl.length)


def test_holonomy_parallel_leaves(cat):
    a = cat.stable_leaf_through(np.array([0.3, 0.4]), 0.05)
    b = cat.stable_leaf_through(np.array([0.32, 0.41]), 0.05)
    h = cat.holonomy_between(a, b)
    assert np.all(h.jacobian(a.samples) == 1.0)
    # projected points lie on the line of b
    proj = h.apply(a.samples)
    off = circ_diff(proj, b.anchor) @ cat.v_u
    assert np.allclose(off, 0, atol=1e-12)


def test_identical_leaves_zero_distance(cat):
    a = cat.stable_leaf_through(np.array([0.3, 0.4]), 0.05)
    assert cat.holonomy_between(a, a).distance == 0.0


def test_preimage_leaves_are_closer(cat, rng):
    # d(gamma_i, delta_i) <= lambda_u d(gamma, delta) for parallel leaf pairs
    for _ in range(20):
        x = rng.random(2)
        y = wrap01(x + rng.uniform(-0.1, 0.1) * cat.v_u)
        g, d = cat.stable_leaf_through(x, 0.02), cat.stable_leaf_through(y, 0.02)
        gi = cat.stable_leaf_through(cat.inverse(x), 0.02)
        di = cat.stable_leaf_through(cat.inverse(y), 0.02)
        before = cat.holonomy_between(d, g).distance
        after = cat.holonomy_between(di, gi).distance
        assert after <= cat.lambda_u * before + 1e-12


def test_orbit_of_fixed_point(cat):
    orb = cat.orbit(np.array([0.0, 0.0]), 5)
    assert np.all(orb == 0.0)


def test_make_map_unknown():
    with pytest.raises(ValueError):
        make_map("henon")
