import numpy as np
import pytest

from relkin.errors import InvalidInput, StepTooSmall, UndefinedAngle
from relkin.geometry import (
    cm_axis,
    collision_map_jacobian,
    exp_max_ratio,
    fixed_omega_rank,
    invariants,
    pointwise_inequality_suite,
    post_collision,
    post_collision_arrays,
    prepost_jacobian_analytic,
    prepost_jacobian_numeric,
    relative_g,
    scattering_cos,
)
from relkin.minkowski import energy


def test_conservation_and_g_invariance():
    rng = np.random.default_rng(0)
    p, q = rng.normal(size=(1000, 3)) * 5, rng.normal(size=(1000, 3)) * 5
    om = rng.normal(size=(1000, 3))
    om /= np.linalg.norm(om, axis=1)[:, None]
    a, b = post_collision_arrays(p, q, om)
    tot0 = energy(p) + energy(q)
    assert np.max(np.abs(a + b - p - q).max(axis=1) / tot0) < 1e-12
    assert np.max(np.abs(energy(a) + energy(b) - tot0) / tot0) < 1e-12
    np.testing.assert_allclose(relative_g(a, b), relative_g(p, q), rtol=1e-10)


def test_omega_along_axis_is_identity():
    p, q = np.array([1.0, 2.0, -0.5]), np.array([-1.0, 0.3, 0.7])
    a, b = post_collision(p, q, cm_axis(p, q))
    np.testing.assert_allclose(a.p, p, atol=1e-12)
    np.testing.assert_allclose(b.p, q, atol=1e-12)
    assert scattering_cos(p, q, a.p, b.p) == pytest.approx(1.0, abs=1e-12)


def test_rest_frame_formula():
    # p + q = 0: p' = (g/2) omega exactly
    p = np.array([0.0, 0.0, 2.0])
    om = np.array([1.0, 0.0, 0.0])
    a, b = post_collision(p, -p, om)
    np.testing.assert_allclose(a.p, [2.0, 0, 0], atol=1e-14)
    assert invariants(p, -p).g == pytest.approx(4.0)


def test_non_unit_omega_rejected():
    with pytest.raises(InvalidInput):
        post_collision([1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0])


def test_scattering_angle_needs_g():
    with pytest.raises(UndefinedAngle):
        scattering_cos([1.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0])


def test_moller_velocity():
    p, q = np.array([1.0, 0, 0]), np.array([0, 2.0, 0])
    inv = invariants(p, q)
    g2 = 2 * (energy(p) * energy(q) - 1)
    assert inv.g == pytest.approx(np.sqrt(g2))
    assert inv.vM == pytest.approx(np.sqrt(g2) * np.sqrt(g2 + 4) / (energy(p) * energy(q)))


def test_jacobian_involution_matches_analytic():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p, q = rng.normal(size=3) * 3, rng.normal(size=3) * 3
        om = rng.normal(size=3)
        om /= np.linalg.norm(om)
        ref = prepost_jacobian_analytic(p, q, om)
        got = prepost_jacobian_numeric(p, q, om, variables="pq_omega")
        assert got == pytest.approx(ref, rel=1e-6)


def test_fixed_omega_map_has_rank_four():
    rng = np.random.default_rng(6)
    p, q, om = rng.normal(size=3), rng.normal(size=3), np.array([0.0, 0.6, 0.8])
    assert fixed_omega_rank(p, q, om) == 4
    with pytest.raises(StepTooSmall):
        prepost_jacobian_numeric(p, q, om, variables="pq")


def test_collision_map_jacobian_precision_paths_agree():
    p, q, om = np.array([0.5, -0.5, 1.0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0])
    d = collision_map_jacobian(p, q, om)
    dm = collision_map_jacobian(p, q, om, precision=40)
    assert np.isfinite(d) and d != 0
    assert dm == pytest.approx(d, rel=1e-6)


def test_inequalities_hold_on_random_tuples():
    rng = np.random.default_rng(8)
    p, q = rng.normal(size=(5000, 3)) * 4, rng.normal(size=(5000, 3)) * 4
    om = rng.normal(size=(5000, 3))
    om /= np.linalg.norm(om, axis=1)[:, None]
    a, b = post_collision_arrays(p, q, om)
    z = rng.normal(size=(5000, 2))
    counts = pointwise_inequality_suite(p, q, a, b, z)
    assert sum(counts.values()) == 0


def test_exp_max_ratio_bounded():
    l = np.linspace(1.0, 30.0, 40)
    for frac in (0.0, 0.5, 0.99):
        r = exp_max_ratio(l, frac * l)
        assert np.all(r > 0) and np.all(np.isfinite(r))
