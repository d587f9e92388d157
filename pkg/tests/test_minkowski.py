import numpy as np
import pytest

from relkin.errors import ColinearPair, DegeneratePair, InvalidInput
from relkin.minkowski import (
    METRIC,
    FourMomentum,
    com_matrices,
    com_matrices_closed_form,
    com_transform,
    energy,
    gram_terms,
    invert_lorentz,
    lift,
    lorentz_inner,
)


def test_mass_shell():
    p = np.array([3.0, -4.0, 12.0])
    assert energy(p) == pytest.approx(np.sqrt(170.0), rel=1e-15)
    v = lift(p)
    assert lorentz_inner(v, v) == pytest.approx(-1.0, abs=1e-12)


def test_four_momentum_rejects_nan():
    with pytest.raises(InvalidInput):
        FourMomentum([np.nan, 0.0, 0.0])


def test_gram_terms_small_difference():
    # direct p0 q0 - 1 - p.q loses every digit here
    p = np.array([5.0, 1.0, -2.0])
    q = p + np.array([1e-9, 0.0, 0.0])
    half, cross = gram_terms(p, q)
    d = 1e-9
    # leading order: g^2 ~ |d|^2 - (d.p/p0)^2
    want = 0.5 * (d * d - (d * p[0]) ** 2 / energy(p) ** 2)
    assert half == pytest.approx(want, rel=1e-6)
    assert cross == pytest.approx(np.linalg.norm(np.cross(p, q)), rel=1e-12)


def test_com_transform_maps_total_and_difference():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p, q = rng.normal(size=3) * 4, rng.normal(size=3) * 4
        lam = com_transform(p, q).entries
        g = np.sqrt(2 * gram_terms(p, q)[0])
        rs = np.sqrt(g * g + 4)
        np.testing.assert_allclose(lam @ (lift(p) + lift(q)), [rs, 0, 0, 0], atol=1e-10 * rs)
        np.testing.assert_allclose(lam @ (lift(q) - lift(p)), [0, 0, 0, g], atol=1e-10 * rs)
        assert com_transform(p, q).isometry_residual() < 1e-12
        assert np.linalg.det(lam) == pytest.approx(1.0, abs=1e-9)


def test_closed_form_agrees():
    rng = np.random.default_rng(4)
    p, q = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    np.testing.assert_allclose(com_matrices(p, q), com_matrices_closed_form(p, q), atol=1e-11)


def test_inverse():
    lam = com_transform([1.0, 2.0, 0.5], [-0.3, 0.2, 1.0])
    inv = invert_lorentz(lam)
    np.testing.assert_allclose(inv.entries @ lam.entries, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(inv.entries, METRIC @ lam.entries.T @ METRIC, atol=1e-14)


def test_degenerate_inputs():
    with pytest.raises(DegeneratePair):
        com_transform([1.0, 0, 0], [1.0, 0, 0])
    with pytest.raises(ColinearPair):
        com_transform([1.0, 0, 0], [2.0, 0, 0])
