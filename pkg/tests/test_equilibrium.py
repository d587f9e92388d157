import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from relkin.equilibrium import (
    PAPER_LITERAL,
    UNIT_MASS,
    bessel_i0,
    bessel_i0e,
    bessel_i1,
    bessel_k2,
    distance_moment,
    juttner,
    moments,
    sqrt_juttner,
)


def test_unit_mass_normalization():
    assert moments(UNIT_MASS).mass == pytest.approx(1.0, abs=1e-8)
    ref, _ = quad(lambda r: 4 * np.pi * r * r * juttner([r, 0, 0]), 0, 80, limit=200)
    assert ref == pytest.approx(1.0, abs=1e-8)


def test_constant_is_one_over_4pi_k2():
    assert UNIT_MASS.constant == pytest.approx(1.0 / (4 * np.pi * float(mp.besselk(2, 1))), rel=1e-13)
    assert PAPER_LITERAL.constant != UNIT_MASS.constant


@pytest.mark.parametrize("z", [0.1, 1.0, 7.5, 40.0])
def test_bessel_against_mpmath(z):
    assert bessel_k2(z) == pytest.approx(float(mp.besselk(2, z)), rel=1e-12)
    assert bessel_i0(z) == pytest.approx(float(mp.besseli(0, z)), rel=1e-12)
    assert bessel_i1(z) == pytest.approx(float(mp.besseli(1, z)), rel=1e-12)
    assert bessel_i0e(z) == pytest.approx(float(mp.besseli(0, z) * mp.exp(-z)), rel=1e-12)


def test_sqrt():
    p = np.array([[0.1, 0.2, 0.3], [4.0, 0, 1.0]])
    np.testing.assert_allclose(sqrt_juttner(p) ** 2, juttner(p), rtol=1e-14)


def test_distance_moment_k0_is_constant():
    vals = [distance_moment([0, 0, r], 0) for r in (0.0, 1.0, 10.0)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-10)


def test_distance_moment_band():
    for k in (-1, 1, 2):
        r = [distance_moment([0, 0, np.sqrt(x * x - 1)], k) / x**k for x in (1.0, 5.0, 20.0, 50.0)]
        assert min(r) > 0 and max(r) / min(r) < 100
