import numpy as np
import pytest
from scipy.integrate import quad

from relkin.errors import ConfigError, DomainError, SingularAtZero
from relkin.kernels import KernelSpec, angular_mass, dyadic_chi, dyadic_index, phi, sigma0, sin_sigma0


def test_gamma_range_rejected():
    with pytest.raises(ConfigError, match=r"\(0, 1\)"):
        KernelSpec(gamma=1.5)
    with pytest.raises(ConfigError):
        KernelSpec(gamma=0.0)


def test_rho_ranges():
    KernelSpec("hard", 1.5, 0.5)
    KernelSpec("soft", -1.0, 0.5)
    with pytest.raises(ConfigError):
        KernelSpec("hard", -0.6, 0.5)
    with pytest.raises(ConfigError):
        KernelSpec("soft", -0.4, 0.5)


def test_phi_power_law():
    k = KernelSpec("hard", 1.0, 0.5, c_phi=2.0)
    assert phi(3.0, k) == pytest.approx(6.0)
    with pytest.raises(SingularAtZero):
        phi(0.0, KernelSpec("soft", -1.0, 0.5))


def test_canonical_two_sided_bound_is_exact():
    k = KernelSpec(gamma=0.3)
    th = np.linspace(1e-4, np.pi / 2, 500)
    np.testing.assert_allclose(sin_sigma0(th, k) * th ** (1.3), 1.0, rtol=1e-13)
    np.testing.assert_allclose(sigma0(th, k) * np.sin(th), sin_sigma0(th, k), rtol=1e-14)


def test_domain():
    with pytest.raises(DomainError):
        sigma0(0.0, KernelSpec())
    with pytest.raises(DomainError):
        sigma0(2.0, KernelSpec())


def test_angular_mass_against_quad_and_divergence():
    g = 0.5
    for eps in (0.1, 0.05):
        k = KernelSpec(gamma=g, epsilon=eps)
        ref, _ = quad(lambda t: t ** (-1 - g), eps, np.pi / 2)
        assert angular_mass(k) == pytest.approx(2 * np.pi * ref, rel=1e-10)
    assert angular_mass(KernelSpec(gamma=g)) == np.inf
    for eps in (0.1, 0.01, 0.001):
        ratio = angular_mass(KernelSpec(gamma=g, epsilon=eps / 2)) / angular_mass(KernelSpec(gamma=g, epsilon=eps))
        assert ratio >= 2**g * (1 - 0.05)


def test_dyadic_partition():
    x = np.exp(np.linspace(-10, 5, 2001))
    total = sum(dyadic_chi(k, x) for k in range(-10, 20))
    np.testing.assert_array_equal(total, 1.0)
    k = dyadic_index(x)
    assert np.all((x >= 2.0 ** (-k - 1)) & (x < 2.0**-k))
    assert dyadic_index(0.5) == 0 and dyadic_index(0.25) == 1
