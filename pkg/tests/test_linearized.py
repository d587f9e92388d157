import numpy as np
import pytest
from scipy.integrate import quad as squad
from scipy.special import kn

from relkin import linearized as L
from relkin.equilibrium import UNIT_MASS, juttner, moments
from relkin.functions import gaussian, juttner_poly, sqrt_j
from relkin.kernels import KernelSpec
from relkin.quadrature import QuadratureSpec

FAST = QuadratureSpec(radial_order=16, sphere_order=8, truncation_r=40.0)


def _radial(fun):
    return squad(lambda r: 4 * np.pi * r * r * fun(np.sqrt(1 + r * r)) * juttner([r, 0, 0]), 0, 80, limit=200, epsabs=1e-14)[0]


def test_mean_energy_matches_bessel_ratio():
    m = moments(UNIT_MASS)
    assert m.lam0 == pytest.approx(3.0 + kn(1, 1.0) / kn(2, 1.0), rel=1e-10)


def test_conservation_constants():
    l0, l00 = _radial(lambda e: e), _radial(lambda e: e * e)
    mu = L.conservation_constants()
    assert mu["mu1"] == pytest.approx(1 - l0**2 / l00, rel=1e-8)
    assert mu["mu3"] == pytest.approx(l0 - l00 / l0, rel=1e-8)
    assert mu["mu1"] > 0 and mu["mu3"] < 0


@pytest.mark.parametrize(
    "f, want",
    [
        (sqrt_j(), [1, 0, 0, 0, 0]),
        (juttner_poly({(0, 1, 0, 0): 1.0}), [0, 0, 1, 0, 0]),
        (juttner_poly({(0, 0, 0, 1): 1.0}), [0, 0, 0, 0, 1]),
        (juttner_poly({(0, 0, 0, 0): 2.0, (0, 0, 1, 0): -1.0, (0, 0, 0, 1): 0.5}), [2, 0, 0, -1, 0.5]),
    ],
)
def test_projection_basis(f, want):
    np.testing.assert_allclose(L.project_P(f).as_array(), want, atol=1e-10)


def test_micro_part_is_orthogonal():
    f = gaussian(0.8, center=(0.2, 0.0, -0.4), poly={(1, 0, 0, 1): 1.0})
    rep = L.microscopic_identity_check(f)
    assert rep.ok, rep.violations


def test_null_space_has_zero_dirichlet_form():
    k = KernelSpec()
    for f in (sqrt_j(), juttner_poly({(0, 0, 0, 1): 1.0})):
        assert abs(L.dirichlet_form(f, k, FAST)) < 1e-10


def test_dirichlet_form_nonnegative_and_symmetric_route():
    k = KernelSpec(epsilon=0.2)
    f = gaussian(1.0, poly={(0, 0, 0, 1): 1.0})
    q = QuadratureSpec(radial_order=24, sphere_order=12, truncation_r=40.0)
    a = L.dirichlet_form(f, k, q)
    b = L.dirichlet_form_symmetric(f, k, q)
    assert a > 0
    assert b == pytest.approx(a, rel=1e-3)
