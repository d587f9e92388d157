import numpy as np
import pytest

from relkin import operator as op
from relkin.errors import InvalidInput, QuadratureNotConverged
from relkin.equilibrium import juttner
from relkin.functions import gaussian, sqrt_j
from relkin.geometry import invariants
from relkin.kernels import KernelSpec, angular_mass
from relkin.quadrature import QuadratureSpec

FAST = QuadratureSpec(radial_order=16, sphere_order=8, planar_order=16, truncation_r=30.0)


def test_omega_integral_of_one_is_angular_mass():
    k = KernelSpec(epsilon=0.1)
    p, q = np.array([[0.3, -1.0, 2.0]]), np.array([[1.5, 0.2, -0.4]])
    got = op.omega_integral(p, q, k, QuadratureSpec(omega_order=24), lambda P, Q, a, b: np.ones(a.shape[:-1]))
    inv = invariants(p[0], q[0])
    assert got[0] == pytest.approx(inv.vM * inv.g**k.rho * angular_mass(k), rel=1e-8)


def test_q_of_sqrt_equilibrium_vanishes():
    # energy conservation makes sqrt(J) sqrt(J) a collision invariant product
    F = sqrt_j()
    p = np.array([[0.0, 0.0, 0.5], [1.0, -2.0, 0.3]])
    v = op.collision_Q(F, F, p, KernelSpec(), FAST)
    np.testing.assert_allclose(v, 0.0, atol=1e-13)


def test_omega_matches_dual_and_carleman_coarse():
    k = KernelSpec(epsilon=0.2)
    q = QuadratureSpec(24, 12, 32, truncation_r=30.0)
    f, h, eta = gaussian(1.0), gaussian(0.7, poly={(0, 0, 0, 1): 1.0}), gaussian(1.3)
    w = op.trilinear_omega(f, h, eta, 0.0, k, q)
    d = op.trilinear_dual(f, h, eta, 0.0, k, q)
    assert d == pytest.approx(w, rel=1e-3)
    n1 = op.norm_term_omega(f, eta, 0.0, k, q)
    n2 = op.trilinear_carleman(f, eta, 0.0, k, q)
    assert n2 == pytest.approx(n1, rel=1e-3)


def test_com_reduction():
    k = KernelSpec(epsilon=0.2)
    lhs, rhs = op.com_reduction_check(lambda p, q, a, b: juttner(b), k, [0.5, -0.2, 1.0], [-1.0, 0.4, 0.1], QuadratureSpec())
    assert rhs == pytest.approx(lhs, rel=1e-6)
    with pytest.raises(InvalidInput):
        op.com_reduction_check(lambda *a: 1.0, KernelSpec(), [1.0, 0, 0], [0, 1.0, 0])


def test_gated_detects_unconverged_rule():
    with pytest.raises(QuadratureNotConverged):
        op.gated(lambda q: float(q.radial_order), QuadratureSpec())
    r = op.gated(lambda q: 2.0, QuadratureSpec(), count=lambda q: q.radial_order)
    assert r.value == 2.0 and r.gap == 0.0 and r.nodes == 64


def test_pair_grid_shift_keeps_symmetry():
    with pytest.raises(InvalidInput):
        op.pair_grid("iso", FAST, 5.0, center=(0.0, 0.0, 1.0))
    with pytest.raises(InvalidInput):
        op.pair_grid("axi", FAST, 5.0, center=(1.0, 0.0, 0.0))
    g0 = op.pair_grid("axi", FAST, 5.0)
    g1 = op.pair_grid("axi", FAST, 5.0, center=(0.0, 0.0, 1.0))
    np.testing.assert_allclose(g1.p - g0.p, np.broadcast_to([0, 0, 1.0], g0.p.shape))
    np.testing.assert_allclose(g1.w, g0.w)


def test_pair_grid_integrates_gaussian_pair():
    grid = op.pair_grid("iso", QuadratureSpec(64, 32), 8.0)
    val = np.dot(grid.w, np.exp(-np.sum(grid.p**2, axis=1) - np.sum(grid.q**2, axis=1)))
    assert val == pytest.approx(np.pi**3, rel=1e-8)


def test_dyadic_loss_scales_like_gamma():
    k = KernelSpec("hard", 0.0, 0.5)
    cp, cq = (0.0, 0.0, 10.0), (0.0, 0.0, -10.0)
    f, h = gaussian(1.0, cq), gaussian(1.0, cp)
    grid = op.gaussian_pair_grid(cp, 2.0, cq, 1.0, 6)
    q = QuadratureSpec(16, 8, 16, omega_order=16)
    ks = np.arange(-3, 4)
    vals = [abs(op.dyadic_T(int(j), "-", f, h, h, 0.0, k, q, grid=grid)) for j in ks]
    slope = np.polyfit(ks, np.log2(vals), 1)[0]
    assert abs(slope - 0.5) < 0.15


def test_com_reduction_constant_and_odd():
    k = KernelSpec(epsilon=0.2)
    p, q = np.array([0.5, -0.2, 1.0]), np.array([-1.0, 0.4, 0.1])
    lhs, rhs = op.com_reduction_check(lambda *a: np.ones(np.shape(a[2])[:-1]), k, p, q, QuadratureSpec())
    inv = invariants(p, q)
    assert rhs == pytest.approx(0.5 * inv.g * np.sqrt(inv.s) * angular_mass(k), rel=1e-10)
    assert lhs == pytest.approx(rhs, rel=1e-6)
    # odd under reflection of p' - q' through the plane orthogonal to p + q in the rest frame
    axis = (p + q) / np.linalg.norm(p + q)

    def odd(P, Q, a, b):
        return np.einsum("...i,i->...", a - b, np.cross(axis, p - q))

    lhs, rhs = op.com_reduction_check(odd, k, p, q, QuadratureSpec())
    scale = 0.5 * inv.g * np.sqrt(inv.s) * angular_mass(k) * inv.g * np.linalg.norm(p - q)
    assert abs(lhs) < 1e-8 * scale and abs(rhs) < 1e-8 * scale


def _zeta_samples(p0):
    r = np.sqrt(np.asarray(p0) ** 2 - 1.0)
    pts = r[:, None] * np.array([0.0, 0.0, 1.0])
    return op.zeta_weight(pts, KernelSpec(), QuadratureSpec(radial_order=32, sphere_order=16))


def test_zeta_weight_asymptotic_exponent():
    # literal requirement: slope of log zeta vs log p0 over [5, 50] within 0.1 of (rho + gamma) / 2
    p0 = np.geomspace(5.0, 50.0, 6)
    z = _zeta_samples(p0)
    slope = np.polyfit(np.log(p0), np.log(np.abs(z)), 1)[0]
    assert abs(slope - 0.25) <= 0.1, f"fitted exponent {slope:.3f}"


def test_zeta_weight_positive():
    z = _zeta_samples(np.array([1.0, 1.5, 3.0, 10.0]))
    assert np.all(z > 0), z
