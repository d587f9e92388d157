import numpy as np
import pytest

from relkin import diagnostics as D
from relkin.errors import ConfigError, InvalidInput
from relkin.kernels import KernelSpec
from relkin.quadrature import QuadratureSpec


def test_k2_bound_matches_closed_form():
    for k in (-2, 0, 3):
        v, scale = D.reduced_k2_bound([0.3, 1.0, -0.5], [2.0, -1.0, 0.2], k, 0.5)
        assert v == pytest.approx(D.reduced_k2_closed_form(k, 0.5), rel=1e-10)
        assert v / scale == pytest.approx(np.pi * (2**0.5 - 1) / (64 * 0.5), rel=1e-10)


def test_exp_bounds_hold():
    rng = np.random.default_rng(2)
    pp, q = rng.normal(size=(500, 3)) * 3, rng.normal(size=(500, 3)) * 3
    rep = D.exp_bound_suite(pp, q, np.array([0.6, 0.8, 1.0]), np.linspace(0.0, 1.0, 5))
    assert rep.ok and sum(rep.violations.values()) == 0
    assert rep.max_ratio <= 1.0 + 1e-12


def test_parse_grid():
    g = D.parse_grid("-5:5:0.5")
    assert g.size == 21 and g[0] == -5 and g[-1] == 5
    with pytest.raises((ConfigError, InvalidInput, ValueError)):
        D.parse_grid("1:0")


def test_jacobian_scan_and_csv(tmp_path):
    rep = D.jacobian_scan([1.0, 0, 0], [0, 0, 1.0], "-1:1:0.5")
    assert rep.rows.shape == (125, 4)
    assert np.all(np.isfinite(rep.rows[:, 3]))
    path = tmp_path / "jac.csv"
    rep.to_csv(path)
    assert path.read_text().splitlines()[0] == "p1,p2,p3,det"
    fine = D.refine_scan(rep, [1.0, 0, 0], [0, 0, 1.0], n=5)
    assert fine.min_abs_det <= rep.min_abs_det * (1 + 1e-9) or np.isclose(fine.min_abs_det, rep.min_abs_det, rtol=0.5)


def test_zeta_b2_grows_b1_settles():
    k = KernelSpec(angular_model="constant")
    rep = D.zetaB_split((0, 0, 0), k, (20.0, 40.0), QuadratureSpec(32, 12, 24))
    assert rep.b2_increasing and rep.growthFactor >= 1.9
    assert rep.zetaB1Change < 0.01


def test_zeta_split_needs_bounded_kernel():
    with pytest.raises((InvalidInput, ConfigError)):
        D.zetaB_split((0, 0, 0), KernelSpec(), (5.0, 10.0))
