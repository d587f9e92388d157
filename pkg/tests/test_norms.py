import numpy as np
import pytest
from scipy.integrate import quad as squad

from relkin import norms as N
from relkin.errors import GridTooCoarse, InvalidInput
from relkin.functions import gaussian


def test_weighted_l2_oracle():
    f = gaussian(1.0)
    want = squad(lambda r: 4 * np.pi * r * r * (1 + r * r) ** 0.5 * np.exp(-2 * r * r), 0, 20)[0]
    assert N.weighted_l2(f, 0.0, 1.0).value == pytest.approx(want, rel=1e-8)


def test_fractional_norm_against_monte_carlo():
    f = gaussian(1.0)
    det = N.fractional_norm(f, 0.0, 0.5)
    mean, se = N.fractional_norm_mc(f, 0.0, 0.5, samples=2_000_000, seed=1)
    # the estimator targets the squared norm
    assert abs(det.value**2 - mean) < 5 * se
    # the first term alone is the weighted L2 norm
    assert det.value**2 > N.weighted_l2(f, 0.0, 0.25).value


def test_fractional_norm_rejects_gamma():
    with pytest.raises(InvalidInput):
        N.fractional_norm(gaussian(1.0), 0.0, 1.2)


def test_hyperboloid_metric_band():
    p, q = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.0, 0.5])
    d = N.hyperboloid_metric(p, q)
    e = np.linalg.norm(p - q)
    assert e <= d <= np.sqrt(2) * e


def test_mother_bump_unit_volume_and_profile():
    b = N.mother_bump()
    assert b.volume() == pytest.approx(1.0, abs=1e-12)
    assert b(0.3) == 1.0 and b(1.2) == 0.0 and 0 < b(0.75) < 1


def test_constant_has_only_low_piece():
    dec = N.lp_decompose(lambda p: np.ones(np.shape(p)[:-1]), 3)
    inner = dec.grid.r < 4.0
    assert np.max(np.abs(dec.pieces[1:, inner])) < 1e-8
    assert np.max(np.abs(dec.pieces[0, inner] - 1.0)) < 1e-8


def test_reconstruction():
    f = gaussian(0.01)
    dec = N.lp_decompose(f, 6)
    r = dec.grid.r
    inner = r < 10.0
    assert np.max(np.abs(dec.pieces.sum(axis=0)[inner] - np.exp(-0.01 * r[inner] ** 2))) < 1e-6
    assert dec.reconstruction_gap() < 1e-6


def test_oscillation_concentrates_at_matching_scale():
    peaks = []
    for w in (8.0, 16.0, 32.0):
        def f(p, w=w):
            r = np.linalg.norm(p, axis=-1)
            return np.cos(w * r) * np.exp(-r * r / 4)
        dec = N.lp_decompose(f, 5, grid=N.RadialLattice(2.0**-7, 14.0))
        energy = (dec.pieces**2 * dec.grid.weights).sum(axis=1)
        peaks.append(int(np.argmax(energy)))
    assert np.all(np.diff(peaks) == 1)


def test_coarse_grid_rejected():
    with pytest.raises(GridTooCoarse):
        N.lp_decompose(gaussian(1.0), 4, grid=N.RadialLattice(0.1, 5.0))


def test_lp_ratio_stable():
    a = N.lp_inequality_ratio(gaussian(1.0), 0.0, 0.5, 4)
    b = N.lp_inequality_ratio(gaussian(1.0), 0.0, 0.5, 6)
    assert b["lp"] == pytest.approx(a["lp"], rel=0.2)
    assert b["lp_d1"] == pytest.approx(a["lp_d1"], rel=0.2)
