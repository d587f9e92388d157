"""Linearized operator: hydrodynamic projection, Dirichlet and norm-type forms.

Everything here uses the unit-mass equilibrium, for which the projection
coefficients below are exact.  The null space of L is spanned by sqrt(J),
p_i sqrt(J) and p0 sqrt(J).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import UNIT_MASS, moments, sqrt_juttner
from .functions import TestFunction, juttner_poly, sqrt_j
from .kernels import KernelSpec
from .minkowski import energy
from .operator import _p_points, _weight, omega_integral, pair_grid, trilinear_omega, zeta_weight
from .quadrature import QuadratureSpec, sinh_radial

__all__ = [
    "HydroCoefficients",
    "volume_integral",
    "project_P",
    "projection_function",
    "micro_part",
    "dirichlet_form",
    "dirichlet_form_symmetric",
    "n_form",
    "conservation_constants",
    "microscopic_identity_check",
]


_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class HydroCoefficients:
    A: float
    B: tuple
    C: float

    def as_array(self):
        return np.array([self.A, *self.B, self.C])


def _volume_quad(quad: QuadratureSpec, extent):
    q3 = quad.with_(radial_order=2 * quad.radial_order, sphere_order=2 * quad.sphere_order)
    return _p_points("full", q3, extent)


def volume_integral(fun, quad: QuadratureSpec = None, extent=None):
    """int_{R^3} fun(p) dp on a spherical product grid (no symmetry assumed)."""
    quad = quad or QuadratureSpec()
    p, w = _volume_quad(quad, quad.truncation_r if extent is None else extent)
    return float(np.dot(w, fun(p)))


def _basis_moments(f, quad):
    p, w = _volume_quad(quad, quad.truncation_r)
    fs = f(p) * sqrt_juttner(p, UNIT_MASS)
    return (
        float(np.dot(w, fs)),
        np.array([np.dot(w, fs * p[:, i]) for i in range(3)]),
        float(np.dot(w, fs * energy(p))),
    )


def project_P(f: TestFunction, quad: QuadratureSpec = None) -> HydroCoefficients:
    """Coefficients of Pf = (A + B.p + C p0) sqrt(J)."""
    quad = quad or QuadratureSpec()
    m = moments(UNIT_MASS)
    mass, mom, en = _basis_moments(f, quad)
    C = (en - m.lam0 * mass) / (m.lam00 - m.lam0**2)
    A = mass - m.lam0 * C
    B = mom / m.lam11
    # coefficients that vanish by symmetry come out at round-off level;
    # zero them so the symmetry class of (I-P)f is preserved
    scale = _ROUNDOFF * max(abs(A), abs(C), float(np.max(np.abs(B))), 1e-300)
    A, C = (0.0 if abs(x) <= scale else x for x in (A, C))
    B = np.where(np.abs(B) <= scale, 0.0, B)
    return HydroCoefficients(float(A), tuple(float(b) for b in B), float(C))


def projection_function(coef: HydroCoefficients) -> TestFunction:
    poly = {(0, 0, 0, 0): coef.A, (1, 0, 0, 0): coef.B[0], (0, 1, 0, 0): coef.B[1], (0, 0, 1, 0): coef.B[2], (0, 0, 0, 1): coef.C}
    return juttner_poly({k: v for k, v in poly.items() if v != 0.0} or {(0, 0, 0, 0): 0.0}, UNIT_MASS, name="Pf")


def micro_part(f: TestFunction, quad: QuadratureSpec = None) -> TestFunction:
    """(I - P) f, represented exactly as f minus a polynomial times sqrt(J)."""
    out = f - projection_function(project_P(f, quad))
    return TestFunction(out.atoms, f"(I-P){f.name}")


def _grid_for(f, quad, extent=None):
    mode = "iso" if f.isotropic else ("axi" if f.axisymmetric else "full")
    return pair_grid(mode, quad, quad.truncation_r if extent is None else extent)


def dirichlet_form(f: TestFunction, kernel: KernelSpec, quad: QuadratureSpec = None):
    """<Lf, f> with L = -Gamma(f, sqrt J) - Gamma(sqrt J, f)."""
    quad = quad or QuadratureSpec()
    s = sqrt_j(UNIT_MASS)
    return -trilinear_omega(f, s, f, 0.0, kernel, quad) - trilinear_omega(s, f, f, 0.0, kernel, quad)


def dirichlet_form_symmetric(f: TestFunction, kernel: KernelSpec, quad: QuadratureSpec = None):
    """(1/4) int v sigma J(p) J(q) (phi' + phi'_q - phi - phi_q)^2 with phi = f / sqrt(J).

    Independent of :func:`dirichlet_form`; non-negative by construction.
    """
    quad = quad or QuadratureSpec()
    grid = _grid_for(f, quad)

    def integrand(P, Q, a, b):
        # sqrt(J(p)J(q)) (phi' + phi'_q - phi - phi_q), written through f so phi never overflows;
        # sqrt(J(p)J(q)) = sqrt(J(p')J(q')) on the collision set
        d = (
            f(a) * sqrt_juttner(b, UNIT_MASS)
            + f(b) * sqrt_juttner(a, UNIT_MASS)
            - f(P) * sqrt_juttner(Q, UNIT_MASS)
            - f(Q) * sqrt_juttner(P, UNIT_MASS)
        )
        return d * d

    inner = omega_integral(grid.p, grid.q, kernel, quad, integrand)
    return 0.25 * float(np.dot(grid.w, inner))


def n_form(f: TestFunction, l=0.0, kernel: KernelSpec = None, quad: QuadratureSpec = None):
    """Norm-type form.

    (1/2) int v sigma (f(p') - f(p))^2 sqrt(J(q') J(q)) w^{2l}(p)
    + int zeta(p) w^{2l}(p) |f(p)|^2, with zeta the full weight of
    :func:`relkin.operator.zeta_weight`.  For l = 0 this equals
    -<Gamma(sqrt J, f), f>.
    """
    quad = quad or QuadratureSpec()
    grid = _grid_for(f, quad)

    def integrand(P, Q, a, b):
        d = f(a) - f(P)
        return d * d * sqrt_juttner(Q, UNIT_MASS) * sqrt_juttner(b, UNIT_MASS)

    inner = omega_integral(grid.p, grid.q, kernel, quad, integrand)
    diff = 0.5 * float(np.dot(grid.w * _weight(l, grid.p), inner))
    return diff + _zeta_term(f, l, kernel, quad)


def _zeta_term(f, l, kernel, quad):
    ext = f.extent(1e-16)
    if f.isotropic:
        r, wr = sinh_radial(quad.radial_order, ext)
        p = r[:, None] * np.array([0.0, 0.0, 1.0])
        w = 4.0 * np.pi * r * r * wr
    else:
        mode = "axi" if f.axisymmetric else "full"
        p, w = _p_points(mode, quad, ext)
    z = zeta_weight(p, kernel, quad)
    return float(np.dot(w * _weight(l, p), z * f(p) ** 2))


def conservation_constants(order=64):
    """mu1..mu4 of the local conservation laws (unit-mass equilibrium)."""
    m = moments(UNIT_MASS, order)
    return {
        "mu1": 1.0 - m.lam0**2 / m.lam00,
        "mu2": m.lam11_0 - m.lam0 * m.lam11 / m.lam00,
        "mu3": m.lam0 - m.lam00 / m.lam0,
        "mu4": m.lam11_0 - m.lam11 / m.lam0,
    }


@dataclass
class IdentityReport:
    values: dict = field(default_factory=dict)
    tol: float = 1e-6

    @property
    def violations(self):
        return {k: v for k, v in self.values.items() if not abs(v) <= self.tol}

    @property
    def ok(self):
        return not self.violations


def microscopic_identity_check(f: TestFunction, quad: QuadratureSpec = None, tol=1e-6) -> IdentityReport:
    """Moment identities of the hydrodynamic decomposition.

    Checks, for g = (I-P)f, that <g, sqrt(J)(1, p_i, p0)> = 0, and that the
    moments and fluxes of Pf computed by direct quadrature reproduce the
    closed-form lambda combinations:
    time moments (A + lam0 C, lam11 B_i, lam0 A + lam00 C) and flux tensors
    int (p_j/p0)(1, p_i, p0) Pf sqrt(J) = (lam11_0 B_j, delta_ij (lam11_0 A + lam11 C), lam11 B_j).
    Entries are residuals scaled by the magnitude of the compared quantity.
    """
    quad = quad or QuadratureSpec()
    m = moments(UNIT_MASS)
    coef = project_P(f, quad)
    A, B, C = coef.A, np.array(coef.B), coef.C
    g = micro_part(f, quad)
    Pf = projection_function(coef)
    p, w = _volume_quad(quad, quad.truncation_r)
    sj = sqrt_juttner(p, UNIT_MASS)
    p0 = energy(p)
    gs = g(p) * sj
    pfs = Pf(p) * sj
    out = {}
    scale = max(1.0, float(np.dot(w, np.abs(f(p) * sj) * (1 + p0))))
    out["micro.mass"] = float(np.dot(w, gs)) / scale
    for i in range(3):
        out[f"micro.momentum{i + 1}"] = float(np.dot(w, gs * p[:, i])) / scale
    out["micro.energy"] = float(np.dot(w, gs * p0)) / scale
    ref = {
        "moment.mass": A + m.lam0 * C,
        "moment.energy": m.lam0 * A + m.lam00 * C,
    }
    got = {"moment.mass": np.dot(w, pfs), "moment.energy": np.dot(w, pfs * p0)}
    for i in range(3):
        ref[f"moment.p{i + 1}"] = m.lam11 * B[i]
        got[f"moment.p{i + 1}"] = np.dot(w, pfs * p[:, i])
    for j in range(3):
        vj = p[:, j] / p0
        ref[f"flux1.{j + 1}"] = m.lam11_0 * B[j]
        got[f"flux1.{j + 1}"] = np.dot(w, pfs * vj)
        ref[f"fluxE.{j + 1}"] = m.lam11 * B[j]
        got[f"fluxE.{j + 1}"] = np.dot(w, pfs * p[:, j])
        for i in range(3):
            ref[f"fluxP.{i + 1}{j + 1}"] = (m.lam11_0 * A + m.lam11 * C) if i == j else 0.0
            got[f"fluxP.{i + 1}{j + 1}"] = np.dot(w, pfs * p[:, i] * vj)
    cscale = max(1.0, abs(A), float(np.linalg.norm(B)), abs(C))
    for key in ref:
        out[key] = float(got[key] - ref[key]) / cscale
    return IdentityReport(out, tol)
