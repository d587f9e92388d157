"""Juttner equilibrium, modified Bessel functions and equilibrium moments.

Two normalizations are exposed.  ``paperLiteral`` is exp(-p0)/(4 pi), whose
mass is K2(1) ~ 1.6248.  ``unitMass`` divides by K2(1) as well, so that the
equilibrium has unit mass; it is the default.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .minkowski import FourMomentum, energy

__all__ = [
    "EquilibriumSpec",
    "UNIT_MASS",
    "PAPER_LITERAL",
    "juttner",
    "sqrt_juttner",
    "log_sqrt_juttner",
    "bessel_i0",
    "bessel_i1",
    "bessel_i0e",
    "bessel_i1e",
    "bessel_k2",
    "Moments",
    "moments",
    "radial_energy_integral",
    "distance_moment",
]


@dataclass(frozen=True)
class EquilibriumSpec:
    normalization: str = "unitMass"

    def __post_init__(self):
        if self.normalization not in ("unitMass", "paperLiteral"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")

    @property
    def constant(self) -> float:
        """Prefactor c in J = c exp(-p0)."""
        if self.normalization == "paperLiteral":
            return 1.0 / (4.0 * np.pi)
        return 1.0 / (4.0 * np.pi * float(special.kv(2, 1.0)))


UNIT_MASS = EquilibriumSpec("unitMass")
PAPER_LITERAL = EquilibriumSpec("paperLiteral")


def _momenta(p):
    return p.p if isinstance(p, FourMomentum) else np.asarray(p, dtype=float)


def juttner(p, spec: EquilibriumSpec = UNIT_MASS):
    """J(p) = c exp(-p0) for spatial momenta of shape (..., 3)."""
    out = spec.constant * np.exp(-energy(_momenta(p)))
    return out if np.ndim(out) else float(out)


def sqrt_juttner(p, spec: EquilibriumSpec = UNIT_MASS):
    out = np.sqrt(spec.constant) * np.exp(-0.5 * energy(_momenta(p)))
    return out if np.ndim(out) else float(out)


def log_sqrt_juttner(p, spec: EquilibriumSpec = UNIT_MASS):
    return 0.5 * np.log(spec.constant) - 0.5 * energy(_momenta(p))


def _nonneg(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("Bessel I arguments must be non-negative")
    return y


def bessel_i0(y):
    """I0(y) = (1/2pi) int exp(y cos phi) dphi."""
    return special.i0(_nonneg(y))


def bessel_i1(y):
    return special.i1(_nonneg(y))


def bessel_i0e(y):
    """exp(-y) I0(y), safe for large y."""
    return special.i0e(_nonneg(y))


def bessel_i1e(y):
    return special.i1e(_nonneg(y))


def bessel_k2(z):
    """Standard modified Bessel function K2(z) for z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("K2 needs z > 0")
    out = special.kv(2, z)
    return out if out.ndim else float(out)


def radial_energy_integral(fun, order=64, p0_max=80.0):
    """Integral over R^3 of a radial integrand fun(p0, r).

    Uses r = sinh t, so dp = 4 pi sinh(t)^2 cosh(t) dt, with Gauss-Legendre
    on t in [0, arccosh(p0_max)].
    """
    x, w = np.polynomial.legendre.leggauss(order)
    tmax = np.arccosh(p0_max)
    t = 0.5 * tmax * (x + 1.0)
    w = 0.5 * tmax * w
    r = np.sinh(t)
    p0 = np.cosh(t)
    return 4.0 * np.pi * np.sum(w * r * r * p0 * fun(p0, r))


@dataclass(frozen=True)
class Moments:
    """Equilibrium moments under a given normalization.

    lam0 = int p0 J, lam00 = int p0^2 J, lam11 = int p1^2 J,
    lam11_0 = int p1^2 / p0 J and mass = int J.
    """

    mass: float
    lam0: float
    lam00: float
    lam11: float
    lam11_0: float
    lam22: float
    gap: float


@functools.lru_cache(maxsize=None)
def _moments_cached(normalization, order):
    c = EquilibriumSpec(normalization).constant

    def table(n):
        def integ(weight):
            return radial_energy_integral(lambda p0, r: c * np.exp(-p0) * weight(p0, r), order=n)

        return np.array(
            [
                integ(lambda p0, r: 1.0),
                integ(lambda p0, r: p0),
                integ(lambda p0, r: p0 * p0),
                integ(lambda p0, r: r * r / 3.0),
                integ(lambda p0, r: r * r / (3.0 * p0)),
            ]
        )

    lo = table(order)
    hi = table(2 * order)
    gap = float(np.max(np.abs(hi - lo) / np.abs(hi)))
    # p2^2 moment on an explicit 3D product grid, as an isotropy cross-check
    xt, wt_ = np.polynomial.legendre.leggauss(order)
    tmax = np.arccosh(80.0)
    t = 0.5 * tmax * (xt + 1.0)
    wr = 0.5 * tmax * wt_ * np.sinh(t) ** 2 * np.cosh(t)
    ct, wc = np.polynomial.legendre.leggauss(24)
    ph = 2 * np.pi * np.arange(24) / 24
    r = np.sinh(t)[:, None, None]
    st = np.sqrt(1 - ct**2)[None, :, None]
    p2 = r * st * np.sin(ph)[None, None, :]
    dens = c * np.exp(-np.cosh(t))[:, None, None]
    wgt = wr[:, None, None] * wc[None, :, None] * (2 * np.pi / 24)
    lam22 = np.sum(wgt * p2 * p2 * dens)
    return Moments(
        mass=hi[0], lam0=hi[1], lam00=hi[2], lam11=hi[3], lam11_0=hi[4], lam22=float(lam22), gap=gap
    )


def moments(spec: EquilibriumSpec = UNIT_MASS, order=64) -> Moments:
    """Equilibrium moments by radial quadrature, memoized per normalization."""
    return _moments_cached(spec.normalization, int(order))


def _shell_average(a, b, k):
    """int_{-1}^{1} (a - b c)^(k/2) dc for a >= b >= 0."""
    e = 0.5 * k + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == -2:
            val = np.log((a + b) / (a - b)) / b
        else:
            val = ((a + b) ** e - (a - b) ** e) / (b * e)
    return np.where(b > 1e-12 * a, val, 2.0 * a ** (0.5 * k))


def distance_moment(p, k, spec: EquilibriumSpec = UNIT_MASS, order=96):
    """int sqrt(J(q)) |p - q|^k dq for k > -3.

    The angular integral is done in closed form; the radial one is split at
    |q| = |p| where the integrand has a kink (or an integrable singularity).
    """
    pm = float(np.linalg.norm(_momenta(p)))
    x, w = np.polynomial.legendre.leggauss(order)
    c = np.sqrt(spec.constant)
    rmax = max(pm, 0.0) + 160.0
    edges = [0.0, pm, rmax] if pm > 0 else [0.0, rmax]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        # cluster nodes toward the kink at r = |p| with a quadratic map
        u = 0.5 * (x + 1.0)
        wu = 0.5 * w
        if hi == pm:
            r = hi - (hi - lo) * (1 - u) ** 2
            jac = 2 * (hi - lo) * (1 - u)
        else:
            r = lo + (hi - lo) * u**2
            jac = 2 * (hi - lo) * u
        a = pm * pm + r * r
        b = 2.0 * pm * r
        f = 2.0 * np.pi * r * r * c * np.exp(-0.5 * np.sqrt(1 + r * r)) * _shell_average(a, b, k)
        total += np.sum(wu * jac * f)
    return total
