"""Quadrature rules shared by the operator, linearized and norms modules."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigError
from .kernels import HALF_PI, KernelSpec, sin_sigma0

__all__ = [
    "QuadratureSpec",
    "gauss_legendre",
    "sinh_radial",
    "cos_rule",
    "azimuth_rule",
    "theta_rule",
    "theta_window_rule",
    "compensated_sum",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Orders and truncations for product rules.

    ``radial_order`` nodes per radial variable, ``sphere_order`` nodes per
    polar angle (the azimuth gets the same count), ``planar_order`` for the
    dual z-plane and Carleman surface variables.  ``omega_order`` sets the
    polar and azimuthal node counts of the collision-sphere rule (0 means
    ``sphere_order``).  ``truncation_r`` bounds radial variables whose
    integrand decays like sqrt(J).
    """

    radial_order: int = 32
    sphere_order: int = 16
    planar_order: int = 24
    truncation_r: float = 48.0
    mc_samples: int = 200_000
    seed: int = 0
    tol: float = 1e-6
    omega_order: int = 0

    @property
    def omega_nodes(self) -> int:
        return int(self.omega_order) if self.omega_order else int(self.sphere_order)

    def __post_init__(self):
        for name in ("radial_order", "sphere_order", "planar_order"):
            if int(getattr(self, name)) < 2:
                raise ConfigError(f"{name} must be at least 2")
        if not self.truncation_r > 0:
            raise ConfigError("truncation_r must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    def doubled(self) -> "QuadratureSpec":
        d = asdict(self)
        d["radial_order"] *= 2
        d["sphere_order"] *= 2
        d["planar_order"] *= 2
        d["omega_order"] *= 2
        return QuadratureSpec(**d)

    def with_(self, **changes) -> "QuadratureSpec":
        d = asdict(self)
        d.update(changes)
        return QuadratureSpec(**d)


def gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(int(n))
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def sinh_radial(n, rmax, scale=1.0):
    """Nodes r = scale sinh(t) on [0, rmax] with weights for dr.

    Dense near the origin, sparse in the tail; resolves both Gaussian and
    exponential decay with one rule.
    """
    tmax = np.arcsinh(rmax / scale)
    t, w = gauss_legendre(n, 0.0, tmax)
    return scale * np.sinh(t), w * scale * np.cosh(t)


def cos_rule(n):
    """Gauss-Legendre in cos(alpha) on [-1, 1]."""
    return gauss_legendre(n, -1.0, 1.0)


def azimuth_rule(n):
    phi = 2.0 * np.pi * np.arange(int(n)) / int(n)
    return phi, np.full(int(n), 2.0 * np.pi / int(n))


def theta_rule(kernel: KernelSpec, n, panels=4):
    """Nodes and weights for int_0^{pi/2} sin(theta) sigma0(theta) D(theta) dtheta.

    With a cutoff the rule is Gauss-Legendre on [epsilon, pi/2] with the
    kernel folded into the weights.  Without a cutoff the canonical kernel is
    singular; D is assumed to vanish like theta^2 (after azimuthal averaging)
    and the first of ``panels`` geometric panels uses Gauss-Jacobi with weight
    theta^(1 - gamma) applied to D / theta^2.
    """
    if kernel.cutoff:
        th, w = gauss_legendre(n, kernel.epsilon, HALF_PI)
        return th, w * sin_sigma0(th, kernel)
    if kernel.angular_model != "canonical":
        th, w = gauss_legendre(n, 0.0, HALF_PI)
        return th, w * sin_sigma0(th, kernel)
    edges = HALF_PI * 2.0 ** np.arange(-(panels - 1), 1, dtype=float)
    beta = 1.0 - kernel.gamma
    x, wj = roots_jacobi(int(n), 0.0, beta)
    a = edges[0]
    th0 = 0.5 * a * (x + 1.0)
    w0 = (0.5 * a) ** (beta + 1.0) * wj / th0**2
    nodes = [th0]
    weights = [w0]
    lo = a
    for hi in edges[1:]:
        th, w = gauss_legendre(n, lo, hi)
        nodes.append(th)
        weights.append(w * th ** (-1.0 - kernel.gamma))
        lo = hi
    return np.concatenate(nodes), np.concatenate(weights)


def theta_window_rule(kernel: KernelSpec, lo, hi, n):
    """Gauss-Legendre on per-point windows [lo, hi] (arrays), kernel in the weights.

    Returns arrays of shape lo.shape + (n,).  Empty windows get zero weight.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, w = np.polynomial.legendre.leggauss(int(n))
    span = np.maximum(hi - lo, 0.0)
    th = lo[..., None] + 0.5 * span[..., None] * (x + 1.0)
    th = np.where(span[..., None] > 0, th, HALF_PI)
    wt = 0.5 * span[..., None] * w * sin_sigma0(th, kernel)
    return th, wt


def compensated_sum(values):
    """Order-independent float sum (exact rounding via math.fsum)."""
    import math

    return math.fsum(np.ravel(values).tolist())
