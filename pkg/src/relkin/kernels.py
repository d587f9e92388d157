"""Collision kernels sigma(g, theta) = Phi(g) sigma0(theta) and the dyadic partition.

The angular factor is pinned to ``sin(theta) sigma0(theta) = theta**(-1-gamma)``
on (0, pi/2], which is the simplest choice with the required two-sided
singularity at grazing angles.  Kernels are symmetrized, so sigma0 vanishes for
theta > pi/2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, SingularAtZero

__all__ = [
    "KernelSpec",
    "phi",
    "sigma0",
    "sin_sigma0",
    "sigma",
    "angular_mass",
    "dyadic_chi",
    "dyadic_index",
    "dyadic_window",
]

HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the kernel family.

    Parameters
    ----------
    family : {"hard", "soft"}
    rho : float
        Exponent of Phi(g) = c_phi g**rho (rho = a for hard, rho = -b for soft).
    gamma : float
        Angular singularity order, in (0, 1).
    c_phi : float
    epsilon : float
        Angular cutoff; sigma0 is zeroed for theta < epsilon.
    angular_model : {"canonical", "constant", "table"}
        ``constant`` sets sigma0 = 1 (bounded kernel used by the
        counterexample).  ``table`` interpolates ``table_theta`` /
        ``table_values`` linearly.
    """

    family: str = "hard"
    rho: float = 0.0
    gamma: float = 0.5
    c_phi: float = 1.0
    epsilon: float = 0.0
    angular_model: str = "canonical"
    table_theta: tuple = field(default=(), repr=False)
    table_values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.family not in ("hard", "soft"):
            raise ConfigError(f"family must be 'hard' or 'soft', got {self.family!r}")
        if self.angular_model not in ("canonical", "constant", "table"):
            raise ConfigError(f"unknown angular model {self.angular_model!r}")
        g, r = float(self.gamma), float(self.rho)
        if not 0.0 < g < 1.0:
            raise ConfigError(
                f"gamma = {g} is outside (0, 1): sin(theta) sigma0 must behave like "
                "theta^(-1-gamma) with 0 < gamma < 1"
            )
        if self.family == "hard" and not -g <= r < 2.0:
            raise ConfigError(f"hard kernels need -gamma <= rho < 2, got rho = {r}")
        if self.family == "soft" and not -1.5 - g < r < -g:
            raise ConfigError(f"soft kernels need -3/2 - gamma < rho < -gamma, got rho = {r}")
        if not self.c_phi > 0:
            raise ConfigError("c_phi must be positive")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be non-negative")
        if self.epsilon >= HALF_PI:
            raise ConfigError("epsilon must be below pi/2")
        if self.angular_model == "table":
            th = np.asarray(self.table_theta, dtype=float)
            if th.size < 2 or th.size != len(self.table_values) or np.any(np.diff(th) <= 0):
                raise ConfigError("table model needs increasing theta nodes with matching values")

    @property
    def cutoff(self) -> bool:
        return self.epsilon > 0

    def with_(self, **changes) -> "KernelSpec":
        data = asdict(self)
        data.update(changes)
        return KernelSpec(**data)


def phi(g, spec: KernelSpec):
    """Phi(g) = c_phi * g**rho."""
    g = np.asarray(g, dtype=float)
    if spec.rho < 0 and np.any(g == 0):
        raise SingularAtZero("Phi is singular at g = 0 for negative rho")
    with np.errstate(divide="ignore"):
        out = spec.c_phi * g**spec.rho
    return out if out.ndim else float(out)


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta > HALF_PI * (1 + 1e-15)):
        raise DomainError("theta must lie in (0, pi/2]")
    return theta


def sin_sigma0(theta, spec: KernelSpec):
    """sin(theta) * sigma0(theta); for the canonical model theta**(-1-gamma)."""
    theta = _check_theta(theta)
    if spec.angular_model == "canonical":
        out = theta ** (-1.0 - spec.gamma)
    elif spec.angular_model == "constant":
        out = np.sin(theta)
    else:
        out = np.sin(theta) * np.interp(theta, spec.table_theta, spec.table_values)
    out = np.where(theta < spec.epsilon, 0.0, out)
    return out if out.ndim else float(out)


def sigma0(theta, spec: KernelSpec):
    """Angular factor sigma0(theta) on (0, pi/2]."""
    theta = _check_theta(theta)
    out = np.asarray(sin_sigma0(theta, spec)) / np.sin(theta)
    return out if out.ndim else float(out)


def sigma(g, theta, spec: KernelSpec):
    return phi(g, spec) * sigma0(theta, spec)


def angular_mass(spec: KernelSpec, lower=None):
    """Integral of sigma0 over the sphere, 2 pi * int sin(theta) sigma0 dtheta.

    Exact for the canonical and constant models.  ``lower`` overrides the
    cutoff; the value is infinite for the canonical model with no cutoff.
    """
    eps = spec.epsilon if lower is None else float(lower)
    if spec.angular_model == "canonical":
        if eps == 0:
            return np.inf
        gm = spec.gamma
        return 2 * np.pi * (eps**-gm - HALF_PI**-gm) / gm
    if spec.angular_model == "constant":
        return 2 * np.pi * np.cos(eps)
    from scipy.integrate import quad

    val, _ = quad(lambda t: sin_sigma0(t, spec), max(eps, 1e-300), HALF_PI, limit=200)
    return 2 * np.pi * val


def dyadic_chi(k, gbar):
    """Dyadic partition function chi_k(gbar).

    The indicator of [2^(-k-1), 2^(-k)).  These pieces sum to exactly one on
    (0, inf), take values in {0, 1} and have the required supports.
    """
    x = np.asarray(gbar, dtype=float)
    lo = 2.0 ** (-k - 1)
    hi = 2.0**-k
    out = ((x >= lo) & (x < hi)).astype(float)
    return out if out.ndim else float(out)


def dyadic_index(gbar):
    """The unique k with gbar in [2^(-k-1), 2^(-k))."""
    x = np.asarray(gbar, dtype=float)
    k = np.ceil(-np.log2(x)).astype(int) - 1
    # guard against log2 rounding right at the dyadic edges
    k = np.where(x >= 2.0 ** (-k), k - 1, k)
    k = np.where(x < 2.0 ** (-k - 1), k + 1, k)
    return k


def dyadic_window(gbar_min, gbar_max):
    """Range of k whose pieces meet [gbar_min, gbar_max]."""
    k_lo = int(np.floor(-np.log2(gbar_max))) - 1
    k_hi = int(np.floor(-np.log2(gbar_min)))
    return range(k_lo, k_hi + 1)
