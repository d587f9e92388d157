"""Closed-form momentum functions with analytic gradients.

A :class:`TestFunction` is a finite sum of atoms ``envelope(p) * poly(p)``.
The envelope is a Gaussian exp(-alpha |p - c|^2) or the square-root
equilibrium sqrt(J(p)).  The polynomial is a sum of monomials
p1^i p2^j p3^k p0^m.  Sums and scalar multiples stay in the class, so
projections such as (I - P) f can be represented exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .equilibrium import UNIT_MASS, EquilibriumSpec
from .errors import InvalidInput
from .minkowski import energy

__all__ = ["Atom", "TestFunction", "gaussian", "juttner_poly", "sqrt_j", "constant", "default_family"]

Monomial = Tuple[int, int, int, int]


@dataclass(frozen=True)
class Atom:
    kind: str  # "gauss" | "juttner" | "const"
    terms: Tuple[Tuple[Monomial, float], ...]
    alpha: float = 0.0
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    normalization: str = "unitMass"

    def __post_init__(self):
        if self.kind not in ("gauss", "juttner", "const"):
            raise InvalidInput(f"unknown atom kind {self.kind!r}")
        if self.kind == "gauss" and not self.alpha > 0:
            raise InvalidInput("Gaussian atoms need alpha > 0")

    def envelope(self, p, p0):
        if self.kind == "gauss":
            d = p - np.asarray(self.center)
            return np.exp(-self.alpha * np.einsum("...i,...i->...", d, d))
        if self.kind == "juttner":
            c = EquilibriumSpec(self.normalization).constant
            return np.sqrt(c) * np.exp(-0.5 * p0)
        return np.ones(p.shape[:-1])

    def envelope_grad_factor(self, p, p0):
        """grad(envelope) / envelope."""
        if self.kind == "gauss":
            return -2.0 * self.alpha * (p - np.asarray(self.center))
        if self.kind == "juttner":
            return -0.5 * p / p0[..., None]
        return np.zeros_like(p)

    def poly(self, p, p0):
        out = np.zeros(p.shape[:-1])
        for (i, j, k, m), c in self.terms:
            out = out + c * p[..., 0] ** i * p[..., 1] ** j * p[..., 2] ** k * p0**m
        return out

    def poly_grad(self, p, p0):
        out = np.zeros(p.shape)
        comps = [p[..., 0], p[..., 1], p[..., 2]]
        for (i, j, k, m), c in self.terms:
            pw = (i, j, k)
            base = [comps[a] ** pw[a] for a in range(3)]
            e0 = p0**m
            for a in range(3):
                if pw[a] > 0:
                    d = c * pw[a] * comps[a] ** (pw[a] - 1) * e0
                    for b in range(3):
                        if b != a:
                            d = d * base[b]
                    out[..., a] += d
            if m > 0:
                d = c * m * p0 ** (m - 1) * base[0] * base[1] * base[2]
                out += (d / p0)[..., None] * p
        return out

    @property
    def degree(self) -> int:
        return max((sum(mono) for mono, _ in self.terms), default=0)

    @property
    def isotropic(self) -> bool:
        return all(mono[:3] == (0, 0, 0) for mono, _ in self.terms) and not any(self.center)

    def scaled(self, c):
        return Atom(self.kind, tuple((mono, c * v) for mono, v in self.terms), self.alpha, self.center, self.normalization)


@dataclass(frozen=True)
class TestFunction:
    """A sum of atoms; callable on momenta of shape (..., 3)."""

    atoms: Tuple[Atom, ...]
    name: str = field(default="f", compare=False)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        p0 = energy(p)
        out = np.zeros(p.shape[:-1])
        for a in self.atoms:
            out = out + a.envelope(p, p0) * a.poly(p, p0)
        return out

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        p0 = energy(p)
        out = np.zeros(p.shape)
        for a in self.atoms:
            env = a.envelope(p, p0)
            out += env[..., None] * (a.envelope_grad_factor(p, p0) * a.poly(p, p0)[..., None] + a.poly_grad(p, p0))
        return out

    def __add__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        return TestFunction(self.atoms + other.atoms, f"{self.name}+{other.name}")

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        c = float(c)
        return TestFunction(tuple(a.scaled(c) for a in self.atoms), self.name)

    __rmul__ = __mul__

    @property
    def isotropic(self) -> bool:
        return all(a.isotropic for a in self.atoms)

    @property
    def axisymmetric(self) -> bool:
        """Invariant under rotations about the p3 axis."""
        for a in self.atoms:
            if a.center[0] or a.center[1]:
                return False
            for (i, j, _, _), _c in a.terms:
                if i or j:
                    return False
        return True

    def extent(self, rtol=1e-15) -> float:
        """Radius outside which |f| is below rtol times a bound on its peak."""
        r = np.linspace(0.0, 400.0, 40001)
        bound = np.zeros_like(r)
        for a in self.atoms:
            coef = sum(abs(v) for _, v in a.terms)
            grow = coef * np.sqrt(1 + r * r) ** a.degree
            if a.kind == "gauss":
                off = np.linalg.norm(a.center)
                env = np.exp(-a.alpha * np.maximum(r - off, 0.0) ** 2)
            elif a.kind == "juttner":
                env = np.exp(-0.5 * np.sqrt(1 + r * r))
            else:
                env = np.ones_like(r)
            bound = bound + grow * env
        peak = bound.max()
        big = np.nonzero(bound > rtol * peak)[0]
        return float(r[big[-1]]) if big.size else 0.0


def _terms(poly):
    if poly is None:
        return (((0, 0, 0, 0), 1.0),)
    if isinstance(poly, dict):
        return tuple((tuple(int(x) for x in k), float(v)) for k, v in poly.items())
    return tuple((tuple(int(x) for x in k), float(v)) for k, v in poly)


def gaussian(alpha=1.0, center=(0.0, 0.0, 0.0), poly=None, name="gauss"):
    """poly(p) exp(-alpha |p - center|^2); ``poly`` maps (i, j, k, m) to coefficients."""
    c = tuple(float(x) for x in center)
    return TestFunction((Atom("gauss", _terms(poly), float(alpha), c),), name)


def juttner_poly(poly=None, spec: EquilibriumSpec = UNIT_MASS, name="jpoly"):
    """poly(p) sqrt(J(p))."""
    return TestFunction((Atom("juttner", _terms(poly), normalization=spec.normalization),), name)


def sqrt_j(spec: EquilibriumSpec = UNIT_MASS):
    return juttner_poly(None, spec, name="sqrtJ")


def constant(c=1.0):
    return TestFunction((Atom("const", (((0, 0, 0, 0), float(c)),)),), "const")


def default_family():
    """Ten fixed isotropic functions used by the coercivity and Littlewood-Paley suites.

    Isotropy keeps every quadratic form a five-dimensional integral.
    """
    fam = [
        gaussian(1.0, name="g1"),
        gaussian(0.5, name="g2"),
        gaussian(2.0, name="g3"),
        gaussian(1.0, poly={(0, 0, 0, 2): 1.0}, name="g4"),
        gaussian(0.75, poly={(0, 0, 0, 1): 1.0}, name="g5"),
        gaussian(1.0, poly={(0, 0, 0, 0): -0.5, (0, 0, 0, 2): 1.0}, name="g6"),
        gaussian(1.0, poly={(0, 0, 0, 0): 1.0, (0, 0, 0, 1): -0.5}, name="g7"),
        juttner_poly({(0, 0, 0, 2): 1.0}, name="j1"),
        juttner_poly({(0, 0, 0, 0): 1.0, (0, 0, 0, 1): -1.0, (0, 0, 0, 2): 0.25}, name="j2"),
        gaussian(1.5, poly={(0, 0, 0, 3): 1.0}, name="g8"),
    ]
    return fam
