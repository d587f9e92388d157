"""Relativistic Boltzmann collision operator: geometry, kernels and verification.

Submodules
----------
minkowski    four-vectors, invariants and center-of-momentum frames
geometry     collision map, Jacobians and pointwise inequalities
kernels      hard and soft kernel family with angular singularity
equilibrium  Juttner distribution, Bessel functions and moments
operator     omega, dual and Carleman forms of the collision operator
linearized   hydrodynamic projection, Dirichlet and norm forms
norms        weighted and fractional norms, Littlewood-Paley pieces
diagnostics  split zeta^B integrals, reduced bounds and Jacobian scans
suites       acceptance computations shared with the command line
"""

__version__ = "0.1.0"

from .equilibrium import PAPER_LITERAL, UNIT_MASS, EquilibriumSpec, juttner, moments, sqrt_juttner
from .errors import (
    ColinearPair,
    ConfigError,
    DegeneratePair,
    DomainError,
    EmptySurface,
    EmptyWindow,
    GridTooCoarse,
    InvalidInput,
    QuadratureNotConverged,
    RelkinError,
    SingularAtZero,
    StepTooSmall,
    UndefinedAngle,
)
from .functions import TestFunction, constant, default_family, gaussian, juttner_poly, sqrt_j
from .geometry import post_collision, prepost_jacobian_analytic
from .kernels import KernelSpec
from .minkowski import FourMomentum, LorentzMatrix, com_transform, energy, mass_shell_lift
from .operator import EvalResult, trilinear_carleman, trilinear_dual, trilinear_omega
from .quadrature import QuadratureSpec

__all__ = [
    "__version__",
    "EquilibriumSpec",
    "UNIT_MASS",
    "PAPER_LITERAL",
    "juttner",
    "sqrt_juttner",
    "moments",
    "KernelSpec",
    "QuadratureSpec",
    "EvalResult",
    "FourMomentum",
    "LorentzMatrix",
    "energy",
    "mass_shell_lift",
    "com_transform",
    "post_collision",
    "prepost_jacobian_analytic",
    "trilinear_omega",
    "trilinear_dual",
    "trilinear_carleman",
    "TestFunction",
    "gaussian",
    "juttner_poly",
    "sqrt_j",
    "constant",
    "default_family",
    "RelkinError",
    "InvalidInput",
    "ColinearPair",
    "DegeneratePair",
    "UndefinedAngle",
    "StepTooSmall",
    "SingularAtZero",
    "DomainError",
    "EmptySurface",
    "EmptyWindow",
    "QuadratureNotConverged",
    "GridTooCoarse",
    "ConfigError",
]
