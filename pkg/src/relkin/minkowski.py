"""Four-vectors on the unit mass shell and Lorentz matrices.

Conventions: metric diag(-1, 1, 1, 1), units with c = m = 1, and four-vectors
stored as arrays ``(..., 4)`` with the time component first.  Every function
broadcasts over leading axes so that large random sweeps stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ColinearPair, DegeneratePair, InvalidInput

__all__ = [
    "METRIC",
    "FourMomentum",
    "LorentzMatrix",
    "energy",
    "lift",
    "mass_shell_lift",
    "lorentz_inner",
    "gram_terms",
    "com_matrices",
    "com_matrices_closed_form",
    "com_transform",
    "invert_matrices",
    "invert_lorentz",
    "apply",
]

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])

# thresholds used by com_transform
COLINEAR_RTOL = 1e-12
DEGENERATE_G = 1e-12


def energy(p):
    """Mass-shell energy sqrt(1 + |p|^2) for momenta of shape (..., 3)."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(1.0 + np.einsum("...i,...i->...", p, p))


def lift(p):
    """Return four-vectors (p0, p) of shape (..., 4) on the mass shell."""
    p = np.asarray(p, dtype=float)
    return np.concatenate([energy(p)[..., None], p], axis=-1)


@dataclass(frozen=True)
class FourMomentum:
    """A spatial momentum together with its mass-shell energy."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=float).reshape(3)
        if not np.all(np.isfinite(arr)):
            raise InvalidInput(f"momentum must be finite, got {arr}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @property
    def p0(self) -> float:
        return float(energy(self.p))

    @property
    def vector(self) -> np.ndarray:
        return lift(self.p)

    def __iter__(self):
        return iter(self.vector)


def mass_shell_lift(p) -> FourMomentum:
    """Build the on-shell four-momentum with spatial part ``p``."""
    return FourMomentum(np.asarray(p, dtype=float))


def _as4(a):
    if isinstance(a, FourMomentum):
        return a.vector
    return np.asarray(a, dtype=float)


def lorentz_inner(a, b):
    """Minkowski product -a0 b0 + a.b (broadcasts over leading axes)."""
    a = _as4(a)
    b = _as4(b)
    return -a[..., 0] * b[..., 0] + np.einsum("...i,...i->...", a[..., 1:], b[..., 1:])


def gram_terms(p, q):
    """Return ``(p0*q0 - 1 - p.q, |p x q|)`` without cancellation.

    Uses (p0 q0)^2 - (1 + p.q)^2 = |p - q|^2 + |p x q|^2, so the first entry
    stays accurate when p and q are close.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = p - q
    c = np.cross(p, q)
    cross2 = np.einsum("...i,...i->...", c, c)
    num = np.einsum("...i,...i->...", d, d) + cross2
    den = energy(p) * energy(q) + 1.0 + np.einsum("...i,...i->...", p, q)
    return num / den, np.sqrt(cross2)


@dataclass(frozen=True)
class LorentzMatrix:
    """A 4x4 matrix acting on contravariant four-vectors."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float).reshape(4, 4)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def isometry_residual(self) -> float:
        m = self.entries
        return float(np.max(np.abs(m.T @ METRIC @ m - METRIC)))

    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    def is_valid(self, tol=1e-12) -> bool:
        # the isometry residual scales with the square of the boost factor
        scale = max(1.0, float(np.max(np.abs(self.entries)))) ** 2
        return (
            self.isometry_residual() <= tol * scale
            and abs(abs(self.det()) - 1.0) <= tol * scale
            and self.entries[0, 0] >= 1.0 - tol
        )


def com_matrices(p, q):
    """Center-of-momentum matrices for arrays of spatial momenta.

    Rows: the normalized total momentum, an in-plane unit vector, the normal
    (p x q)/|p x q| and the normalized difference.  The result maps p + q to
    (sqrt(s), 0, 0, 0) and q - p to (0, 0, 0, g).  No threshold checks are
    applied here; see :func:`com_transform`.

    Row 1 is formed as the product of the pure boost to the rest frame of
    p + q with the rotation onto the frame axes.  That agrees with the
    closed-form row but does not lose digits when g is small and the boost
    is large.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p0 = energy(p)
    q0 = energy(q)
    half_g2, cross = gram_terms(p, q)
    g = np.sqrt(2.0 * half_g2)
    rs = np.sqrt(g * g + 4.0)
    tot = p + q
    tot0 = p0 + q0
    diff = p - q
    # p0 - q0 without cancellation
    diff0 = np.einsum("...i,...i->...", diff, tot) / tot0
    tot_norm = np.linalg.norm(tot, axis=-1)
    axis = tot / np.where(tot_norm > 0, tot_norm, 1.0)[..., None]
    gam = tot0 / rs
    beta = tot_norm / tot0
    # in the rest frame of p + q only the component along the boost shrinks
    along = np.einsum("...i,...i->...", axis, diff)
    diff_cm = diff - ((1.0 - 1.0 / gam) * along)[..., None] * axis
    e3 = -diff_cm / g[..., None]
    normal = np.cross(p, q) / cross[..., None]
    e1 = np.cross(normal, e3)
    a = np.einsum("...i,...i->...", e1, axis)

    lam = np.empty(p.shape[:-1] + (4, 4))
    lam[..., 0, 0] = tot0 / rs
    lam[..., 0, 1:] = -tot / rs[..., None]
    lam[..., 1, 0] = -gam * beta * a
    lam[..., 1, 1:] = e1 + ((gam - 1.0) * a)[..., None] * axis
    lam[..., 2, 0] = 0.0
    lam[..., 2, 1:] = normal
    lam[..., 3, 0] = diff0 / g
    lam[..., 3, 1:] = -diff / g[..., None]
    return lam


def com_matrices_closed_form(p, q):
    """Row-by-row closed form of the same matrix (reference implementation)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p0 = energy(p)
    q0 = energy(q)
    half_g2, cross = gram_terms(p, q)
    g = np.sqrt(2.0 * half_g2)
    rs = np.sqrt(g * g + 4.0)
    pq = -p0 * q0 + np.einsum("...i,...i->...", p, q)
    lam = np.empty(p.shape[:-1] + (4, 4))
    lam[..., 0, 0] = (p0 + q0) / rs
    lam[..., 0, 1:] = -(p + q) / rs[..., None]
    lam[..., 1, 0] = 2.0 * cross / (g * rs)
    coef_p = (p0 + q0 * pq)[..., None]
    coef_q = (q0 + p0 * pq)[..., None]
    lam[..., 1, 1:] = 2.0 * (p * coef_p + q * coef_q) / (g * rs * cross)[..., None]
    lam[..., 2, 0] = 0.0
    lam[..., 2, 1:] = np.cross(p, q) / cross[..., None]
    lam[..., 3, 0] = (p0 - q0) / g
    lam[..., 3, 1:] = -(p - q) / g[..., None]
    return lam


def com_transform(p, q) -> LorentzMatrix:
    """Explicit center-of-momentum Lorentz matrix for the pair (p, q)."""
    pv = p.p if isinstance(p, FourMomentum) else np.asarray(p, dtype=float)
    qv = q.p if isinstance(q, FourMomentum) else np.asarray(q, dtype=float)
    half_g2, cross = gram_terms(pv, qv)
    g = np.sqrt(2.0 * half_g2)
    if g < DEGENERATE_G:
        raise DegeneratePair(f"relative momentum g = {g:.3e} is below {DEGENERATE_G}")
    if cross < COLINEAR_RTOL * energy(pv) * energy(qv):
        raise ColinearPair(f"|p x q| = {cross:.3e} is below the colinear threshold")
    return LorentzMatrix(com_matrices(pv, qv))


def invert_matrices(lam):
    """eta Lam^T eta for arrays of shape (..., 4, 4)."""
    lam = np.asarray(lam, dtype=float)
    return METRIC @ np.swapaxes(lam, -1, -2) @ METRIC


def invert_lorentz(lam: LorentzMatrix) -> LorentzMatrix:
    return LorentzMatrix(invert_matrices(lam.entries))


def apply(lam, a):
    """Matrix-vector product, broadcasting over leading axes."""
    m = lam.entries if isinstance(lam, LorentzMatrix) else np.asarray(lam, dtype=float)
    return np.einsum("...ij,...j->...i", m, _as4(a))
