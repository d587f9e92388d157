"""Collision invariants, the post-collisional map and the dual-frame quantities.

All array functions take spatial momenta of shape ``(..., 3)`` and broadcast.
Energies are always recomputed from the mass shell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, StepTooSmall, UndefinedAngle
from .minkowski import FourMomentum, com_matrices, energy, gram_terms, lift

__all__ = [
    "CollisionInvariants",
    "DualFrameQuantities",
    "invariants",
    "relative_g",
    "post_collision",
    "post_collision_arrays",
    "cm_axis",
    "scattering_cos",
    "prepost_jacobian_analytic",
    "prepost_jacobian_numeric",
    "fixed_omega_rank",
    "collision_map_jacobian",
    "dual_frame",
    "pointwise_inequality_suite",
    "exp_max_ratio",
]


def _vec(a):
    if isinstance(a, FourMomentum):
        return a.p
    a = np.asarray(a, dtype=float)
    # accept four-vectors too and drop the time component
    return a[..., 1:] if a.shape[-1] == 4 else a


def relative_g(a, b):
    """Relative momentum g(a, b) = sqrt(2(-a.b - 1)) in the stable form."""
    half_g2, _ = gram_terms(_vec(a), _vec(b))
    return np.sqrt(2.0 * np.maximum(half_g2, 0.0))


@dataclass(frozen=True)
class CollisionInvariants:
    g: float
    s: float
    vM: float


def invariants(p, q) -> CollisionInvariants:
    """g, s = g^2 + 4 and the Moller velocity g sqrt(s)/(p0 q0)."""
    pv, qv = _vec(p), _vec(q)
    g = relative_g(pv, qv)
    s = g * g + 4.0
    vm = g * np.sqrt(s) / (energy(pv) * energy(qv))
    if np.ndim(g) == 0:
        return CollisionInvariants(float(g), float(s), float(vm))
    return CollisionInvariants(g, s, vm)


def post_collision_arrays(p, q, omega):
    """Post-collisional spatial momenta (p', q') for arrays of inputs.

    ``omega`` is the unit direction of p' in the center-of-momentum frame
    reached by the pure boost along p + q.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    omega = np.asarray(omega, dtype=float)
    tot = p + q
    tot0 = energy(p) + energy(q)
    g = relative_g(p, q)
    rs = np.sqrt(g * g + 4.0)
    xi = tot0 / rs
    tot2 = np.einsum("...i,...i->...", tot, tot)
    small = tot2 < 1e-24
    along = np.einsum("...i,...i->...", tot, omega) / np.where(small, 1.0, tot2)
    stretch = np.where(small, 0.0, (xi - 1.0) * along)
    half = 0.5 * g[..., None] * (omega + stretch[..., None] * tot)
    return 0.5 * tot + half, 0.5 * tot - half


def post_collision(p, q, omega):
    """Post-collisional pair as FourMomentum objects."""
    om = np.asarray(omega, dtype=float)
    if abs(np.linalg.norm(om) - 1.0) > 1e-12:
        raise InvalidInput("omega must be a unit vector")
    a, b = post_collision_arrays(_vec(p), _vec(q), om)
    return FourMomentum(a), FourMomentum(b)


def cm_axis(p, q):
    """Unit direction of p in the center-of-momentum frame of (p, q).

    The scattering angle is the angle between ``omega`` and this axis.  It is
    formed from p - q with the boost-parallel part contracted by 1/xi, which
    avoids cancellation for large boosts.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    tot = p + q
    tot0 = energy(p) + energy(q)
    g = relative_g(p, q)
    xi = tot0 / np.sqrt(g * g + 4.0)
    tot_norm = np.linalg.norm(tot, axis=-1)
    axis = tot / np.where(tot_norm > 0, tot_norm, 1.0)[..., None]
    diff = p - q
    along = np.einsum("...i,...i->...", axis, diff)
    k = diff - ((1.0 - 1.0 / xi) * along)[..., None] * axis
    return k / np.linalg.norm(k, axis=-1)[..., None]


def _minkowski_diff(a, b):
    """a - b as four-vectors with the time part computed without cancellation."""
    d = a - b
    d0 = np.einsum("...i,...i->...", d, a + b) / (energy(a) + energy(b))
    return d0, d


def scattering_cos(p, q, pp, qq, clamp=True):
    """cos(theta) = (p - q).(p' - q') / g^2 with the Minkowski product."""
    p, q, pp, qq = (_vec(x) for x in (p, q, pp, qq))
    g = relative_g(p, q)
    if np.any(g < 1e-12):
        raise UndefinedAngle("scattering angle undefined for g < 1e-12")
    d0, d = _minkowski_diff(p, q)
    e0, e = _minkowski_diff(pp, qq)
    c = (-d0 * e0 + np.einsum("...i,...i->...", d, e)) / (g * g)
    return np.clip(c, -1.0, 1.0) if clamp else c


def prepost_jacobian_analytic(p, q, omega):
    """p'0 q'0 / (p0 q0)."""
    p, q = _vec(p), _vec(q)
    a, b = post_collision_arrays(p, q, omega)
    return energy(a) * energy(b) / (energy(p) * energy(q))


def _collision_map(x, omega):
    a, b = post_collision_arrays(x[..., :3], x[..., 3:], omega)
    return np.concatenate([a, b], axis=-1)


def _fd_det(fun, x, h, dim):
    """Central-difference Jacobian determinant of ``fun`` at x."""
    eye = np.eye(dim) * h
    plus = fun(x[None, :] + eye)
    minus = fun(x[None, :] - eye)
    jac = (plus - minus).T / (2.0 * h)
    return np.linalg.det(jac)


def _tangent_basis(w):
    a = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(w, a)
    u /= np.linalg.norm(u)
    return u, np.cross(w, u)


def _involution_map(x, charts):
    """(p, q, t) -> (p', q', t') with omega and omega' in gnomonic charts.

    omega' is the center-of-momentum direction of p, so applying the
    collision map to (p', q', omega') returns (p, q).  Both charts have unit
    area density at their base points.
    """
    (w0, u0, v0), (w1, u1, v1) = charts
    p = x[..., :3]
    q = x[..., 3:6]
    om = w0 + x[..., 6:7] * u0 + x[..., 7:8] * v0
    om = om / np.linalg.norm(om, axis=-1)[..., None]
    a, b = post_collision_arrays(p, q, om)
    k = cm_axis(p, q)
    den = k @ w1
    t = np.stack([(k @ u1) / den, (k @ v1) / den], axis=-1)
    return np.concatenate([a, b, t], axis=-1)


def prepost_jacobian_numeric(p, q, omega, h=1e-4, variables="pq"):
    """Finite-difference Jacobian determinant of the pre-post map.

    ``variables="pq"`` differentiates (p, q) -> (p', q') at fixed omega (a
    6x6 determinant).  In center-of-momentum coordinates this map depends on
    (p, q) only through p + q and g, so the determinant vanishes and the
    cancellation check raises StepTooSmall.

    ``variables="pq_omega"`` differentiates the involution
    (p, q, omega) -> (p', q', omega') with omega' the center-of-momentum
    direction of p; this 8x8 determinant is measured against dp dq domega.

    Central differences at h and h/2 are combined by Richardson
    extrapolation.  StepTooSmall is raised when the two estimates disagree
    by more than 10 percent.
    """
    if not 1e-7 <= h <= 1e-3:
        raise InvalidInput("step must lie in [1e-7, 1e-3]")
    pv = np.asarray(_vec(p), dtype=float)
    qv = np.asarray(_vec(q), dtype=float)
    om = np.asarray(omega, dtype=float)
    if variables == "pq":
        x = np.concatenate([pv, qv])
        dim = 6

        def fun(y):
            return _collision_map(y, om)

    elif variables == "pq_omega":
        w1 = cm_axis(pv, qv)
        charts = ((om, *_tangent_basis(om)), (w1, *_tangent_basis(w1)))
        x = np.concatenate([pv, qv, [0.0, 0.0]])
        dim = 8

        def fun(y):
            return _involution_map(y, charts)

    else:
        raise InvalidInput(f"unknown variables {variables!r}")

    d1 = _fd_det(fun, x, h, dim)
    d2 = _fd_det(fun, x, h / 2, dim)
    if abs(d1 - d2) > 0.1 * max(abs(d1), abs(d2)):
        raise StepTooSmall(f"determinant unstable across steps: {d1:.3e} vs {d2:.3e}")
    return (4.0 * d2 - d1) / 3.0


def fixed_omega_rank(p, q, omega, h=1e-5, rtol=1e-7):
    """Numerical rank of the 6x6 derivative of (p, q) -> (p', q') at fixed omega."""
    x = np.concatenate([_vec(p), _vec(q)]).astype(float)
    om = np.asarray(omega, dtype=float)
    eye = np.eye(6) * h
    jac = (_collision_map(x + eye, om) - _collision_map(x - eye, om)).T / (2 * h)
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(sv > rtol * sv[0]))


def _collision_map_mp(pv, qv, om, dps):
    import mpmath as mp

    with mp.workdps(dps):
        p = [mp.mpf(x) for x in pv]
        q = [mp.mpf(x) for x in qv]
        w = [mp.mpf(x) for x in om]
        p0 = mp.sqrt(1 + sum(x * x for x in p))
        q0 = mp.sqrt(1 + sum(x * x for x in q))
        tot = [a + b for a, b in zip(p, q)]
        g2 = 2 * (p0 * q0 - sum(a * b for a, b in zip(p, q)) - 1)
        g = mp.sqrt(max(g2, 0))
        xi = (p0 + q0) / mp.sqrt(g2 + 4)
        t2 = sum(x * x for x in tot)
        along = sum(a * b for a, b in zip(tot, w)) / t2 if t2 > 0 else 0
        return [tot[i] / 2 + g / 2 * (w[i] + (xi - 1) * along * tot[i]) for i in range(3)]


def collision_map_jacobian(p, q, omega, h=1e-5, precision=None):
    """3x3 determinant of p -> p' at fixed (q, omega) by central differences.

    With ``precision`` set to a digit count, the map and the differences are
    evaluated in mpmath at that working precision.
    """
    pv = np.asarray(_vec(p), dtype=float)
    qv = np.asarray(_vec(q), dtype=float)
    om = np.asarray(omega, dtype=float)
    if precision is None:
        def fun(y):
            return post_collision_arrays(y, np.broadcast_to(qv, y.shape), om)[0]

        d1 = _fd_det(fun, pv, h, 3)
        d2 = _fd_det(fun, pv, h / 2, 3)
        return (4.0 * d2 - d1) / 3.0

    import mpmath as mp

    with mp.workdps(precision):
        hh = mp.mpf(h)
        cols = []
        for i in range(3):
            up = list(pv)
            dn = list(pv)
            up[i] = mp.mpf(up[i]) + hh
            dn[i] = mp.mpf(dn[i]) - hh
            fu = _collision_map_mp(up, qv, om, precision)
            fd = _collision_map_mp(dn, qv, om, precision)
            cols.append([(a - b) / (2 * hh) for a, b in zip(fu, fd)])
        jac = mp.matrix(3, 3)
        for i in range(3):
            for k in range(3):
                jac[k, i] = cols[i][k]
        return float(mp.det(jac))


@dataclass(frozen=True)
class DualFrameQuantities:
    gL: np.ndarray
    gLam: np.ndarray
    sLam: np.ndarray
    cosThetaLam: np.ndarray
    l: np.ndarray
    j: np.ndarray
    A: np.ndarray
    A0: np.ndarray
    gt: np.ndarray
    st: np.ndarray


def dual_frame(pp, q, z) -> DualFrameQuantities:
    """Frame quantities at (p', q, z) for the z-plane representation.

    ``z`` has shape (..., 2).  The shift A moves p' to the pre-collisional
    momentum p = p' + A, and q' has energy q0 + A0.
    """
    a = np.asarray(_vec(pp), dtype=float)
    q = np.asarray(_vec(q), dtype=float)
    z = np.asarray(z, dtype=float)
    a0 = energy(a)
    q0 = energy(q)
    half_g2, cross = gram_terms(a, q)
    gt2 = 2.0 * half_g2
    gt = np.sqrt(gt2)
    st = gt2 + 4.0
    rst = np.sqrt(st)
    z2 = np.einsum("...i,...i->...", z, z)
    # sqrt(|z|^2 + 1) - 1 without cancellation
    rm1 = z2 / (np.sqrt(z2 + 1.0) + 1.0)
    gl2 = 0.5 * st * rm1
    glam2 = gt2 + gl2
    slam = glam2 + 4.0
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_lam = np.where(glam2 > 0, 2.0 * gt2 / glam2 - 1.0, 1.0)
    l = 0.25 * (a0 + q0)
    j = cross / (2.0 * gt)
    lam = com_matrices(a, q)
    row1 = lam[..., 1, 1:]
    normal = lam[..., 2, 1:]
    z1 = z[..., 0]
    z2c = z[..., 1]
    A = (
        0.5 * (a + q) * rm1[..., None]
        + 0.5 * row1 * (rst * z1)[..., None]
        + 0.5 * normal * (rst * z2c)[..., None]
    )
    A0 = 2.0 * l * rm1 - 2.0 * j * z1
    return DualFrameQuantities(
        gL=np.sqrt(gl2),
        gLam=np.sqrt(glam2),
        sLam=slam,
        cosThetaLam=np.clip(cos_lam, -1.0, 1.0),
        l=l,
        j=j,
        A=A,
        A0=A0,
        gt=gt,
        st=st,
    )


def exp_max_ratio(l, j, nz=2001):
    """max over |z| <= 1 of exp(-l sqrt(|z|^2+1) + j|z|) divided by exp(-sqrt(l^2-j^2)).

    Evaluated on a uniform |z| grid refined around the continuous maximizer.
    """
    l = np.asarray(l, dtype=float)
    j = np.asarray(j, dtype=float)
    zz = np.linspace(0.0, 1.0, nz)
    # the unconstrained maximizer is |z| = j / sqrt(l^2 - j^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        zstar = np.clip(j / np.sqrt(np.maximum(l * l - j * j, 1e-300)), 0.0, 1.0)
    grid = np.concatenate([np.broadcast_to(zz, l.shape + (nz,)), zstar[..., None]], axis=-1)
    expo = -l[..., None] * np.sqrt(grid * grid + 1.0) + j[..., None] * grid
    return np.exp(expo.max(axis=-1) + np.sqrt(np.maximum(l * l - j * j, 0.0)))


# explicit constants for the "up to a constant" inequalities
G_UPPER_C = 2.0  # g <= sqrt(s) <= 2 sqrt(p0 q0)
L_UPPER_C = 0.5  # l = (p'0 + q0)/4 <= p'0 q0 / 2
GLAM_LOWER_C = 2.0  # (1 + r)/2 >= max(r, sqrt 2)/2
GLAM_UPPER_C = 1.0  # s_Lam = s~ (1 + (r - 1)/2) <= s~ r
J2_UPPER_C = 1.0


def pointwise_inequality_suite(p, q, pp, qq, z, rtol=1e-10):
    """Check the pointwise collision inequalities on arrays of tuples.

    (p, q) is a pre-collisional pair, (pp, qq) the post-collisional pair and
    z a dual-plane point; the dual quantities are formed on (pp, q).  Returns a
    dict mapping each inequality name to its number of violations.
    """
    p, q, pp, qq = (np.asarray(_vec(x), dtype=float) for x in (p, q, pp, qq))
    z = np.asarray(z, dtype=float)
    p0, q0, pp0, qq0 = energy(p), energy(q), energy(pp), energy(qq)
    g = relative_g(p, q)
    s = g * g + 4.0
    gbar = relative_g(pp, p)
    gt = relative_g(pp, q)
    dpq = np.linalg.norm(p - q, axis=-1)
    crs = np.linalg.norm(np.cross(p, q), axis=-1)
    tol = rtol
    out = {}

    def record(name, ok):
        out[name] = int(np.count_nonzero(~np.asarray(ok)))

    record("s >= max(g^2, 4)", s >= np.maximum(g * g, 4.0) * (1 - tol))
    record("s <= 4 p0 q0", s <= 4.0 * p0 * q0 * (1 + tol))
    record("g <= 2 sqrt(p0 q0)", g <= G_UPPER_C * np.sqrt(p0 * q0) * (1 + tol))
    record("|p-q| / sqrt(p0 q0) <= g", dpq / np.sqrt(p0 * q0) <= g * (1 + tol) + 1e-15)
    record(
        "sqrt(|p-q|^2 + |p x q|^2) / sqrt(p0 q0) <= g <= |p-q|",
        (np.sqrt(dpq**2 + crs**2) / np.sqrt(p0 * q0) <= g * (1 + tol) + 1e-15)
        & (g <= dpq * (1 + tol) + 1e-15),
    )
    record("|p0 - q0| <= |p-q|", np.abs(p0 - q0) <= dpq * (1 + tol) + 1e-15)
    record("p0 + q0 <= 2 p0 q0", p0 + q0 <= 2.0 * p0 * q0 * (1 + tol))

    df = dual_frame(pp, q, z)
    l, j = df.l, df.j
    dpq2 = np.linalg.norm(pp - q, axis=-1)
    ok_pair = df.gt > 1e-8
    record("j <= l", (j <= l * (1 + tol)) | ~ok_pair)
    record("l <= C p'0 q0", l <= L_UPPER_C * pp0 * q0 * (1 + tol))
    record("j^2 <= C p'0 q0", (j * j <= J2_UPPER_C * pp0 * q0 * (1 + tol)) | ~ok_pair)
    lhs = l * l - j * j
    rhs = df.st * dpq2**2 / (16.0 * np.maximum(df.gt, 1e-300) ** 2)
    record("l^2 - j^2 identity", (np.abs(lhs - rhs) <= 1e-8 * np.maximum(l * l, 1.0)) | ~ok_pair)
    record(
        "sqrt(l^2 - j^2) >= |p'-q|/4",
        (np.sqrt(np.maximum(rhs, 0.0)) >= 0.25 * dpq2 * (1 - tol)) | ~ok_pair,
    )
    r = np.sqrt(np.einsum("...i,...i->...", z, z) + 1.0)
    glam2 = df.gLam**2
    record(
        "g~^2 max(r, sqrt2) <= C g_Lam^2",
        df.gt**2 * np.maximum(r, np.sqrt(2.0)) <= GLAM_LOWER_C * glam2 * (1 + tol),
    )
    record("g_Lam^2 <= s_Lam", glam2 <= df.sLam)
    record("s_Lam <= C s~ r", df.sLam <= GLAM_UPPER_C * df.st * r * (1 + tol))

    cos_t = scattering_cos(p, q, pp, qq, clamp=False)
    fwd = cos_t >= 0
    record(
        "g~ <= g <= sqrt2 g~ (cos >= 0)",
        ~fwd | ((gt <= g * (1 + tol)) & (g <= np.sqrt(2.0) * gt * (1 + tol))),
    )
    record("p0 <= p'0 + q'0 <= 2 p'0 q'0", (p0 <= (pp0 + qq0) * (1 + tol)) & (pp0 + qq0 <= 2 * pp0 * qq0 * (1 + tol)))

    P, Q, PP, QQ = lift(p), lift(q), lift(pp), lift(qq)
    scale = (p0 + q0) ** 2

    def mink(a, b):
        return -a[..., 0] * b[..., 0] + np.einsum("...i,...i->...", a[..., 1:], b[..., 1:])

    record(
        "Minkowski products preserved",
        (np.abs(mink(P, Q) - mink(PP, QQ)) <= 1e-10 * scale)
        & (np.abs(mink(PP, Q) - mink(P, QQ)) <= 1e-10 * scale)
        & (np.abs(mink(PP, P) - mink(QQ, Q)) <= 1e-10 * scale),
    )
    record("g^2 = g~^2 + gbar^2", np.abs(g * g - gt * gt - gbar * gbar) <= 1e-10 * np.maximum(s, 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        half_angle = np.sqrt(np.clip((1.0 - cos_t) / 2.0, 0.0, 1.0))
        ok_g = g > 1e-6
        record("sin(theta/2) = gbar/g", ~ok_g | (np.abs(half_angle - gbar / np.where(ok_g, g, 1.0)) <= 1e-8))
    dist = np.sqrt(np.linalg.norm(p - pp, axis=-1) ** 2 + (p0 - pp0) ** 2)
    dpp = np.linalg.norm(p - pp, axis=-1)
    record("|p-p'| <= d <= sqrt2 |p-p'|", (dpp <= dist * (1 + tol) + 1e-15) & (dist <= np.sqrt(2) * dpp * (1 + tol) + 1e-15))
    factor = compensating_factor_raw(df.st, df.gt, df.sLam, df.gLam, rho=0.0)
    record("0 <= compensating factor <= 1", (factor >= 0) & (factor <= 1 + tol))
    return out


def compensating_factor_raw(st, gt, slam, glam, rho):
    """s~ Phi(g~) g~^4 / (s_Lam Phi(g_Lam) g_Lam^4) with Phi = C g^rho."""
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(glam > 0, gt / np.where(glam > 0, glam, 1.0), 1.0)
        return (st / slam) * ratio ** (4.0 - rho)
