"""Counterexample integrals, the reduced dyadic bound, exponential bounds and
the Jacobian near-zero scan.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import UNIT_MASS, EquilibriumSpec, bessel_i0e, sqrt_juttner
from .errors import DegeneratePair, EmptyWindow, InvalidInput, QuadratureNotConverged
from .geometry import collision_map_jacobian, dual_frame, relative_g
from .kernels import KernelSpec, phi
from .minkowski import energy
from .operator import _p_points
from .quadrature import QuadratureSpec, gauss_legendre

__all__ = [
    "CounterexampleReport",
    "zetaB_split",
    "zetaB1",
    "zetaB2",
    "reduced_k2_bound",
    "reduced_k2_closed_form",
    "k2_window",
    "ExpBoundReport",
    "exp_bound_suite",
    "JacobianScanReport",
    "parse_grid",
    "jacobian_scan",
    "refine_scan",
    "COUNTEREXAMPLE_C",
]

# the constant c' of the counterexample integrals is left free; values are reported for c' = 1
COUNTEREXAMPLE_C = 1.0

_PANEL_WIDTH = 2.5


# ---------------------------------------------------------------- counterexample


@dataclass
class CounterexampleReport:
    p: np.ndarray
    truncations: list
    zetaB1: list
    zetaB2: list
    growthFactor: float
    zetaB1Gap: float = float("nan")

    @property
    def zetaB1Changes(self):
        """Relative change of the first integral over each step of the truncation list."""
        v = np.asarray(self.zetaB1, dtype=float)
        return [float(x) for x in np.abs(np.diff(v)) / np.abs(v[:-1])]

    def change_between(self, r_a, r_b):
        i, j = self.truncations.index(float(r_a)), self.truncations.index(float(r_b))
        return abs(self.zetaB1[j] - self.zetaB1[i]) / abs(self.zetaB1[i])

    @property
    def zetaB1Change(self):
        return self.zetaB1Changes[-1]

    @property
    def b1_cauchy(self):
        return bool(self.zetaB1Change < 0.01)

    @property
    def b2_increasing(self):
        return bool(np.all(np.diff(self.zetaB2) > 0))

    def to_dict(self):
        return {
            "p": [float(x) for x in self.p],
            "truncations": [float(r) for r in self.truncations],
            "zetaB1": [float(v) for v in self.zetaB1],
            "zetaB2": [float(v) for v in self.zetaB2],
            "growthFactor": float(self.growthFactor),
            "zetaB1Changes": self.zetaB1Changes,
            "zetaB1Gap": float(self.zetaB1Gap),
        }


def _sigma_bounded(glam, kernel):
    # sigma0 = 1 on the whole sphere; only the speed factor Phi remains
    return phi(glam, kernel)


def _r_rule(R, n):
    panels = max(1, int(np.ceil(R / _PANEL_WIDTH)))
    edges = np.linspace(0.0, R, panels + 1)
    rs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(n, a, b)
        rs.append(x)
        ws.append(w)
    return np.concatenate(rs), np.concatenate(ws)


def _q_points(p, quad):
    # spherical coordinates about p resolve the 1/g singularity at q = p
    mode = "iso" if not np.any(p) else ("axi" if not (p[0] or p[1]) else "full")
    u, w = _p_points(mode, quad, quad.truncation_r)
    return p + u, w


def _zeta_b(p, R, kernel, quad, which, r_decay=0.0):
    p = np.asarray(p, dtype=float)
    p0 = float(energy(p))
    q, wq = _q_points(p, quad)
    q0 = energy(q)
    g = relative_g(np.broadcast_to(p, q.shape), q)
    keep = g > 0
    q, wq, q0, g = q[keep], wq[keep], q0[keep], g[keep]
    s = g * g + 4.0
    rs = np.sqrt(s)
    r, wr = _r_rule(R, quad.planar_order)
    r = r[None, :]
    rr = np.sqrt(r * r + s[:, None])
    glam2 = g[:, None] ** 2 + 0.5 * rs[:, None] * (rr - rs[:, None])
    slam = glam2 + 4.0
    inner = r / rr * slam * _sigma_bounded(np.sqrt(glam2), kernel)
    if which == 1:
        cross = np.linalg.norm(np.cross(np.broadcast_to(p, q.shape), q), axis=-1)
        b = (cross / (g * rs))[:, None] * r
        a = ((p0 + q0) / (2.0 * rs))[:, None] * rr
        # exp(-a) I0(b) = exp(b - a) I0e(b)
        inner = inner * np.exp(b - a) * bessel_i0e(b)
        outer = np.exp(0.5 * p0) * np.exp(-0.5 * q0) / (q0 * g)
    else:
        if r_decay:
            inner = inner * np.exp(-r_decay * r)
        outer = np.exp(-q0) / (q0 * g)
    return COUNTEREXAMPLE_C / p0 * float(np.dot(wq * outer, inner @ wr))


def zetaB1(p, R, kernel: KernelSpec = None, quad: QuadratureSpec = None, gate=True):
    """Truncated first counterexample integral, with its exponential and I0 factors.

    Raises QuadratureNotConverged when doubling the rule moves it by more
    than ``quad.tol``.
    """
    kernel = kernel or KernelSpec(angular_model="constant")
    quad = quad or QuadratureSpec()
    v1 = _zeta_b(p, R, kernel, quad, 1)
    if not gate:
        return v1, float("nan")
    v2 = _zeta_b(p, R, kernel, quad.doubled(), 1)
    gap = abs(v2 - v1) / max(abs(v2), 1e-300)
    if gap > quad.tol:
        raise QuadratureNotConverged(f"zetaB1 moved by {gap:.2e} under doubling")
    return v2, gap


def zetaB2(p, R, kernel: KernelSpec = None, quad: QuadratureSpec = None, r_decay=0.0):
    """Truncated second counterexample integral (no r-decay unless ``r_decay`` > 0)."""
    kernel = kernel or KernelSpec(angular_model="constant")
    quad = quad or QuadratureSpec()
    return _zeta_b(p, R, kernel, quad, 2, r_decay)


def zetaB_split(p=(0.0, 0.0, 0.0), kernel: KernelSpec = None, R_list=(5.0, 10.0, 20.0, 40.0), quad: QuadratureSpec = None):
    """Evaluate both counterexample integrals over a list of truncations.

    ``growthFactor`` is the smallest ratio of consecutive second-integral
    values.
    """
    kernel = kernel or KernelSpec(angular_model="constant")
    if kernel.angular_model != "constant":
        raise InvalidInput("the counterexample needs a bounded angular kernel (angular_model='constant')")
    quad = quad or QuadratureSpec()
    R_list = [float(r) for r in R_list]
    if len(R_list) < 2 or any(b <= a for a, b in zip(R_list[:-1], R_list[1:])):
        raise InvalidInput("R_list needs at least two increasing truncations")
    b1, gaps, b2 = [], [], []
    for R in R_list:
        v, gap = zetaB1(p, R, kernel, quad)
        b1.append(v)
        gaps.append(gap)
        b2.append(zetaB2(p, R, kernel, quad))
    growth = float(min(b / a for a, b in zip(b2[:-1], b2[1:])))
    return CounterexampleReport(np.asarray(p, dtype=float), R_list, b1, b2, growth, float(max(gaps)))


# ---------------------------------------------------------------- reduced dyadic bound


def k2_window(s_tilde, k):
    """(Y1, Y2): the range of sqrt(y^2 + s~) on which gbar lies in [2^(-k-1), 2^(-k)]."""
    rs = np.sqrt(s_tilde)
    return rs + 2.0 ** (-2 * k - 1) / rs, rs + 2.0 ** (-2 * k + 1) / rs


def reduced_k2_closed_form(k, gamma):
    """Exact value of g~ sqrt(s~) k2: pi (2^gamma - 1) 2^(k gamma) / (64 gamma)."""
    return np.pi * (2.0**gamma - 1.0) / (64.0 * gamma) * 2.0 ** (k * gamma)


def reduced_k2_bound(pp, q, k, gamma=0.5, order=32):
    """g~ sqrt(s~) k2(p', q) from its one-dimensional y' integral, and 2^(k gamma).

    k2 = pi / (256 g~) int_{Y1}^{Y2} gbar^(-2-gamma) dy' with
    gbar^2 = (sqrt(s~)/2)(y' - sqrt(s~)).

    Raises
    ------
    EmptyWindow
        When [Y1, Y2] collapses in floating point.
    """
    pp = np.asarray(pp, dtype=float)
    q = np.asarray(q, dtype=float)
    gt = float(relative_g(pp, q))
    if not gt > 0:
        raise DegeneratePair("p' = q leaves the frame undefined")
    st = gt * gt + 4.0
    y1, y2 = k2_window(st, k)
    if not y2 > y1:
        raise EmptyWindow(f"window [Y1, Y2] is empty at k = {k}")
    y, w = gauss_legendre(order, y1, y2)
    gb2 = 0.5 * np.sqrt(st) * (y - np.sqrt(st))
    k2 = np.pi / (256.0 * gt) * float(np.sum(w * gb2 ** (-1.0 - 0.5 * gamma)))
    return gt * np.sqrt(st) * k2, 2.0 ** (k * gamma)


# ---------------------------------------------------------------- exponential bounds


@dataclass
class ExpBoundReport:
    points: int
    violations: dict = field(default_factory=dict)
    max_ratio: float = float("nan")
    max_theta_ratio: float = float("nan")
    max_chain: float = float("nan")

    @property
    def ok(self):
        return not any(self.violations.values())


def exp_bound_suite(pp, q, theta_grid, z_grid, equilibrium: EquilibriumSpec = UNIT_MASS, rtol=1e-12):
    """Pointwise checks of the exponential bounds used on the dual plane.

    For every pair (p', q) with l = (p'0 + q0)/4 and j from the dual frame:

    * ``sqrtJ``: sqrt(J(q)) e^l exp(-sqrt(l^2 - j^2)) <= 1;
    * ``l2j2``: sqrt(l^2 - j^2) >= |p' - q| / 4;
    * ``max``: exp(-l sqrt(|z|^2+1) + j|z|) <= C exp(-sqrt(l^2 - j^2)) on the
      |z| grid, C fitted (``max_ratio``);
    * ``theta``: the same with (l, j) scaled by 2 theta - 1, and
      sqrt(J(q)) exp((2 theta - 1)(l - sqrt(l^2 - j^2))) <= c^(theta - 1/2) J(q)^(1 - theta).

    Returns an :class:`ExpBoundReport`; ``max_chain`` is the largest value
    of exp(((p'0 - q0) - |p' - q|)/4), which reaches 1 as p' -> q.
    """
    pp = np.atleast_2d(np.asarray(pp, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    pp, q = np.broadcast_arrays(pp, q)
    fr = dual_frame(pp, q, np.zeros(pp.shape[:-1] + (2,)))
    if np.any(fr.gt <= 0):
        raise DegeneratePair("p' = q leaves j undefined")
    l, j = fr.l, fr.j
    lj = np.sqrt(np.maximum(l * l - j * j, 0.0))
    sj = sqrt_juttner(q, equilibrium)
    dist = np.linalg.norm(pp - q, axis=-1)
    viol = {}
    viol["sqrtJ"] = int(np.sum(sj * np.exp(l - lj) > 1.0 + rtol))
    viol["l2j2"] = int(np.sum(lj < 0.25 * dist * (1.0 - rtol) - rtol))
    z = np.asarray(z_grid, dtype=float)
    zz = np.abs(z)[None, :]
    expo = -l[:, None] * np.sqrt(zz * zz + 1.0) + np.abs(j)[:, None] * zz + lj[:, None]
    ratio = float(np.exp(expo.max()))
    viol["max"] = int(np.sum(expo > rtol))
    c = equilibrium.constant
    q0 = energy(q)
    th_ratio = 0.0
    th_viol = 0
    for th in np.asarray(theta_grid, dtype=float):
        if not 0.5 < th <= 1.0:
            raise InvalidInput("theta values must lie in (1/2, 1]")
        t = 2.0 * th - 1.0
        e2 = t * expo
        th_ratio = max(th_ratio, float(np.exp(e2.max())))
        th_viol += int(np.sum(e2 > rtol))
        lhs = np.log(sj) + t * (l - lj)
        rhs = (th - 0.5) * np.log(c) + (1.0 - th) * (np.log(c) - q0)
        th_viol += int(np.sum(lhs > rhs + rtol * (1.0 + np.abs(rhs))))
    viol["theta"] = th_viol
    chain = float(np.exp(np.max(0.25 * ((energy(pp) - q0) - dist))))
    npts = int(pp.shape[0] * (z.size * (1 + len(theta_grid)) + 2))
    return ExpBoundReport(npts, viol, ratio, th_ratio, chain)


# ---------------------------------------------------------------- Jacobian scan


@dataclass
class JacobianScanReport:
    rows: np.ndarray  # columns p1, p2, p3, det
    threshold: float
    precision: object = None

    @property
    def min_abs_det(self):
        return float(np.min(np.abs(self.rows[:, 3])))

    @property
    def argmin(self):
        return self.rows[int(np.argmin(np.abs(self.rows[:, 3]))), :3]

    @property
    def count_below(self):
        return int(np.sum(np.abs(self.rows[:, 3]) < self.threshold))

    @property
    def locations(self):
        return self.rows[np.abs(self.rows[:, 3]) < self.threshold, :3]

    def to_csv(self, path):
        np.savetxt(path, self.rows, delimiter=",", header="p1,p2,p3,det", comments="", fmt="%.17g")


def parse_grid(spec):
    """'a:b:h' -> inclusive axis values a, a+h, ..., b."""
    try:
        a, b, h = (float(x) for x in str(spec).split(":"))
    except ValueError as exc:
        raise InvalidInput(f"grid spec {spec!r} must look like start:stop:step") from exc
    if not h > 0 or b < a:
        raise InvalidInput("grid spec needs step > 0 and stop >= start")
    n = int(np.floor((b - a) / h + 1e-9)) + 1
    return a + h * np.arange(n)


def jacobian_scan(q, omega, grid, precision=None, threshold=1e-6, h=1e-5) -> JacobianScanReport:
    """Determinant of p -> p' at fixed (q, omega) over a product grid of p.

    ``grid`` is a grid string (applied to all three axes), one axis array,
    or a triple of axis arrays.
    """
    if isinstance(grid, str):
        axes = [parse_grid(grid)] * 3
    elif len(grid) == 3 and np.ndim(grid[0]) == 1:
        axes = [np.asarray(a, dtype=float) for a in grid]
    else:
        axes = [np.asarray(grid, dtype=float)] * 3
    q = np.asarray(q, dtype=float)
    om = np.asarray(omega, dtype=float)
    om = om / np.linalg.norm(om)
    rows = []
    for p in itertools.product(*axes):
        rows.append((*p, collision_map_jacobian(np.array(p), q, om, h=h, precision=precision)))
    return JacobianScanReport(np.array(rows, dtype=float), threshold, precision)


def refine_scan(report: JacobianScanReport, q, omega, span=None, n=11, precision=None) -> JacobianScanReport:
    """Re-scan a box around the coarse minimum with ``n`` points per axis."""
    c = report.argmin
    if span is None:
        steps = [np.diff(np.unique(report.rows[:, i])) for i in range(3)]
        span = min(float(s.min()) for s in steps if s.size) if any(s.size for s in steps) else 1.0
    axes = [np.linspace(x - span, x + span, n) for x in c]
    return jacobian_scan(q, omega, axes, precision=precision, threshold=report.threshold)
