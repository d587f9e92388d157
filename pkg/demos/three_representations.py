"""The trilinear form and its norm term in three representations (cutoff kernel, coarse rule)."""

import time

from relkin import operator as op
from relkin.functions import gaussian
from relkin.kernels import KernelSpec
from relkin.quadrature import QuadratureSpec

kernel = KernelSpec("hard", rho=0.0, gamma=0.5, epsilon=0.2)
quad = QuadratureSpec(radial_order=24, sphere_order=12, planar_order=32, truncation_r=30.0)
f = gaussian(1.0)
h = gaussian(0.7, poly={(0, 0, 0, 1): 1.0})  # p0 exp(-0.7 |p|^2)
eta = gaussian(1.3)

for l in (0.0, 1.0):
    t = time.perf_counter()
    w = op.trilinear_omega(f, h, eta, l, kernel, quad)
    d = op.trilinear_dual(f, h, eta, l, kernel, quad)
    nw = op.norm_term_omega(f, eta, l, kernel, quad)
    nc = op.trilinear_carleman(f, eta, l, kernel, quad)
    print(f"l = {l:g}: omega {w:.8f}  dual {d:.8f}  (rel {abs(w - d) / abs(w):.1e})")
    print(f"        norm term omega {nw:.8f}  Carleman {nc:.8f}  (rel {abs(nw - nc) / abs(nw):.1e})"
          f"  [{time.perf_counter() - t:.1f} s]")
