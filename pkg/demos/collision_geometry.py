"""Post-collisional momenta, invariants and the center-of-momentum frame for one pair."""

import numpy as np

from relkin.geometry import invariants, post_collision, prepost_jacobian_analytic, scattering_cos
from relkin.minkowski import com_transform, lift

p = np.array([2.0, -1.0, 0.5])
q = np.array([-0.5, 3.0, 1.0])
omega = np.array([0.0, 0.6, 0.8])

inv = invariants(p, q)
pp, qq = post_collision(p, q, omega)
print(f"g = {inv.g:.6f}, s = {inv.s:.6f}, Moller velocity = {inv.vM:.6f}")
print("p' =", pp.p, " q' =", qq.p)
print("momentum change:", pp.p + qq.p - p - q)
print(f"cos(theta) = {scattering_cos(p, q, pp.p, qq.p):.6f}")
print(f"p'0 q'0 / (p0 q0) = {prepost_jacobian_analytic(p, q, omega):.6f}")

lam = com_transform(p, q)
print("Lambda (p + q) =", lam.entries @ (lift(p) + lift(q)))
print("Lambda (q - p) =", lam.entries @ (lift(q) - lift(p)))
print(f"isometry residual = {lam.isometry_residual():.2e}")
