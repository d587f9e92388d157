"""Truncated split weights at p = 0: the first settles as R grows, the second keeps growing."""

from relkin.diagnostics import zetaB_split
from relkin.kernels import KernelSpec
from relkin.quadrature import QuadratureSpec

rep = zetaB_split((0.0, 0.0, 0.0), KernelSpec(angular_model="constant"), (5, 10, 20, 40, 80), QuadratureSpec(32, 12, 24))
for R, b1, b2 in zip(rep.truncations, rep.zetaB1, rep.zetaB2):
    print(f"R = {R:5g}: B1 = {b1:10.4f}   B2 = {b2:12.4f}")
print("relative B1 changes:", [f"{c:.2e}" for c in rep.zetaB1Changes])
print(f"B2 growth factor per doubling >= {rep.growthFactor:.3f}")
