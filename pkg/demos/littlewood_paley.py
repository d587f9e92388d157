"""Energy of the Littlewood-Paley pieces of radial oscillations: the peak moves one scale per doubling."""

import numpy as np

from relkin.norms import RadialLattice, lp_decompose, lp_inequality_ratio
from relkin.functions import gaussian

for w in (4.0, 8.0, 16.0, 32.0):
    def f(p, w=w):
        r = np.linalg.norm(p, axis=-1)
        return np.cos(w * r) * np.exp(-r * r / 4)

    dec = lp_decompose(f, 5, grid=RadialLattice(2.0**-7, 14.0))
    energy = (dec.pieces**2 * dec.grid.weights).sum(axis=1)
    share = energy / energy.sum()
    print(f"omega = {w:4g}: " + " ".join(f"{s:6.3f}" for s in share) + f"   argmax j = {int(np.argmax(energy))}")

r = lp_inequality_ratio(gaussian(1.0), rho=0.0, gamma=0.5, J_max=5)
print(f"Gaussian: LP ratio {r['lp']:.5f}, derivative ratio {r['lp_d1']:.5f}")
