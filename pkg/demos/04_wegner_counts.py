#!/usr/bin/env python
# coding: utf-8

# # Eigenvalue counts in small windows
#
# The expected number of eigenvalues in a window J grows like the area
# L^2.  Counting over independent realizations on two torus sizes at the
# same field shows the L^2 scaling directly.

import math

from randlandau.disorder import CouplingLaw, SingleSiteProfile
from randlandau.lattice import MagneticTorus
from randlandau.spectral import wegner_statistic

B = math.pi / 2
law, profile = CouplingLaw.uniform(1, 1), SingleSiteProfile()
tori = [MagneticTorus(4.0, B, 32), MagneticTorus(8.0, B, 64)]
R = 20

print(" |J|/B     L   mean count   count/(|J| L^2)")
for frac in (0.02, 0.05):
    J = (B * (1 - frac / 2), B * (1 + frac / 2))
    for t in tori:
        w = wegner_statistic(t, 0.3 * B, law, profile, J, R, seed=0, ceiling=1.5 * B)
        print(f"{frac:5.2f}  {t.side_length:4.0f}   {w.mean_count:5.2f} +- {w.stderr:4.2f}"
              f"   {w.normalized:.3f} +- {w.normalized_stderr:.3f}")

# A window inside the first gap holds no eigenvalues at all.
gap = wegner_statistic(tori[0], 0.3 * B, law, profile, (1.8 * B, 2.2 * B), 5, seed=0, ceiling=2.5 * B)
print("gap window count:", gap.mean_count)
