#!/usr/bin/env python
# coding: utf-8

# # Band edges localize, band centres spread
#
# For one realization on the Hall preset we compare
#   * the decay of the Fermi-projection kernel between unit cells, and
#   * the growth of the time-averaged second moment of a state started
#     in the central cell and filtered by a smooth energy bump,
# at the lower edge and at the centre of the first disordered band.

import numpy as np

from randlandau.disorder import CouplingLaw, SingleSiteProfile, sample
from randlandau.dynamics import EnergyBump, geometric_times, make_series, moment_series
from randlandau.lattice import MagneticTorus, build_hamiltonian
from randlandau.localization import decay_profile, participation_ratio
from randlandau.spectral import diagonalize, fermi_projection

torus = MagneticTorus.hall_desk()
B, n = torus.field, torus.flux_quanta
dis = sample(seed=0, law=CouplingLaw.uniform(1, 1), profile=SingleSiteProfile(), torus=torus, realization=3)
spec = diagonalize(build_hamiltonian(torus, dis, 0.3 * B), ceiling=2.5 * B, k_hint=n + 16)
E = spec.eigenvalues[spec.eigenvalues < 2 * B]
width = E.max() - E.min()
print(f"band 1: [{E.min() / B:.4f}, {E.max() / B:.4f}] B, {len(E)} states")

# Kernel decay: fit log ||chi_x P chi_y|| against the cell distance.

for label, rank in (("edge", 1), ("centre", n // 2)):
    prof = decay_profile(fermi_projection(spec, (E[rank - 1] + E[rank]) / 2), torus)
    print(f"{label:6s} rank {rank:2d}: rate {prof.rate:.3f} +- {prof.residual:.3f}, "
          f"rate*L = {prof.rate * torus.side_length:.1f}, gate {'pass' if prof.passes() else 'fail'}")

# Participation ratios of individual eigenstates (N^2 = 4096 means fully spread).

pr = np.array([participation_ratio(spec, j) for j in range(n)])
print(f"PR lowest state {pr[0]:.0f}, band-centre median {np.median(pr[n // 2 - 4:n // 2 + 4]):.0f}")

# Moments: averaging times T = 1, 2, ..., 1024.

times = geometric_times(1.0, 10)
for label, X in (("edge", EnergyBump(E.min() + width / 8, width / 4)),
                 ("centre", EnergyBump((E.min() + E.max()) / 2, width / 4))):
    s = make_series(times, moment_series(spec, X, 2, times, torus), 2)
    print(f"{label:6s}: beta_hat(p=2) = {s.fit.beta_hat:.3f} +- {s.fit.residual:.3f}, "
          f"ballistic C = {s.ballistic_C:.2f}")
    print("        M(T):", " ".join(f"{v:.3g}" for v in s.values))

# The moments saturate near (L/2)^2 on the torus, so these exponents are
# pre-saturation slopes and only their ordering is meaningful.
