#!/usr/bin/env python
# coding: utf-8

# # Landau levels on a magnetic torus
#
# A uniform field B on an L x L torus needs an integer number of flux
# quanta, n_phi = B L^2 / 2pi.  The magnetic Laplacian is discretized with
# Peierls phases on an N x N grid; its lowest eigenvalues cluster near
# (2n - 1) B, each cluster holding exactly n_phi states.

import math

import numpy as np

from randlandau.lattice import MagneticTorus, build_free_hamiltonian, quantize_flux
from randlandau.spectral import diagonalize

# Pick a field and a target side; the side is rounded up to the next whole flux quantum.

B = math.pi / 2
L, n_phi = quantize_flux(B, 7.5)
print(f"requested L = 7.5  ->  L = {L:g}, n_phi = {n_phi}")

# The desk preset: L = 8, N = 64, 16 flux quanta, dimension 4096.

torus = MagneticTorus.desk()
torus.check_resolution()
H = build_free_hamiltonian(torus)
spec = diagonalize(H, ceiling=6 * B, k_hint=64)

E = spec.eigenvalues
for n in range(3):
    cluster = E[16 * n:16 * (n + 1)]
    print(f"level {n + 1}: mean {cluster.mean() / B:.4f} B   "
          f"(continuum {2 * n + 1} B)   spread {np.ptp(cluster):.1e}")

# The clusters are exactly degenerate because magnetic translations by one
# unit cell commute with H; the shift from (2n - 1) B is the O(a^2 B)
# discretization error, which grows with n.
