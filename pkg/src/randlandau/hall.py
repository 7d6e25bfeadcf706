"""Switch-function Hall conductance and the Bott-index cross-check.

On a finite torus tr P[[P, L1], [P, L2]] is the trace of a commutator and
vanishes.  The plane value is recovered by summing the diagonal density
theta(x) = <x| P[[P, L1], [P, L2]] |x> over a disc around one crossing of
the two switch jump lines; the torus has four such crossings whose
contributions cancel in pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import fermi_projection

_CHUNK = 512


@dataclass(frozen=True)
class SwitchPair:
    """Sharp switches L1 = 1{x1 >= r}, L2 = 1{x2 >= s} on the fundamental domain."""

    r: float
    s: float

    @classmethod
    def centered(cls, torus):
        return cls(torus.side_length / 2, torus.side_length / 2)

    def values(self, torus):
        x1, x2 = torus.site_coordinates()
        return (x1 >= self.r).astype(float), (x2 >= self.s).astype(float)

    def shifted(self, dr, ds):
        return SwitchPair(self.r + dr, self.s + ds)


@dataclass(frozen=True)
class HallResult:
    theta: complex
    window_radius: float
    truncation_estimate: float
    n_sites: int

    @property
    def sigma_complex(self):
        return -2j * math.pi * self.theta

    @property
    def sigma(self):
        """Physical Hall conductance Re(-2 pi i theta)."""
        return float(self.sigma_complex.real)

    @property
    def sigma_truncation(self):
        return 2 * math.pi * self.truncation_estimate


def default_window(torus):
    return torus.side_length / 4 - torus.lattice_spacing


def check_window(torus, switches, W):
    L = torus.side_length
    if W > L / 4 + 1e-12:
        raise ValueError(f"window radius {W:g} exceeds L/4 = {L / 4:g}")
    for c in (switches.r, switches.s):
        if not 0 < c < L:
            raise ValueError("switch positions must lie in (0, L)")
        if min(c, L - c) < 2 * W - 1e-12:
            raise ValueError("switch line images closer than 2W to the window centre")


def theta_density(P, switches, torus, sites=None):
    """theta(x) = <x|P[[P,L1],[P,L2]]|x> at the requested sites (default: all).

    Uses P A1 A2 = -P L1 Q L2 P and P A2 A1 = -P L2 Q L1 P with
    A_j = [P, L_j], Q = 1 - P.
    """
    n = torus.dimension
    if sites is None:
        sites = np.arange(n)
    sites = np.asarray(sites)
    V = P.basis
    out = np.zeros(len(sites), dtype=complex)
    if P.rank == 0:
        return out
    l1, l2 = switches.values(torus)
    for start in range(0, len(sites), _CHUNK):
        S = sites[start:start + _CHUNK]
        Y = V @ V[S, :].conj().T          # columns P e_x
        Z1 = l1[:, None] * Y
        Z2 = l2[:, None] * Y
        W1 = V.conj().T @ Z1
        W2 = V.conj().T @ Z2
        # <x|P L1 Q L2 P|x> and <x|P L2 Q L1 P|x>
        a12 = np.einsum("ij,ij->j", Z1.conj(), Z2) - np.einsum("ij,ij->j", W1.conj(), W2)
        a21 = np.einsum("ij,ij->j", Z2.conj(), Z1) - np.einsum("ij,ij->j", W2.conj(), W1)
        out[start:start + len(S)] = -a12 + a21
    return out


def theta_windowed(P, torus, switches=None, window_radius=None):
    """Windowed Hall trace around the crossing (r, s)."""
    if switches is None:
        switches = SwitchPair.centered(torus)
    W = default_window(torus) if window_radius is None else float(window_radius)
    check_window(torus, switches, W)
    d = torus.distance_from((switches.r, switches.s))
    sites = np.flatnonzero(d <= W)
    dens = theta_density(P, switches, torus, sites)
    ring = d[sites] > W - torus.lattice_spacing
    trunc = float(np.abs(dens[ring]).max() * ring.sum()) if ring.any() else 0.0
    return HallResult(complex(dens.sum()), W, trunc, len(sites))


def theta_shift_invariance(P, torus, switches, shifted, window_radius=None):
    """|theta(r, s) - theta(r', s')| with the combined truncation budget."""
    a = theta_windowed(P, torus, switches, window_radius)
    b = theta_windowed(P, torus, shifted, window_radius)
    return abs(a.theta - b.theta), a.truncation_estimate + b.truncation_estimate


def theta_additivity(P, Q, torus, switches=None, window_radius=None):
    """|theta(P + Q) - theta(P) - theta(Q)| and the combined truncation budget."""
    if P.overlap_norm(Q) > 1e-9:
        raise ValueError("P and Q are not orthogonal commuting projections")
    s = theta_windowed(P + Q, torus, switches, window_radius)
    a = theta_windowed(P, torus, switches, window_radius)
    b = theta_windowed(Q, torus, switches, window_radius)
    budget = s.truncation_estimate + a.truncation_estimate + b.truncation_estimate
    return abs(s.theta - a.theta - b.theta), budget


@dataclass(frozen=True)
class BottResult:
    value: float
    index: int
    residue: float
    min_singular: float
    branch_margin: float
    flagged: bool


def bott_index(P, torus, singular_tol=0.05, branch_tol=0.1):
    """Bott index of the projected torus phases exp(2 pi i x_j / L).

    Computed inside range(P): u = P e^{2 pi i X1/L} P, v = P e^{2 pi i X2/L} P,
    Bott = Im tr log(v u v* u*) / 2 pi.  Near-singular u, v (gap closing) and
    eigenvalues of v u v* u* near the branch cut at -1 are flagged.
    """
    if P.rank == 0:
        return BottResult(0.0, 0, 0.0, 1.0, math.pi, False)
    L = torus.side_length
    x1, x2 = torus.site_coordinates()
    V = P.basis
    u = V.conj().T @ (np.exp(2j * math.pi * x1 / L)[:, None] * V)
    v = V.conj().T @ (np.exp(2j * math.pi * x2 / L)[:, None] * V)
    smin = min(np.linalg.svd(u, compute_uv=False).min(), np.linalg.svd(v, compute_uv=False).min())
    M = v @ u @ v.conj().T @ u.conj().T
    ang = np.angle(np.linalg.eigvals(M))
    value = float(ang.sum() / (2 * math.pi))
    index = int(round(value))
    margin = float(math.pi - np.abs(ang).max())
    flagged = bool(smin < singular_tol or margin < branch_tol)
    return BottResult(value, index, abs(value - index), float(smin), margin, flagged)


def hall_trace(spec, torus, E_grid, switches=None, window_radius=None, with_bott=True):
    """Rows (E, sigma, truncation, theta, bott, bott_residue) across Fermi energies."""
    rows = []
    for E in E_grid:
        P = fermi_projection(spec, E)
        h = theta_windowed(P, torus, switches, window_radius)
        row = {"E": float(E), "sigma": h.sigma, "truncation": h.sigma_truncation,
               "theta_re": h.theta.real, "theta_im": h.theta.imag, "rank": P.rank}
        if with_bott:
            b = bott_index(P, torus)
            row.update(bott=b.value, bott_index=b.index, bott_residue=b.residue, bott_flag=b.flagged)
        rows.append(row)
    return rows
