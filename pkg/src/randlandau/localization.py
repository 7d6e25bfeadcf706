"""Projection-kernel decay, eigenfunction weights and the mobility-edge proxy.

Distances are torus minimal-image distances between unit cells, and the
position weight is centred at the torus centre, since a torus has no
preferred origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import fermi_projection

# Gram matrices per cell are used while they fit in this many complex entries.
_GRAM_LIMIT = 5e7


@dataclass(frozen=True)
class DecayGate:
    """Exponential-decay verdict thresholds: residual < rate * max_residual_ratio, rate * L >= min_rate_L."""

    max_residual_ratio: float = 1 / 3
    min_rate_L: float = 8.0

    def describe(self):
        return {"max_residual_ratio": self.max_residual_ratio, "min_rate_L": self.min_rate_L}


@dataclass(frozen=True)
class DecayProfile:
    distances: np.ndarray
    values: np.ndarray
    amplitude: float = math.nan
    rate: float = math.nan
    residual: float = math.nan
    fit_points: int = 0
    side_length: float = math.nan
    form: str = "exponential"

    @property
    def empty(self):
        return len(self.distances) == 0

    def passes(self, gate=DecayGate()):
        if self.empty or not np.isfinite(self.rate) or self.rate <= 0:
            return False
        return bool(self.residual < gate.max_residual_ratio * self.rate
                    and self.rate * self.side_length >= gate.min_rate_L)

    def rows(self):
        """(d, value, fitted value) rows for CSV output."""
        fit = self.amplitude * np.exp(-self.rate * self.distances)
        return [(float(d), float(v), float(f)) for d, v, f in zip(self.distances, self.values, fit)]


def _cell_rows(torus):
    """Site indices of each unit cell, ordered by flattened cell index k1 * K + k2."""
    K = torus.cells_per_side
    if K is None:
        raise ValueError("decay profiles need an integer side length")
    k1, k2 = torus.cell_index()
    label = k1 * K + k2
    order = np.argsort(label, kind="stable")
    counts = np.bincount(label, minlength=K * K)
    return np.split(order, np.cumsum(counts)[:-1]), K


def cell_distances(K):
    """Minimal-image Euclidean distance between all pairs of cells of a K x K torus."""
    k = np.arange(K)
    c1, c2 = np.meshgrid(k, k, indexing="ij")
    c1, c2 = c1.ravel(), c2.ravel()
    d1 = np.abs(c1[:, None] - c1[None, :])
    d2 = np.abs(c2[:, None] - c2[None, :])
    d1 = np.minimum(d1, K - d1)
    d2 = np.minimum(d2, K - d2)
    return np.hypot(d1, d2)


def block_norms_squared(P, torus):
    """Matrix of ||chi_x P chi_y||_2^2 over all unit-cell pairs (x, y)."""
    cells, K = _cell_rows(torus)
    V = P.basis
    r = P.rank
    if r == 0:
        return np.zeros((K * K, K * K))
    if K * K * r * r <= _GRAM_LIMIT:
        # ||V_x V_y^*||_F^2 = tr(G_x G_y) with G_x = V_x^* V_x Hermitian
        G = np.stack([V[c].conj().T @ V[c] for c in cells]).reshape(K * K, r * r)
        F = (G @ G.conj().T).real
    else:
        F = np.empty((K * K, K * K))
        label = np.empty(torus.dimension, dtype=int)
        for idx, c in enumerate(cells):
            label[c] = idx
        for idx, c in enumerate(cells):
            rows = np.abs(V[c] @ V.conj().T) ** 2
            F[idx] = np.bincount(label, weights=rows.sum(axis=0), minlength=K * K)
    return np.maximum(F, 0.0)


def fit_exponential(d, v, lo, hi):
    """Least-squares fit log v = log A - rate d over lo <= d <= hi.

    Returns (A, rate, standard error of rate, points used).
    """
    m = (d >= lo - 1e-12) & (d <= hi + 1e-12) & (v > 0)
    n = int(m.sum())
    if n < 2:
        return math.nan, math.nan, math.inf, n
    X = np.column_stack([np.ones(n), -d[m]])
    y = np.log(v[m])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    if n > 2:
        res = y - X @ coef
        s2 = res @ res / (n - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        se = float(math.sqrt(max(cov[1, 1], 0.0)))
    else:
        se = 0.0
    return float(math.exp(coef[0])), float(coef[1]), se, n


def decay_profile(P, torus):
    """Unit-cell block norms of P binned by cell distance, with an exponential fit."""
    K = torus.cells_per_side
    if K is None or K < 4:
        raise ValueError("decay profiles need at least 4 unit cells per side")
    if P.rank == 0:
        return DecayProfile(np.empty(0), np.empty(0), side_length=torus.side_length)
    F = block_norms_squared(P, torus)
    D = np.round(cell_distances(K), 12)
    dist = np.unique(D)
    vals = np.array([math.sqrt(F[D == d].max()) for d in dist])
    L = torus.side_length
    A, rate, se, n = fit_exponential(dist, vals, 2.0, L / 2 - 1)
    return DecayProfile(dist, vals, A, rate, se, n, L)


# SUDEC --------------------------------------------------------------------


def centered_weight(torus, power=-2.0):
    """<x>_c^power with <x>_c = sqrt(1 + d_torus(x, centre)^2)."""
    d = torus.distance_from(torus.center)
    return (1.0 + d**2) ** (power / 2)


@dataclass(frozen=True)
class SudecWeights:
    energies: np.ndarray
    alpha: np.ndarray
    mu: float
    trace_check: float
    cell_norms: np.ndarray = field(repr=False)

    @property
    def identity_defect(self):
        return abs(self.alpha.sum() - self.trace_check)

    def correlation(self, n):
        """Table ||chi_x phi_n|| ||chi_y phi_n|| over unit-cell pairs."""
        c = self.cell_norms[:, n]
        return np.outer(c, c)


def sudec_weights(spec, interval, torus):
    """alpha_n = ||<x>_c^-2 phi_n||^2 for eigenvalues in (lo, hi]."""
    lo, hi = interval
    spec.require_below_ceiling(hi)
    m = (spec.eigenvalues > lo) & (spec.eigenvalues <= hi)
    Phi = spec.eigenvectors[:, m]
    w = centered_weight(torus, -2.0)
    alpha = (w[:, None] ** 2 * np.abs(Phi) ** 2).sum(axis=0)
    # trace of <x>^-2 P_I <x>^-2 from the explicit matrix as an independent check
    if Phi.shape[1]:
        WP = w[:, None] * Phi
        trace = float(np.real(np.trace(WP @ WP.conj().T)))
    else:
        trace = 0.0
    if torus.cells_per_side is not None:
        cells, _ = _cell_rows(torus)
        norms = np.stack([np.linalg.norm(Phi[c], axis=0) for c in cells])
    else:
        norms = np.empty((0, Phi.shape[1]))
    return SudecWeights(spec.eigenvalues[m], alpha, float(alpha.sum()), trace, norms)


def participation_ratio(spec_or_vector, n=None):
    """(sum |phi|^2)^2 / sum |phi|^4 of eigenvector n (or of a given vector)."""
    if n is None:
        phi = np.asarray(spec_or_vector)
    else:
        phi = spec_or_vector.eigenvectors[:, n]
    p = np.abs(phi) ** 2
    return float(p.sum() ** 2 / (p**2).sum())


# mobility-edge proxy ------------------------------------------------------


@dataclass(frozen=True)
class MobilityProxy:
    """Edge intervals of a band whose Fermi projections pass the decay gate."""

    band: int
    lower: tuple | None
    upper: tuple | None
    status: str
    scan: list = field(default_factory=list, repr=False)

    def distance_to(self, level):
        """max_j |E_j - B_n^lat| over the inner ends of the two edge intervals."""
        ends = []
        if self.lower is not None:
            ends.append(self.lower[1])
        if self.upper is not None:
            ends.append(self.upper[0])
        if not ends:
            return math.nan
        return float(max(abs(e - level) for e in ends))

    @property
    def width(self):
        """Length of the ungated middle (E2 - E1); zero when the whole band is gated."""
        if self.lower is None or self.upper is None:
            return math.nan
        return float(max(self.upper[0] - self.lower[1], 0.0))

    def to_dict(self):
        return {"band": self.band, "lower": self.lower, "upper": self.upper, "status": self.status}


def gate_scan(spec, torus, energies, gate=DecayGate()):
    """(E_F, rank, rate, residual, pass) for each Fermi energy."""
    rows = []
    for E in energies:
        prof = decay_profile(fermi_projection(spec, E), torus)
        rows.append({"E": float(E), "rank": int((spec.eigenvalues <= E).sum()),
                     "rate": prof.rate, "residual": prof.residual, "pass": prof.passes(gate)})
    return rows


def mobility_proxy(spec, torus, band, clean, gate=DecayGate(), points=9):
    """Scan Fermi energies through band ``band`` (1-based) and return the edge intervals.

    The band is the eigenvalue range of this realization inside the clean
    level's gap neighbourhood.  Passing energies contiguous with each band
    edge form the two edge intervals; a band with no spread is reported
    as ``degenerate``.
    """
    lo_gap = clean.gap_midpoint(band - 1) if band > 1 else -math.inf
    hi_gap = clean.gap_midpoint(band)
    E = spec.eigenvalues[(spec.eigenvalues > lo_gap) & (spec.eigenvalues <= hi_gap)]
    if len(E) == 0 or E.max() - E.min() < 1e-9 * max(1.0, abs(E.max())):
        return MobilityProxy(band, None, None, "degenerate")
    # Fermi energies halfway between consecutive eigenvalues, from rank 1 to rank n - 1
    if len(E) < 2:
        return MobilityProxy(band, None, None, "degenerate")
    ranks = np.unique(np.round(np.linspace(1, len(E) - 1, points)).astype(int))
    grid = (E[ranks - 1] + E[ranks]) / 2
    rows = gate_scan(spec, torus, grid, gate)
    ok = [r["pass"] for r in rows]
    lower = upper = None
    i = 0
    while i < len(ok) and ok[i]:
        i += 1
    if i:
        lower = (float(E.min()), rows[i - 1]["E"])
    j = len(ok)
    while j > 0 and ok[j - 1]:
        j -= 1
    if j < len(ok):
        upper = (rows[j]["E"], float(E.max()))
    status = "all_gated" if all(ok) else ("none_gated" if not any(ok) else "edges")
    return MobilityProxy(band, lower, upper, status, rows)
