"""Eigendecomposition, spectral projections, band analysis and Wegner counts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .disorder import sample
from .lattice import Hamiltonian, build_free_hamiltonian, build_hamiltonian

DIMENSION_CAP = 4096
DENSE_LIMIT = 1024


class NumericalError(RuntimeError):
    """A spectral computation could not deliver the requested accuracy."""


def _phase_fix(vecs, tol=1e-8):
    """Rotate each column so its first component above ``tol`` is real positive."""
    idx = np.argmax(np.abs(vecs) > tol, axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)[None, :]


def _as_matrix(H):
    if isinstance(H, Hamiltonian):
        return H.matrix
    return H


def _check_hermitian(M, tol=1e-12):
    if sp.issparse(M):
        D = M - M.conj().T
        defect = abs(D).max() if D.nnz else 0.0
        scale = abs(M).max()
    else:
        defect = np.abs(M - M.conj().T).max()
        scale = np.abs(M).max()
    if defect > tol * max(scale, 1e-300):
        raise ValueError(f"operator is not Hermitian (defect {defect:.2e})")


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns.

    When ``ceiling`` is finite only the eigenpairs with E <= ceiling are
    stored; every one of them is present.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dimension: int
    ceiling: float = math.inf
    provenance: dict = field(default_factory=dict)
    torus: object = field(default=None, repr=False)

    @property
    def complete(self):
        return len(self.eigenvalues) == self.dimension

    def count(self, lo, hi):
        """Number of eigenvalues in (lo, hi]."""
        E = self.eigenvalues
        return int(np.count_nonzero((E > lo) & (E <= hi)))

    def require_below_ceiling(self, E):
        if E >= self.ceiling and not self.complete:
            raise ValueError(f"energy {E:g} lies at or above the scan ceiling {self.ceiling:g}")


def _lower_bound(M):
    """Gershgorin lower bound of the spectrum of a sparse Hermitian matrix."""
    A = sp.csr_matrix(M)
    d = A.diagonal().real
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - off))


def _sparse_lowest(M, ceiling, vectors, k0):
    n = M.shape[0]
    sigma = _lower_bound(M) - 1.0
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    k = max(8, min(k0, n - 2))
    while True:
        if vectors:
            w, V = eigsh(M, k=k, sigma=sigma, which="LM", v0=v0, tol=0)
        else:
            w = eigsh(M, k=k, sigma=sigma, which="LM", v0=v0, tol=0, return_eigenvectors=False)
            V = None
        if vectors:
            # ARPACK vectors are not orthogonal inside degenerate clusters
            Q, _ = np.linalg.qr(V)
            w, Y = np.linalg.eigh(Q.conj().T @ (M @ Q))
            V = Q @ Y
        order = np.argsort(w)
        w = w[order]
        if w[-1] > ceiling:
            keep = w <= ceiling
            return w[keep], (V[:, order][:, keep] if vectors else None)
        if k >= n - 2:
            return None
        k = min(n - 2, 2 * k)


def diagonalize(H, ceiling=None, method="auto", cap=DIMENSION_CAP, vectors=True, k_hint=64):
    """Eigenpairs of a Hermitian operator.

    Parameters
    ----------
    H : Hamiltonian, sparse matrix or ndarray
    ceiling : float, optional
        Keep only eigenpairs with E <= ceiling.  For large sparse operators
        this selects shift-invert Lanczos from below the spectrum, which
        returns every eigenpair under the ceiling.
    method : {"auto", "dense", "sparse"}
        ``auto`` uses dense LAPACK unless a ceiling is given and the
        dimension exceeds ``DENSE_LIMIT``.
    vectors : bool
        False returns eigenvalues only (eigenvectors array is empty).
    """
    M = _as_matrix(H)
    n = M.shape[0]
    if n > cap:
        raise ValueError(f"dimension {n} exceeds the cap {cap}")
    _check_hermitian(M)
    if method == "auto":
        method = "sparse" if ceiling is not None and n > DENSE_LIMIT else "dense"
    w = V = None
    if method == "sparse":
        if ceiling is None:
            raise ValueError("sparse diagonalization needs a ceiling")
        res = _sparse_lowest(sp.csr_matrix(M), ceiling, vectors, k_hint)
        if res is not None:
            w, V = res
    if w is None:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        if vectors:
            w, V = np.linalg.eigh(A)
        else:
            w = np.linalg.eigvalsh(A)
        if ceiling is not None:
            keep = w <= ceiling
            w = w[keep]
            V = V[:, keep] if vectors else None
    if vectors:
        V = _phase_fix(V)
    else:
        V = np.empty((n, 0), dtype=complex)
    prov = dict(H.descriptor) if isinstance(H, Hamiltonian) else {}
    prov["method"] = method
    torus = H.torus if isinstance(H, Hamiltonian) else None
    return SpectralDecomposition(np.asarray(w, dtype=float), V, n,
                                 math.inf if ceiling is None else float(ceiling), prov, torus)


def residuals(H, spec):
    """Per-pair residual ||H v - E v|| and the orthonormality defect."""
    M = _as_matrix(H)
    V = spec.eigenvectors
    R = np.linalg.norm(M @ V - V * spec.eigenvalues[None, :], axis=0)
    G = V.conj().T @ V
    return R, float(np.abs(G - np.eye(G.shape[0])).max())


# projections ---------------------------------------------------------------


@dataclass(frozen=True)
class FermiProjection:
    """Spectral projection onto the span of ``basis`` (orthonormal columns)."""

    basis: np.ndarray
    window: tuple
    energies: np.ndarray = field(default_factory=lambda: np.empty(0))
    provenance: dict = field(default_factory=dict)

    @property
    def rank(self):
        return self.basis.shape[1]

    @property
    def dimension(self):
        return self.basis.shape[0]

    @property
    def matrix(self):
        return self.basis @ self.basis.conj().T

    def apply(self, v):
        return self.basis @ (self.basis.conj().T @ v)

    def idempotency_defect(self):
        P = self.matrix
        return float(max(np.abs(P @ P - P).max(), np.abs(P - P.conj().T).max()))

    def overlap_norm(self, other):
        """||P Q|| (spectral norm) for two projections."""
        if self.rank == 0 or other.rank == 0:
            return 0.0
        return float(np.linalg.norm(self.basis.conj().T @ other.basis, 2))

    def __add__(self, other):
        if self.overlap_norm(other) > 1e-9:
            raise ValueError("projections do not commute orthogonally (||PQ|| > 1e-9)")
        lo = min(self.window[0], other.window[0])
        hi = max(self.window[1], other.window[1])
        return FermiProjection(np.hstack([self.basis, other.basis]), (lo, hi),
                               np.concatenate([self.energies, other.energies]), dict(self.provenance))

    def conj(self):
        """Entrywise complex conjugate (time reversal of the projection)."""
        return FermiProjection(self.basis.conj(), self.window, self.energies, dict(self.provenance))

    @classmethod
    def from_vectors(cls, vectors, window=(math.nan, math.nan)):
        v = np.asarray(vectors, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        q, _ = np.linalg.qr(v)
        return cls(q, window)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, 0), dtype=complex), (math.nan, math.nan))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n, dtype=complex), (-math.inf, math.inf))


def _select(spec, mask, window):
    if spec.eigenvectors.shape[1] != len(spec.eigenvalues):
        raise ValueError("decomposition was computed without eigenvectors")
    return FermiProjection(spec.eigenvectors[:, mask], window, spec.eigenvalues[mask],
                           dict(spec.provenance))


def fermi_projection(spec, E_F):
    """P = chi_(-inf, E_F](H)."""
    if not math.isfinite(E_F):
        raise ValueError("Fermi energy must be finite")
    spec.require_below_ceiling(E_F)
    return _select(spec, spec.eigenvalues <= E_F, (-math.inf, float(E_F)))


def window_projection(spec, J):
    """P = chi_J(H) for the half-open window J = (lo, hi]."""
    lo, hi = J
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    spec.require_below_ceiling(hi)
    E = spec.eigenvalues
    return _select(spec, (E > lo) & (E <= hi), (float(lo), float(hi)))


# bands ---------------------------------------------------------------------


@dataclass(frozen=True)
class CleanLevels:
    """Clean (lambda = 0) Landau clusters of one torus."""

    means: np.ndarray
    lows: np.ndarray
    highs: np.ndarray
    counts: np.ndarray

    @property
    def broadening(self):
        return self.highs - self.lows

    @property
    def eps_disc(self):
        """Half the widest clean cluster width."""
        return float(self.broadening.max() / 2)

    @property
    def ceiling(self):
        """Midpoint between the last resolved level and the next one."""
        return float(self.highs[-1] + (self.means[-1] - self.means[-2]) / 2) if len(self.means) > 1 \
            else float(self.highs[-1] + self.means[-1])

    def gap_midpoint(self, n):
        """Energy halfway between clean levels n and n + 1 (n = 0: below level 1)."""
        if n == 0:
            return float(self.lows[0] / 2)
        return float((self.highs[n - 1] + self.lows[n]) / 2)


def clean_levels(torus, n_levels=3):
    """Measure the lowest ``n_levels`` Landau clusters at lambda = 0.

    Each cluster holds exactly n_phi eigenvalues; one extra cluster is
    computed to place the ceiling.
    """
    H = build_free_hamiltonian(torus)
    n_phi = torus.flux_quanta
    need = (n_levels + 1) * n_phi
    ceiling = (2 * n_levels + 2) * torus.field
    spec = diagonalize(H, ceiling=ceiling, vectors=False, k_hint=need + 8)
    E = spec.eigenvalues
    if len(E) < need:
        raise NumericalError("could not resolve the requested Landau levels")
    groups = E[: n_levels * n_phi].reshape(n_levels, n_phi)
    return CleanLevels(groups.mean(axis=1), groups.min(axis=1), groups.max(axis=1),
                       np.full(n_levels, n_phi))


@dataclass(frozen=True)
class BandReport:
    """Per-Landau-band extent of one spectrum.

    ``gaps`` are measured (next band minimum - this band maximum); the
    ``guaranteed_gaps`` come from the broadened intervals
    [B_n - lam M1 - eps, B_n + lam M2 + eps] and are positive exactly when
    the disjoint-bands condition holds.
    """

    lows: np.ndarray
    highs: np.ndarray
    counts: np.ndarray
    gaps: np.ndarray
    intervals: np.ndarray
    guaranteed_gaps: np.ndarray
    contained: bool
    disjoint: bool
    eps_disc: float

    @property
    def overlap(self):
        return not self.disjoint

    def to_dict(self):
        return {
            "bands": [
                {"n": n + 1, "min": float(self.lows[n]), "max": float(self.highs[n]),
                 "count": int(self.counts[n]), "gap_to_next": float(self.gaps[n]),
                 "broadened_interval": [float(x) for x in self.intervals[n]],
                 "guaranteed_gap_to_next": float(self.guaranteed_gaps[n])}
                for n in range(len(self.counts))
            ],
            "contained": bool(self.contained),
            "disjoint": bool(self.disjoint),
            "overlap": bool(self.overlap),
            "eps_disc": self.eps_disc,
        }


def band_report(spec, clean, lam, law):
    """Assign eigenvalues to the nearest clean level and test containment."""
    n_levels = len(clean.means)
    E = spec.eigenvalues
    E = E[E <= clean.ceiling]
    assign = np.argmin(np.abs(E[:, None] - clean.means[None, :]), axis=1)
    eps = clean.eps_disc
    lows = np.full(n_levels, np.nan)
    highs = np.full(n_levels, np.nan)
    counts = np.zeros(n_levels, dtype=int)
    for n in range(n_levels):
        sel = E[assign == n]
        counts[n] = len(sel)
        if len(sel):
            lows[n], highs[n] = sel.min(), sel.max()
    gaps = np.append(lows[1:] - highs[:-1], np.nan)
    iv = np.column_stack([clean.means - lam * law.M1 - eps, clean.means + lam * law.M2 + eps])
    gg = np.append(iv[1:, 0] - iv[:-1, 1], np.nan)
    inside = np.zeros(len(E), dtype=bool)
    for lo, hi in iv:
        inside |= (E >= lo) & (E <= hi)
    return BandReport(lows, highs, counts, gaps, iv, gg, bool(inside.all()),
                      bool(np.all(gg[:-1] > 0)), eps)


# Monte Carlo ---------------------------------------------------------------


def realization_eigenvalues(torus, lam, law, profile, seed, realization, ceiling):
    """Eigenvalues below ``ceiling`` of one disorder realization."""
    dis = sample(seed, law, profile, torus, realization)
    H = build_hamiltonian(torus, dis, lam)
    k = int(torus.flux_quanta * max(1.0, ceiling / (2 * torus.field)) + 16)
    return diagonalize(H, ceiling=ceiling, vectors=False, k_hint=k).eigenvalues


@dataclass(frozen=True)
class WegnerStatistic:
    mean_count: float
    normalized: float
    stderr: float
    normalized_stderr: float
    counts: np.ndarray


def wegner_from_counts(counts, width, L):
    counts = np.asarray(counts, dtype=float)
    R = len(counts)
    if R < 2:
        raise ValueError("need at least two realizations")
    mean = float(math.fsum(counts) / R)
    se = float(np.std(counts, ddof=1) / math.sqrt(R))
    scale = width * L**2
    return WegnerStatistic(mean, mean / scale, se, se / scale, counts)


def wegner_statistic(torus, lam, law, profile, J, R, seed, ceiling=None):
    """Monte Carlo mean and standard error of tr chi_J(H) over R realizations."""
    lo, hi = J
    if ceiling is None:
        ceiling = hi + 0.05 * torus.field
    if hi >= ceiling:
        raise ValueError("window must lie below the scan ceiling")
    counts = []
    for r in range(R):
        E = realization_eigenvalues(torus, lam, law, profile, seed, r, ceiling)
        counts.append(np.count_nonzero((E > lo) & (E <= hi)))
    return wegner_from_counts(counts, hi - lo, torus.side_length)


def density_of_states(eigenvalue_lists, edges, area):
    """Averaged eigenvalue histogram per unit energy per unit area.

    Returns ``(density, stderr)`` on the bins given by ``edges``.
    """
    H = np.array([np.histogram(E, bins=edges)[0] for E in eigenvalue_lists], dtype=float)
    widths = np.diff(edges)
    dens = H / (widths[None, :] * area)
    mean = dens.mean(axis=0)
    se = dens.std(axis=0, ddof=1) / math.sqrt(len(H)) if len(H) > 1 else np.zeros_like(mean)
    return mean, se
