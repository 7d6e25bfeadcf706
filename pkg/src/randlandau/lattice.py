"""Finite-volume magnetic torus and the discretized Landau Hamiltonian.

The continuum operator (-i grad - A)^2 is replaced by the Peierls 5-point
stencil on an N x N grid covering the torus [0, L)^2.  Sites sit at cell
centres ((i + 1/2) a, (j + 1/2) a), so the torus centre (L/2, L/2) is a grid
corner.  The uniform field has curl A = -B, i.e. every counter-clockwise
plaquette carries the link-phase product exp(-i B a^2).

Two Landau gauges are available:

``landau_x``
    A = (0, -B x1); twist on the bonds crossing the x1 boundary.
``landau_y``
    A = (B x2, 0); twist on the bonds crossing the x2 boundary.

Both have identical plaquette phases, so their spectra coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FLUX_MODES = ("round-up-flux", "adjust-field")
GAUGES = ("landau_x", "landau_y")

_INT_TOL = 1e-9


class ResolutionGuardError(ValueError):
    """The grid is too coarse for the requested field."""


def quantize_flux(B, L_request):
    """Smallest side length L >= L_request carrying an integer flux.

    Returns ``(L, n_phi)`` with ``B * L**2 / (2 pi) == n_phi``.
    """
    if not B > 0 or not L_request > 0:
        raise ValueError("B and L_request must be positive")
    x = B * L_request**2 / (2 * math.pi)
    k = max(1, math.ceil(x - _INT_TOL * max(1.0, x)))
    L = math.sqrt(2 * math.pi * k / B)
    if abs(L - L_request) <= 1e-12 * L_request:
        L = float(L_request)
    return L, k


def quantize_field(L, B_request):
    """Field nearest to ``B_request`` giving integer flux through an L x L torus.

    Returns ``(B, n_phi)``; n_phi is at least 1.
    """
    if not L > 0 or not B_request > 0:
        raise ValueError("L and B_request must be positive")
    k = max(1, round(B_request * L**2 / (2 * math.pi)))
    return 2 * math.pi * k / L**2, k


@dataclass(frozen=True)
class MagneticTorus:
    """An L x L torus threaded by n_phi flux quanta, sampled on an N x N grid.

    Use :meth:`from_request` to build one from a field and a target size; the
    plain constructor expects (L, B) that already satisfy flux integrality.
    """

    side_length: float
    field: float
    grid_points: int
    gauge: str = "landau_x"
    flux_mode: str = "round-up-flux"
    flux_guard: int = 4
    flux_quanta: int = field(init=False)

    def __post_init__(self):
        L, B, N = self.side_length, self.field, self.grid_points
        if not (L > 0 and B > 0):
            raise ValueError("side length and field must be positive")
        if int(N) != N or N < 2:
            raise ValueError("grid_points must be an integer >= 2")
        if self.gauge not in GAUGES:
            raise ValueError(f"unknown gauge {self.gauge!r}")
        if self.flux_mode not in FLUX_MODES:
            raise ValueError(f"unknown flux mode {self.flux_mode!r}")
        if int(self.flux_guard) != self.flux_guard or self.flux_guard < 1:
            raise ValueError("flux_guard must be a positive integer")
        flux = B * L**2 / (2 * math.pi)
        n_phi = round(flux)
        if n_phi < 1 or abs(flux - n_phi) > _INT_TOL * max(1.0, flux):
            raise ValueError(f"B L^2 / 2pi = {flux!r} is not a positive integer")
        object.__setattr__(self, "flux_quanta", int(n_phi))
        object.__setattr__(self, "grid_points", int(N))

    @classmethod
    def from_request(cls, B, L_request, N, mode="round-up-flux", gauge="landau_x", flux_guard=4):
        """Quantize the flux (adjusting L, or B for ``adjust-field``) and build."""
        if mode == "round-up-flux":
            L, _ = quantize_flux(B, L_request)
        elif mode == "adjust-field":
            L = float(L_request)
            B, _ = quantize_field(L, B)
        else:
            raise ValueError(f"unknown flux mode {mode!r}")
        return cls(L, B, N, gauge=gauge, flux_mode=mode, flux_guard=flux_guard)

    @classmethod
    def desk(cls, gauge="landau_x"):
        """Desk-scale preset: L = 8, N = 64, n_phi = 16 (B = pi/2)."""
        return cls(8.0, 2 * math.pi * 16 / 64, 64, gauge=gauge)

    @classmethod
    def hall_desk(cls, gauge="landau_x"):
        """Hall preset: L = 16, N = 64, n_phi = 64 (B = pi/2), guard N >= n_phi.

        Same field and dimension as :meth:`desk` but L sqrt(B) = 20, wide
        enough for a window around one switch crossing to hold the level-2
        commutator density.  Only the flux-per-plaquette guard is relaxed;
        a sqrt(B) = 0.31 and the clean levels stay within 2% of (2n-1)B.
        """
        return cls(16.0, math.pi / 2, 64, gauge=gauge, flux_guard=1)

    # geometry -------------------------------------------------------------

    @property
    def lattice_spacing(self):
        return self.side_length / self.grid_points

    @property
    def dimension(self):
        return self.grid_points**2

    @property
    def alpha(self):
        """Flux per plaquette, B a^2 = 2 pi n_phi / N^2."""
        return 2 * math.pi * self.flux_quanta / self.grid_points**2

    @property
    def magnetic_length(self):
        return 1.0 / math.sqrt(self.field)

    @property
    def center(self):
        return (self.side_length / 2, self.side_length / 2)

    @property
    def cells_per_side(self):
        """Number of unit cells per side, or None when L is not an integer."""
        K = round(self.side_length)
        if abs(self.side_length - K) > 1e-9:
            return None
        return int(K)

    @property
    def steps_per_cell(self):
        """Grid steps per unit length, or None when incommensurate."""
        K = self.cells_per_side
        if K is None or self.grid_points % K:
            return None
        return self.grid_points // K

    def check_resolution(self):
        """Raise :class:`ResolutionGuardError` if the grid cannot resolve the field."""
        N, n_phi, k = self.grid_points, self.flux_quanta, self.flux_guard
        if N < k * n_phi:
            raise ResolutionGuardError(
                f"N = {N} < {k} n_phi = {k * n_phi}: flux per plaquette too large"
            )
        if self.lattice_spacing * math.sqrt(self.field) > 0.5 + 1e-12:
            raise ResolutionGuardError(
                f"a sqrt(B) = {self.lattice_spacing * math.sqrt(self.field):.3f} > 0.5"
            )

    def grid_indices(self):
        """Integer site indices (i, j), flattened with index i * N + j."""
        idx = np.arange(self.grid_points)
        i, j = np.meshgrid(idx, idx, indexing="ij")
        return i.ravel(), j.ravel()

    def site_coordinates(self):
        """Torus coordinates (x1, x2) in [0, L) of every site, flattened."""
        i, j = self.grid_indices()
        a = self.lattice_spacing
        return (i + 0.5) * a, (j + 0.5) * a

    def torus_displacement(self, x1, x2, origin):
        """Minimal-image displacement of points from ``origin``."""
        L = self.side_length
        d1 = (np.asarray(x1) - origin[0] + L / 2) % L - L / 2
        d2 = (np.asarray(x2) - origin[1] + L / 2) % L - L / 2
        return d1, d2

    def distance_from(self, origin):
        """Minimal-image distance of every site from ``origin``."""
        d1, d2 = self.torus_displacement(*self.site_coordinates(), origin)
        return np.hypot(d1, d2)

    def cell_offset(self):
        """Torus coordinate of the unit-cell lattice point nearest 0 (0 or 1/2)."""
        L = self.side_length
        return L / 2 - math.floor(L / 2)

    def cell_index(self):
        """Unit cell (k1, k2) of every site, cells centred on the Z^2 points.

        Requires integer L.  The cell k covers the square of side one centred
        at torus coordinate ``cell_offset() + k``.
        """
        K = self.cells_per_side
        if K is None:
            raise ValueError("unit cells need an integer side length")
        off = self.cell_offset()
        x1, x2 = self.site_coordinates()
        k1 = np.floor(x1 - off + 0.5).astype(int) % K
        k2 = np.floor(x2 - off + 0.5).astype(int) % K
        return k1, k2

    def central_cell_sites(self):
        """Indices of sites inside the unit square centred at the torus centre."""
        c = self.center
        d1, d2 = self.torus_displacement(*self.site_coordinates(), c)
        return np.flatnonzero((np.abs(d1) < 0.5) & (np.abs(d2) < 0.5))

    def describe(self):
        return {
            "L": self.side_length,
            "B": self.field,
            "N": self.grid_points,
            "n_phi": self.flux_quanta,
            "gauge": self.gauge,
            "flux_mode": self.flux_mode,
            "flux_guard": self.flux_guard,
        }


@dataclass(frozen=True)
class GaugeField:
    """Link phases exp(i int A.dl) on the forward bonds of the torus grid.

    ``x_links[i, j]`` belongs to the bond (i, j) -> (i+1, j), ``y_links[i, j]``
    to (i, j) -> (i, j+1), indices taken mod N.  A reversed bond carries the
    conjugate phase.
    """

    x_links: np.ndarray
    y_links: np.ndarray

    def plaquettes(self):
        """Counter-clockwise phase product of every elementary plaquette."""
        X, Y = self.x_links, self.y_links
        return (
            X
            * np.roll(Y, -1, axis=0)
            * np.conj(np.roll(X, -1, axis=1))
            * np.conj(Y)
        )

    def x_holonomies(self):
        """Phase product around the x1 cycle for every row j."""
        return np.prod(self.x_links, axis=0)

    def y_holonomies(self):
        """Phase product around the x2 cycle for every column i."""
        return np.prod(self.y_links, axis=1)


def gauge_field(torus):
    N, alpha = torus.grid_points, torus.alpha
    idx = np.arange(N)
    X = np.ones((N, N), dtype=complex)
    Y = np.ones((N, N), dtype=complex)
    if torus.gauge == "landau_x":
        # A = (0, -B x1): y-bonds pick up -alpha * i
        Y[:] = np.exp(-1j * alpha * idx)[:, None]
        X[N - 1, :] = np.exp(1j * alpha * N * idx)
    else:
        # A = (B x2, 0): x-bonds pick up +alpha * j
        X[:] = np.exp(1j * alpha * idx)[None, :]
        Y[:, N - 1] = np.exp(-1j * alpha * N * idx)
    return GaugeField(X, Y)


@dataclass(frozen=True)
class Hamiltonian:
    """Immutable sparse Hermitian operator plus provenance."""

    matrix: sp.csr_matrix
    torus: MagneticTorus | None = None
    descriptor: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def toarray(self):
        return self.matrix.toarray()

    def hermiticity_defect(self):
        """max |H - H^dagger| / max |H|."""
        D = self.matrix - self.matrix.conj().T
        scale = abs(self.matrix).max()
        if scale == 0:
            return 0.0
        return (abs(D).max() if D.nnz else 0.0) / scale

    def __matmul__(self, v):
        return self.matrix @ v


def _hopping_matrix(torus, gauge):
    N = torus.grid_points
    i, j = torus.grid_indices()
    s = i * N + j
    sx = ((i + 1) % N) * N + j
    sy = i * N + (j + 1) % N
    # H[x, y] = -conj(link(x -> y)) / a^2
    tx = -np.conj(gauge.x_links.ravel())
    ty = -np.conj(gauge.y_links.ravel())
    rows = np.concatenate([s, sx, s, sy])
    cols = np.concatenate([sx, s, sy, s])
    vals = np.concatenate([tx, np.conj(tx), ty, np.conj(ty)])
    return sp.coo_matrix((vals, (rows, cols)), shape=(N * N, N * N))


def build_free_hamiltonian(torus, *, check=True, gauge=None):
    """Magnetic 5-point Laplacian (1/a^2)(4 - sum of phased hops).

    ``gauge`` overrides the torus gauge field (used for gauge-invariance
    checks).  Passing a gauge with all phases 1 gives the plain Laplacian.
    """
    if check:
        torus.check_resolution()
    if gauge is None:
        gauge = gauge_field(torus)
    a2 = torus.lattice_spacing**2
    n = torus.dimension
    M = (4.0 * sp.identity(n, dtype=complex, format="coo") + _hopping_matrix(torus, gauge)) / a2
    return Hamiltonian(M.tocsr(), torus, {"lambda": 0.0, **torus.describe()})


def build_hamiltonian(torus, disorder=None, lam=0.0, *, check=True):
    """H_B + lam * V_omega on the torus grid."""
    H0 = build_free_hamiltonian(torus, check=check)
    if disorder is None or lam == 0:
        return H0
    V = sp.diags(lam * disorder.potential.astype(complex))
    desc = dict(H0.descriptor)
    desc.update(lam=float(lam), seed=disorder.seed, realization=disorder.realization)
    return Hamiltonian((H0.matrix + V).tocsr(), torus, desc)


# magnetic translations -----------------------------------------------------


def _grid_shift(torus, shift):
    m = torus.steps_per_cell
    if m is None:
        raise ValueError("translations need an integer number of grid steps per unit cell")
    a1, a2 = (int(c) for c in shift)
    if (a1, a2) != tuple(shift):
        raise ValueError("shift must be an integer vector in unit cells")
    s, t = a1 * m, a2 * m
    N, n_phi = torus.grid_points, torus.flux_quanta
    if (s * n_phi) % N or (t * n_phi) % N:
        raise ValueError(
            f"shift {shift} does not preserve the magnetic boundary conditions"
            f" (needs multiples of L/n_phi = {torus.side_length / n_phi:g})"
        )
    return s, t


def translation_operator(torus, shift):
    """Sparse unitary of the magnetic translation by ``shift`` unit cells.

    (U psi)(x) = g(x) psi(x - shift), with g the field-dependent phase of the
    torus gauge.  Only shifts that preserve the magnetic-periodic boundary
    conditions are accepted.
    """
    s, t = _grid_shift(torus, shift)
    N, alpha = torus.grid_points, torus.alpha
    i, j = torus.grid_indices()
    ip, jp = i - s, j - t
    i0, p = ip % N, ip // N
    j0, q = jp % N, jp // N
    if torus.gauge == "landau_x":
        # psi(i + pN, j) = exp(-i p alpha N j) psi(i, j); periodic in j
        phase = np.exp(-1j * alpha * s * j) * np.exp(-1j * alpha * N * p * j0)
    else:
        phase = np.exp(1j * alpha * t * i) * np.exp(1j * alpha * N * q * i0)
    rows = i * N + j
    cols = i0 * N + j0
    return sp.csr_matrix((phase, (rows, cols)), shape=(N * N, N * N))


def magnetic_translate(torus, shift, v):
    """Apply the magnetic translation by ``shift`` unit cells to state(s) ``v``."""
    v = np.asarray(v)
    if v.shape[0] != torus.dimension:
        raise ValueError("state dimension does not match the torus")
    return translation_operator(torus, shift) @ v


def _power_norm(apply, n, steps=20, seed=0):
    """Operator-norm estimate of a Hermitian map by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = apply(v)
        est = np.linalg.norm(w)
        if est == 0:
            return 0.0
        v = w / est
    return float(est)


def covariance_check(torus, disorder, shift, lam=1.0, steps=20):
    """Norm of U_a H_omega U_a^* - H_{tau_a omega}, by power iteration.

    Returns ``(deviation, norm_H)`` so callers can form the relative value.
    """
    U = translation_operator(torus, shift)
    H = build_hamiltonian(torus, disorder, lam).matrix
    Hs = build_hamiltonian(torus, disorder.shifted(shift), lam).matrix
    Ud = U.conj().T.tocsr()

    def apply(v):
        return U @ (H @ (Ud @ v)) - Hs @ v

    dev = _power_norm(apply, torus.dimension, steps)
    norm_H = _power_norm(lambda v: H @ v, torus.dimension, steps)
    return dev, norm_H
