"""Anderson-type random potential V(x) = sum_i omega_i u(x - i).

Couplings are drawn with a counter-based generator (Philox) keyed on
``(seed, realization)`` with the site index as the counter, so a realization
is bit-identical no matter in which order, or in which process, sites and
realizations are sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate

PROFILE_SHAPES = ("square_indicator", "disc_indicator", "cosine_bump")


@dataclass(frozen=True)
class SingleSiteProfile:
    """Single-site bump u, sandwiched as u_min chi_inner <= u <= u_max chi_outer.

    ``inner`` and ``outer`` are side lengths of the centred squares
    {|y|_inf < side/2}.  ``disc_indicator`` is the indicator of the disc of
    diameter ``outer``; ``cosine_bump`` is cos^4 in each coordinate, which is
    C^3 and supported in the outer square.
    """

    shape: str = "square_indicator"
    inner: float = 0.45
    outer: float = 0.45

    def __post_init__(self):
        if self.shape not in PROFILE_SHAPES:
            raise ValueError(f"unknown profile shape {self.shape!r}")
        if not 0 < self.inner <= self.outer < math.inf:
            raise ValueError("need 0 < inner <= outer < inf")
        if self.shape == "disc_indicator" and self.inner > self.outer / math.sqrt(2) + 1e-12:
            raise ValueError("disc of diameter outer must contain the inner square")

    @property
    def floor(self):
        """u_min: lower bound of u on the inner square."""
        if self.shape == "cosine_bump":
            return math.cos(math.pi * self.inner / (2 * self.outer)) ** 8
        return 1.0

    @property
    def cap(self):
        return 1.0

    def __call__(self, d1, d2):
        d1 = np.asarray(d1, dtype=float)
        d2 = np.asarray(d2, dtype=float)
        h = self.outer / 2
        if self.shape == "square_indicator":
            return ((np.abs(d1) < h) & (np.abs(d2) < h)).astype(float)
        if self.shape == "disc_indicator":
            return (np.hypot(d1, d2) < h).astype(float)
        inside = (np.abs(d1) < h) & (np.abs(d2) < h)
        c = np.cos(np.pi * d1 / self.outer) ** 4 * np.cos(np.pi * d2 / self.outer) ** 4
        return np.where(inside, c, 0.0)


@dataclass(frozen=True)
class CouplingLaw:
    """Distribution of the couplings omega_i on [-M1, M2].

    ``kind == "uniform"`` is the flat density; ``M1 = M2 = 0`` degenerates to
    a point mass at 0.  ``kind == "truncated_density"`` carries an arbitrary
    bounded density, sampled by inverse CDF on a fine grid.
    """

    kind: str = "uniform"
    M1: float = 1.0
    M2: float = 1.0
    density: Callable | None = field(default=None, compare=False, repr=False)
    normalization: float = 1.0
    density_sup: float = 0.5
    label: str = "uniform[-1,1]"
    _grid: tuple | None = field(default=None, compare=False, repr=False)

    @classmethod
    def uniform(cls, M1=1.0, M2=1.0):
        if M1 < 0 or M2 < 0:
            raise ValueError("M1, M2 must be non-negative")
        width = M1 + M2
        sup = math.inf if width == 0 else 1.0 / width
        return cls("uniform", float(M1), float(M2), None, 1.0, sup, f"uniform[{-M1:g},{M2:g}]")

    @classmethod
    def truncated(cls, density, M1, M2, label="truncated", npts=8193):
        """Law with density proportional to ``density`` restricted to [-M1, M2]."""
        if M1 + M2 <= 0:
            raise ValueError("need M1 + M2 > 0")
        mass, _ = integrate.quad(density, -M1, M2, points=[0.0] if -M1 < 0 < M2 else None,
                                 epsabs=0, epsrel=1e-12, limit=400)
        if not mass > 0:
            raise ValueError("density has no mass on the support")
        c = 1.0 / mass
        x = np.linspace(-M1, M2, npts)
        f = c * np.asarray(density(x), dtype=float)
        cdf = integrate.cumulative_trapezoid(f, x, initial=0.0)
        cdf /= cdf[-1]
        law = cls("truncated_density", float(M1), float(M2), density, c, float(f.max()), label)
        return replace(law, _grid=(x, cdf))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -self.M1) & (x <= self.M2)
        if self.kind == "uniform":
            if self.M1 + self.M2 == 0:
                raise ValueError("point mass has no density")
            return np.where(inside, 1.0 / (self.M1 + self.M2), 0.0)
        return np.where(inside, self.normalization * self.density(x), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return -self.M1 + (self.M1 + self.M2) * u
        x, cdf = self._grid
        return np.interp(u, cdf, x)

    def mean(self):
        if self.kind == "uniform":
            return (self.M2 - self.M1) / 2
        val, _ = integrate.quad(lambda t: t * self.pdf(t), -self.M1, self.M2, limit=400)
        return val

    def mass_outside(self, eps):
        """nu({|omega| >= eps}) by quadrature of the density."""
        lo, hi = -self.M1, self.M2
        total = 0.0
        if hi > eps:
            total += integrate.quad(self.pdf, eps, hi, limit=400, epsrel=1e-11)[0]
        if lo < -eps:
            total += integrate.quad(self.pdf, lo, -eps, limit=400, epsrel=1e-11)[0]
        return total

    def describe(self):
        return {"kind": self.kind, "M1": self.M1, "M2": self.M2, "label": self.label,
                "normalization": self.normalization, "density_sup": self.density_sup}


def lorentzian(x):
    """Cauchy density; <u>^2 rho(u) is bounded, as the small-disorder family requires."""
    return 1.0 / (math.pi * (1.0 + np.asarray(x, dtype=float) ** 2))


def rescaled_law(base_density, lam, b, label=None):
    """Density c * lam^-1 * rho(u / lam) restricted to [-b, b], c fixing unit mass."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not b > 0:
        raise ValueError("cutoff b must be positive")

    def scaled(u):
        return np.asarray(base_density(np.asarray(u) / lam), dtype=float) / lam

    return CouplingLaw.truncated(scaled, b, b, label=label or f"rescaled(lam={lam:g},b={b:g})")


# sampling -----------------------------------------------------------------


def site_key(seed, realization):
    """Philox key for one (experiment seed, realization index) pair."""
    ss = np.random.SeedSequence([int(seed), int(realization)])
    return ss.generate_state(2, np.uint64)


def site_uniforms(seed, realization, n_sites):
    """One uniform in [0, 1) per site index, drawn from Philox(key, counter=site)."""
    key = site_key(seed, realization)
    out = np.empty(n_sites)
    for k in range(n_sites):
        bitgen = np.random.Philox(key=key, counter=k)
        out[k] = np.random.Generator(bitgen).random()
    return out


def lattice_sites(torus, profile):
    """Unit-cell lattice points carrying a coupling, as torus coordinates.

    Integer L: all L^2 points of the torus lattice, bumps wrapped periodically.
    Otherwise: the Z^2 points inside the square of side L - outer around the
    torus centre, whose bumps fit without wrapping.
    Returns ``(c1, c2, shape)``; ``shape`` is (K, K) in the periodic case.
    """
    L = torus.side_length
    K = torus.cells_per_side
    if K is not None:
        off = torus.cell_offset()
        k = np.arange(K)
        c1, c2 = np.meshgrid(off + k, off + k, indexing="ij")
        return c1.ravel(), c2.ravel(), (K, K)
    half = (L - profile.outer) / 2
    n = math.ceil(half) - 1 if float(half).is_integer() else math.floor(half)
    k = np.arange(-n, n + 1)
    c1, c2 = np.meshgrid(L / 2 + k, L / 2 + k, indexing="ij")
    return c1.ravel(), c2.ravel(), (len(k), len(k))


def bump_matrix(torus, profile, c1, c2, periodic):
    """Dense (sites x grid) table of u(x - i) evaluated on the grid."""
    x1, x2 = torus.site_coordinates()
    L = torus.side_length
    d1 = x1[None, :] - c1[:, None]
    d2 = x2[None, :] - c2[:, None]
    if periodic:
        d1 = (d1 + L / 2) % L - L / 2
        d2 = (d2 + L / 2) % L - L / 2
    return profile(d1, d2)


@dataclass(frozen=True)
class DisorderRealization:
    """Sampled couplings and the assembled potential (before the factor lambda)."""

    seed: int
    realization: int
    couplings: np.ndarray
    potential: np.ndarray
    normalization: float
    law: CouplingLaw = field(repr=False)
    profile: SingleSiteProfile = field(repr=False)
    torus: object = field(repr=False)

    @property
    def periodic(self):
        return self.torus.cells_per_side is not None

    def shifted(self, shift):
        """Realization of tau_a omega, (tau_a omega)_i = omega_{i - a}."""
        if not self.periodic:
            raise ValueError("unit-cell shifts need a torus with integer side")
        c = np.roll(self.couplings, shift=tuple(int(s) for s in shift), axis=(0, 1))
        return replace(self, couplings=c, potential=assemble_potential(self.torus, self.profile, c)[0])

    def rows(self):
        """(site index, omega) rows for CSV dumps."""
        return [(k, float(w)) for k, w in enumerate(self.couplings.ravel())]


def assemble_potential(torus, profile, couplings):
    """Potential sum_i omega_i u(x - i) with the profile normalised to sup sum_i u = 1.

    Returns ``(potential, normalization)`` where ``normalization`` is the
    factor the raw profile was divided by.
    """
    c1, c2, _ = lattice_sites(torus, profile)
    periodic = torus.cells_per_side is not None
    U = bump_matrix(torus, profile, c1, c2, periodic)
    total = U.sum(axis=0).max()
    if total <= 0:
        raise ValueError("profile does not reach any grid site; refine the grid")
    return (np.asarray(couplings).ravel() @ U) / total, float(total)


def sample(seed, law, profile, torus, realization=0):
    """Draw one realization of the random potential on ``torus``."""
    if torus.side_length < 2:
        raise ValueError("torus must be at least two unit cells wide")
    c1, _, shape = lattice_sites(torus, profile)
    if law.kind == "uniform" and law.M1 + law.M2 == 0:
        omega = np.zeros(len(c1))
    else:
        omega = law.ppf(site_uniforms(seed, realization, len(c1)))
    omega = omega.reshape(shape)
    potential, norm = assemble_potential(torus, profile, omega)
    return DisorderRealization(int(seed), int(realization), omega, potential, norm, law, profile, torus)
