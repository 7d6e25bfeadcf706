"""Energy-filtered transport moments of a state started in the central unit cell.

All evaluations run in the eigenbasis, restricted to eigenstates where the
energy bump is above 1e-14.  The Laplace time average has a closed form
(``exact_kernel``); a composite Gauss-Legendre quadrature of the same time
integral is kept as an independent evaluator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BUMP_CUTOFF = 1e-14


@dataclass(frozen=True)
class EnergyBump:
    """Smooth bump X(E) = exp(1 - 1/(1 - s^2)), s = (E - c)/w, supported on (c - w, c + w)."""

    center: float
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def __call__(self, E):
        s = (np.asarray(E, dtype=float) - self.center) / self.half_width
        out = np.zeros_like(s)
        m = np.abs(s) < 1
        out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
        return out

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def narrowed(self, factor):
        return EnergyBump(self.center, self.half_width / factor)


def position_weight(torus, p):
    """W_p(x) = (1 + d_torus(x, centre)^2)^(p/2)."""
    d = torus.distance_from(torus.center)
    return (1.0 + d**2) ** (p / 2)


@dataclass(frozen=True)
class _Window:
    """Eigenstates inside the bump support and the matrices the moments need."""

    energies: np.ndarray
    filt: np.ndarray
    vectors: np.ndarray
    cell_gram: np.ndarray
    area: float


def _window(spec, X, torus):
    lo, hi = X.support
    spec.require_below_ceiling(hi)
    f = X(spec.eigenvalues)
    m = f > BUMP_CUTOFF
    Phi = spec.eigenvectors[:, m]
    cell = torus.central_cell_sites()
    G = Phi[cell].conj().T @ Phi[cell]          # G_nm = <phi_n|chi_0|phi_m>
    return _Window(spec.eigenvalues[m], f[m], Phi, G, torus.lattice_spacing**2)


def _moment_matrix(win, torus, p):
    """Z_nm = a^2 X_n X_m G_nm <phi_m|W_p|phi_n>, so M(t) = sum Z_nm e^{-it(E_n - E_m)}."""
    Phi = win.vectors
    Wm = Phi.conj().T @ (position_weight(torus, p)[:, None] * Phi)
    return win.area * np.outer(win.filt, win.filt) * win.cell_gram * Wm.T


def moment_instant(spec, X, p, t, torus):
    """M(p, X, t): sum over central-cell sites j of a^2 ||W_p^(1/2) e^{-itH} X(H) delta_j||^2.

    Propagates the filtered site states directly, independently of the
    double-sum formula used by the time-averaged evaluators.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    win = _window(spec, X, torus)
    if len(win.energies) == 0:
        return 0.0
    cell = torus.central_cell_sites()
    coeff = (win.filt * np.exp(-1j * t * win.energies))[:, None] * win.vectors[cell].conj().T
    psi = win.vectors @ coeff
    w = position_weight(torus, p)
    return float(win.area * (w[:, None] * np.abs(psi) ** 2).sum())


def laplace_kernel(energies, T):
    """K_nm = (1/T) int_0^inf e^{-t/T} e^{-it(E_n - E_m)} dt = 1/(1 + iT(E_n - E_m))."""
    D = energies[:, None] - energies[None, :]
    return 1.0 / (1.0 + 1j * T * D)


def moment_time_averaged(spec, X, p, T, torus, evaluator="exact_kernel"):
    """Laplace time average (1/T) int_0^inf M(p, X, t) e^{-t/T} dt of one realization."""
    return moment_series(spec, X, p, [T], torus, evaluator)[0]


def moment_series(spec, X, p, times, torus, evaluator="exact_kernel"):
    """Time-averaged moments at every T in ``times`` (one realization)."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0):
        raise ValueError("averaging times must be positive")
    win = _window(spec, X, torus)
    if len(win.energies) == 0:
        return np.zeros(len(times))
    Z = _moment_matrix(win, torus, p)
    if evaluator == "exact_kernel":
        out = []
        for T in times:
            v = (Z * laplace_kernel(win.energies, T)).sum()
            out.append(v)
        out = np.array(out)
        # Z is Hermitian, so the imaginary part is roundoff
        if np.any(np.abs(out.imag) > 1e-10 * np.maximum(np.abs(out.real), 1e-300)):
            raise ArithmeticError("time-averaged moment is not real")
        return out.real
    if evaluator == "quadrature":
        return np.array([_quadrature(Z, win.energies, T) for T in times])
    raise ValueError(f"unknown evaluator {evaluator!r}")


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


def quadrature_panels(T, spread, t_first=None, upper=20.0):
    """Panel edges on [0, upper*T]: log-spaced, refined so no panel spans more than
    two periods of the fastest oscillation ``spread``."""
    t_end = upper * T
    t_first = T / 64 if t_first is None else t_first
    edges = np.concatenate([[0.0], np.geomspace(t_first, t_end, 40)])
    if spread > 0:
        h = 4 * math.pi / spread
        fine = np.arange(0.0, t_end, h)
        edges = np.union1d(edges, fine)
    return edges


def _quadrature(Z, energies, T):
    spread = float(energies.max() - energies.min())
    edges = quadrature_panels(T, spread)
    a, b = edges[:-1], edges[1:]
    half = (b - a)[:, None] / 2
    t = ((a + b)[:, None] / 2 + half * _GL_NODES[None, :]).ravel()
    w = (half * _GL_WEIGHTS[None, :]).ravel()
    total = 0.0
    for s in range(0, len(t), 2048):
        ts = t[s:s + 2048]
        U = np.exp(-1j * np.outer(ts, energies))
        M = np.einsum("tn,nm,tm->t", U, Z, U.conj()).real
        total += float(np.dot(w[s:s + 2048], M * np.exp(-ts / T)))
    return total / T


# exponents -----------------------------------------------------------------


@dataclass(frozen=True)
class TransportFit:
    p: float
    beta_hat: float
    residual: float
    knee_index: int
    knee_T: float
    reliable: bool


def transport_fit(times, values, p):
    """Slope of log M against p log T before the saturation knee.

    The knee is the first successive slope below 10% of the initial slope.
    The residual is the standard error of the slope divided by p.
    """
    T = np.asarray(times, dtype=float)
    M = np.asarray(values, dtype=float)
    if len(T) < 5:
        raise ValueError("need at least five averaging times (K >= 4)")
    if p <= 0:
        raise ValueError("p must be positive")
    if np.all(M <= 0):
        return TransportFit(p, 0.0, 0.0, len(T) - 1, float(T[-1]), False)
    x, y = np.log(T), np.log(np.maximum(M, np.finfo(float).tiny))
    slopes = np.diff(y) / np.diff(x)
    end = len(T)
    if slopes[0] > 0:
        low = np.flatnonzero(slopes < 0.1 * slopes[0])
        if len(low):
            end = int(low[0]) + 1
    n = end
    if n >= 2:
        A = np.column_stack([np.ones(n), x[:n]])
        coef, *_ = np.linalg.lstsq(A, y[:n], rcond=None)
        if n > 2:
            r = y[:n] - A @ coef
            cov = (r @ r / (n - 2)) * np.linalg.inv(A.T @ A)
            se = math.sqrt(max(cov[1, 1], 0.0))
        else:
            se = math.inf
        slope = float(coef[1])
    else:
        slope, se = 0.0, math.inf
    return TransportFit(p, slope / p, se / p, end - 1, float(T[end - 1]), n >= 3)


def ballistic_constant(times, values, p, end=None):
    """Smallest C with M(T_k) <= M(T_0) (C T_k / T_0)^p over the first ``end`` points."""
    T = np.asarray(times, dtype=float)
    M = np.asarray(values, dtype=float)
    end = len(T) if end is None else end
    if p == 0 or M[0] <= 0:
        return 1.0
    ratio = np.maximum(M[:end] / M[0], 0.0) ** (1.0 / p) * T[0] / T[:end]
    return float(max(ratio.max(), 0.0))


@dataclass(frozen=True)
class TransportSeries:
    p: float
    times: np.ndarray
    values: np.ndarray
    evaluator: str
    fit: TransportFit | None = None
    ballistic_C: float = math.nan
    meta: dict = field(default_factory=dict)

    def ballistic_ok(self, limit=1.2):
        return bool(self.ballistic_C <= limit)

    def rows(self):
        return [(float(T), float(v), self.evaluator) for T, v in zip(self.times, self.values)]

    def summary(self):
        f = self.fit
        return {"p": self.p, "beta_hat": None if f is None else f.beta_hat,
                "residual": None if f is None else f.residual,
                "knee_T": None if f is None else f.knee_T,
                "reliable": None if f is None else f.reliable,
                "ballistic_C": self.ballistic_C, "evaluator": self.evaluator, **self.meta}


def geometric_times(T0, K):
    if K < 4:
        raise ValueError("need K >= 4")
    return T0 * 2.0 ** np.arange(K + 1)


def make_series(times, values, p, evaluator="exact_kernel", meta=None):
    """Wrap averaged values with their fit and ballistic constant."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    fit = transport_fit(times, values, p) if p > 0 else None
    end = None if fit is None else fit.knee_index + 1
    return TransportSeries(p, times, values, evaluator, fit,
                           ballistic_constant(times, values, p, end), meta or {})


def local_exponent(specs, torus, E, w, p, times):
    """beta_hat(p) for bumps of half-width w, w/2, w/4 centred at E, averaged over ``specs``."""
    out = []
    for k in (1, 2, 4):
        X = EnergyBump(E, w / k)
        vals = np.mean([moment_series(s, X, p, times, torus) for s in specs], axis=0)
        out.append(transport_fit(times, vals, p).beta_hat)
    return tuple(out)
