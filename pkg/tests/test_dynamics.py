import math

import numpy as np
import pytest

from randlandau.dynamics import (EnergyBump, ballistic_constant, geometric_times, laplace_kernel, local_exponent,
                                 make_series, moment_instant, moment_series, moment_time_averaged, position_weight,
                                 quadrature_panels, transport_fit)
from randlandau.spectral import SpectralDecomposition, window_projection


@pytest.fixture(scope="module")
def spec(cache, desk):
    return cache.get(desk, 0.3 * desk.field, 0, 4.5 * desk.field)


@pytest.fixture(scope="module")
def centre_bump(spec, desk):
    E = spec.eigenvalues[:16]
    return EnergyBump(float(E.mean()), float(E.max() - E.min()) / 4)


TIMES = geometric_times(1.0, 10)


# bumps and weights -------------------------------------------------------------------------


def test_bump_shape():
    X = EnergyBump(1.0, 0.5)
    assert X(1.0) == pytest.approx(1.0)
    assert X(np.array([0.5, 1.5, 2.0])).tolist() == [0.0, 0.0, 0.0]
    assert X(1.2) == pytest.approx(math.exp(1 - 1 / (1 - 0.16)))
    assert X.support == (0.5, 1.5) and X.narrowed(2).half_width == 0.25
    with pytest.raises(ValueError):
        EnergyBump(0.0, 0.0)


def test_position_weight(desk):
    w0, w2 = position_weight(desk, 0), position_weight(desk, 2)
    assert np.all(w0 == 1)
    d = desk.distance_from(desk.center)
    assert np.allclose(w2, 1 + d**2)


def test_laplace_kernel_closed_form():
    # oracle: numerical Laplace transform of e^{-i t D} for one gap D
    from scipy import integrate
    D, T = 0.7, 3.0
    re = integrate.quad(lambda t: math.exp(-t / T) * math.cos(D * t), 0, math.inf, limit=200)[0] / T
    im = integrate.quad(lambda t: -math.exp(-t / T) * math.sin(D * t), 0, math.inf, limit=200)[0] / T
    K = laplace_kernel(np.array([D, 0.0]), T)[0, 1]
    assert K == pytest.approx(complex(re, im), abs=1e-9)


# trivial identities -------------------------------------------------------------------------


def test_gap_bump_is_zero(spec, desk):
    X = EnergyBump(2 * desk.field, 0.1 * desk.field)
    assert np.all(moment_series(spec, X, 2, TIMES, desk) == 0)
    assert moment_instant(spec, X, 2, 5.0, desk) == 0


def test_p0_time_independent(spec, desk, centre_bump):
    vals = moment_series(spec, centre_bump, 0, TIMES, desk)
    assert np.max(np.abs(vals - vals[0])) <= 1e-10 * abs(vals[0])
    inst = [moment_instant(spec, centre_bump, 0, t, desk) for t in (0.0, 3.0, 50.0)]
    assert np.allclose(inst, vals[0], rtol=1e-10)
    # oracle: ||X(H) chi_0||_2^2 from the explicit operator
    m = centre_bump(spec.eigenvalues) > 0
    V = spec.eigenvectors[:, m]
    XH = (V * centre_bump(spec.eigenvalues[m])) @ V.conj().T
    cell = desk.central_cell_sites()
    assert vals[0] == pytest.approx(desk.lattice_spacing**2 * np.sum(np.abs(XH[:, cell]) ** 2), rel=1e-10)


def test_instant_continuity(spec, desk, centre_bump):
    a = moment_instant(spec, centre_bump, 2, 0.0, desk)
    b = moment_instant(spec, centre_bump, 2, 1e-8, desk)
    assert abs(a - b) <= 1e-6 * a


def test_small_T_limit(spec, desk, centre_bump):
    a = moment_time_averaged(spec, centre_bump, 2, 1e-9, desk)
    assert a == pytest.approx(moment_instant(spec, centre_bump, 2, 0.0, desk), rel=1e-6)


def test_negative_inputs_rejected(spec, desk, centre_bump):
    with pytest.raises(ValueError):
        moment_instant(spec, centre_bump, 2, -1.0, desk)
    with pytest.raises(ValueError):
        moment_series(spec, centre_bump, 2, [0.0], desk)
    with pytest.raises(ValueError):
        moment_series(spec, centre_bump, 2, [1.0], desk, evaluator="euler")


# evaluator equivalence -----------------------------------------------------------------------


def test_exact_kernel_matches_quadrature(spec, desk, centre_bump):
    times = TIMES[::3]
    exact = moment_series(spec, centre_bump, 2, times, desk)
    quad = moment_series(spec, centre_bump, 2, times, desk, evaluator="quadrature")
    assert np.max(np.abs(exact - quad) / np.abs(exact)) <= 1e-6


def test_quadrature_panels_cover_range():
    e = quadrature_panels(10.0, 2.0)
    assert e[0] == 0 and e[-1] == pytest.approx(200.0)
    assert np.max(np.diff(e)) <= 4 * math.pi / 2.0 + 1e-12


def test_time_average_of_instant_moments(spec, desk, centre_bump):
    # oracle: scipy quad of the directly propagated moment
    from scipy import integrate
    T = 2.0
    f = lambda t: moment_instant(spec, centre_bump, 2, t, desk) * math.exp(-t / T) / T
    ref = integrate.quad(f, 0, 40 * T, limit=400, epsrel=1e-10)[0]
    assert moment_time_averaged(spec, centre_bump, 2, T, desk) == pytest.approx(ref, rel=1e-7)


# fits ----------------------------------------------------------------------------------------


def test_fit_constant_series():
    f = transport_fit(TIMES, np.full(len(TIMES), 3.0), 2)
    assert f.beta_hat == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_fit_ballistic_power_law(p):
    f = transport_fit(TIMES, TIMES**p, p)
    assert f.beta_hat == pytest.approx(1.0, abs=1e-6)
    assert f.reliable and f.knee_index == len(TIMES) - 1


def test_fit_knee_detection():
    vals = np.minimum(TIMES, 32.0) ** 2
    f = transport_fit(TIMES, vals, 2)
    assert f.knee_T == 32.0 and f.beta_hat == pytest.approx(1.0, abs=1e-6)


def test_fit_unreliable_and_errors():
    vals = np.array([1.0, 4.0, 4.0, 4.0, 4.0, 4.0])
    assert not transport_fit(TIMES[:6], vals, 1).reliable
    with pytest.raises(ValueError):
        transport_fit(TIMES[:4], vals[:4], 1)
    with pytest.raises(ValueError):
        transport_fit(TIMES[:6], vals, 0)
    with pytest.raises(ValueError):
        geometric_times(1.0, 3)


def test_ballistic_constant():
    assert ballistic_constant(TIMES, TIMES**2, 2) == pytest.approx(1.0)
    assert ballistic_constant(TIMES, np.ones(len(TIMES)), 2) == pytest.approx(1.0)
    assert ballistic_constant(TIMES, (1.5 * TIMES) ** 2, 2) == pytest.approx(1.0)
    assert ballistic_constant(TIMES, TIMES**3, 2) > 1.2


def test_clean_flat_band(desk, desk_clean):
    E = desk_clean.eigenvalues
    X = EnergyBump(desk.field, 0.2 * desk.field)
    vals = moment_series(desk_clean, X, 2, TIMES, desk)
    s = make_series(TIMES, vals, 2)
    assert s.fit.beta_hat <= 0.05
    assert s.ballistic_ok()
    assert E[15] - E[0] < 1e-9


def test_disordered_series_properties(spec, desk, centre_bump):
    fits = {}
    for p in (1, 2, 3):
        s = make_series(TIMES, moment_series(spec, centre_bump, p, TIMES, desk), p)
        assert s.ballistic_ok()
        fits[p] = s.fit
        assert s.summary()["p"] == p and len(s.rows()) == len(TIMES)
    assert fits[2].beta_hat >= fits[1].beta_hat - fits[1].residual - fits[2].residual
    assert fits[3].beta_hat >= fits[2].beta_hat - fits[2].residual - fits[3].residual


def test_series_mean_is_mean_of_series(cache, desk, centre_bump):
    specs = [cache.get(desk, 0.3 * desk.field, r, 4.5 * desk.field) for r in range(2)]
    per = [moment_series(s, centre_bump, 2, TIMES, desk) for s in specs]
    assert np.array_equal((per[0] + per[1]) / 2, np.mean(per, axis=0))
    triple = local_exponent(specs, desk, centre_bump.center, centre_bump.half_width, 2, TIMES)
    assert len(triple) == 3 and all(np.isfinite(triple))


def test_projection_filter_equivalence(spec, desk):
    # a bump covering band 1 acts on band-1 states only: p = 0 moment <= ||P chi_0||^2
    X = EnergyBump(desk.field, 0.9 * desk.field)
    P = window_projection(spec, (0, 2 * desk.field))
    cell = desk.central_cell_sites()
    bound = desk.lattice_spacing**2 * np.sum(np.abs(P.basis[cell]) ** 2)
    assert moment_series(spec, X, 0, [1.0], desk)[0] <= bound + 1e-12


def test_empty_decomposition_gives_zero(desk):
    empty = SpectralDecomposition(np.array([]), np.zeros((desk.dimension, 0), dtype=complex), desk.dimension,
                                  ceiling=10.0)
    assert moment_series(empty, EnergyBump(1.0, 0.5), 2, TIMES, desk).tolist() == [0.0] * len(TIMES)
