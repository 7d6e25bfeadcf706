"""Shared tori and cached decompositions.

Eigensolves at dimension 4096 take seconds each, so decompositions used by
several test modules are computed once per session.
"""
import math

import pytest

from randlandau.disorder import CouplingLaw, SingleSiteProfile, sample
from randlandau.lattice import MagneticTorus, build_free_hamiltonian, build_hamiltonian
from randlandau.spectral import clean_levels, diagonalize

UNIFORM = CouplingLaw.uniform(1.0, 1.0)
PROFILE = SingleSiteProfile()


class DecompositionCache:
    def __init__(self):
        self._store = {}

    def get(self, torus, lam, r, ceiling, seed=0, vectors=True):
        key = (torus, lam, r, ceiling, seed, vectors)
        if key not in self._store:
            if lam == 0:
                H = build_free_hamiltonian(torus)
            else:
                H = build_hamiltonian(torus, sample(seed, UNIFORM, PROFILE, torus, r), lam)
            k = int(torus.flux_quanta * max(1.0, ceiling / (2 * torus.field)) + 16)
            self._store[key] = diagonalize(H, ceiling=ceiling, vectors=vectors, k_hint=k)
        return self._store[key]


@pytest.fixture(scope="session")
def cache():
    return DecompositionCache()


@pytest.fixture(scope="session")
def desk():
    return MagneticTorus.desk()


@pytest.fixture(scope="session")
def hall_torus():
    return MagneticTorus.hall_desk()


@pytest.fixture(scope="session")
def small():
    """L = 4, N = 32, n_phi = 4 at B = pi/2."""
    return MagneticTorus(4.0, math.pi / 2, 32)


@pytest.fixture(scope="session")
def desk_clean(cache, desk):
    return cache.get(desk, 0.0, 0, 6.0 * desk.field)


@pytest.fixture(scope="session")
def hall_clean(cache, hall_torus):
    return cache.get(hall_torus, 0.0, 0, 4.5 * hall_torus.field)


@pytest.fixture(scope="session")
def desk_levels(desk):
    return clean_levels(desk)


@pytest.fixture(scope="session")
def hall_disordered(cache, hall_torus):
    """lambda = 0.3 B realizations on the Hall preset, seed 0, computed on demand."""
    B = hall_torus.field

    def get(r):
        return cache.get(hall_torus, 0.3 * B, r, 4.5 * B)

    return get


@pytest.fixture(scope="session")
def hall_levels(hall_torus):
    return clean_levels(hall_torus)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
