import math

import numpy as np
import pytest

from kickho.exceptions import DomainError
from kickho.fock import FockBasis
from kickho.husimi import (
    HusimiField,
    HusimiGrid,
    coherent_overlap,
    husimi_grid,
    is_localized,
    localization_fraction,
)
from kickho.propagation import StateVector, displaced_vacuum, fock_state, vacuum_state


def _coherent_overlap_series(amps, beta):
    # <beta|psi> from the textbook expansion with exact factorials
    return sum(
        np.conj(math.exp(-abs(beta) ** 2 / 2) * beta**n / math.sqrt(math.factorial(n))) * c
        for n, c in enumerate(amps)
    )


def test_coherent_overlap_simple_cases():
    b = FockBasis(10)
    assert coherent_overlap(vacuum_state(b), 0) == 1
    assert coherent_overlap(fock_state(b, 1), 0) == 0
    for beta in (0.3, 1 - 0.5j, -1.2 + 0.8j):
        assert coherent_overlap(vacuum_state(b), beta) == pytest.approx(math.exp(-abs(beta) ** 2 / 2))


def test_coherent_overlap_against_series():
    rng = np.random.default_rng(1)
    amps = rng.normal(size=12) + 1j * rng.normal(size=12)
    psi = StateVector(FockBasis(12), amps / np.linalg.norm(amps))
    for beta in (0.5 + 0.2j, -1.0 + 1.1j):
        assert coherent_overlap(psi, beta) == pytest.approx(_coherent_overlap_series(psi.amplitudes, beta), abs=1e-13)


def test_large_beta_is_finite():
    psi = vacuum_state(FockBasis(2000))
    with pytest.warns(UserWarning, match="exceeds N/4"):
        value = coherent_overlap(psi, 30.0)
    assert value == pytest.approx(math.exp(-450), abs=1e-300)


def test_reach_warning():
    with pytest.warns(UserWarning):
        coherent_overlap(vacuum_state(FockBasis(16)), 3.0)


def test_vacuum_peak():
    field = husimi_grid(vacuum_state(FockBasis(40)), HusimiGrid.square(4.0, 81))
    assert field.argmax() == 0
    assert field.values.max() == pytest.approx(1 / math.pi, rel=1e-14)
    assert np.all(field.values >= 0)
    assert 0.9 <= field.total_mass() <= 1.0001


def test_displaced_vacuum_translation():
    b = FockBasis(120)
    beta0 = 1.3 + 3.0j
    grid = HusimiGrid.square(6.0, 121)
    field = husimi_grid(displaced_vacuum(b, (beta0.real, beta0.imag)), grid)
    assert field.argmax() == pytest.approx(1.3 + 3.0j, abs=0.05)
    B = grid.x1[:, None] + 1j * grid.x2[None, :]
    assert np.max(np.abs(field.values - np.exp(-np.abs(B - beta0) ** 2) / math.pi)) < 1e-6


def test_localization_fraction_vacuum():
    field = husimi_grid(vacuum_state(FockBasis(40)), HusimiGrid.square(5.0, 201))
    # Q_vac mass inside |beta| <= r is 1 - exp(-r^2)
    frac = localization_fraction(field, 2.0)
    assert frac >= 0.98
    assert frac == pytest.approx(1 - math.exp(-4), abs=2e-3)
    assert is_localized(field)


def test_localization_fraction_uniform():
    grid = HusimiGrid.square(4.0, 401)
    field = HusimiField(grid, np.ones((401, 401)))
    assert localization_fraction(field, 2.0) == pytest.approx(math.pi * 4 / 64, rel=0.01)


def test_localization_coverage():
    field = husimi_grid(vacuum_state(FockBasis(20)), HusimiGrid.square(2.0, 21))
    with pytest.raises(DomainError):
        localization_fraction(field, 3.0)
    with pytest.raises(DomainError):
        localization_fraction(field, 0.0)


def test_mixture_of_columns():
    b = FockBasis(30)
    grid = HusimiGrid.square(3.0, 31)
    cols = np.zeros((30, 2), dtype=complex)
    cols[0, 0] = cols[1, 1] = 1
    mixed = husimi_grid(cols, grid)
    avg = 0.5 * (husimi_grid(vacuum_state(b), grid).values + husimi_grid(fock_state(b, 1), grid).values)
    assert np.allclose(mixed.values, avg, atol=1e-15)
