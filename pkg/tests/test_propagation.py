import math

import numpy as np
import pytest

from kickho.exceptions import DomainError, InsufficientBasisError, NumericError
from kickho.fock import FockBasis, floquet_operator
from kickho.params import build_params
from kickho.propagation import (
    StateVector,
    apply_floquet,
    converged_heating_curve,
    displaced_vacuum,
    energy_scan,
    fock_state,
    heating_curve,
    leakage,
    mean_excitation,
    vacuum_state,
)


@pytest.fixture
def basis():
    return FockBasis(64)


def test_vacuum(basis):
    psi = vacuum_state(basis)
    assert mean_excitation(psi) == 0.5
    assert psi.norm() == 1
    assert psi.overlap(psi) == 1


def test_state_vector_validates_norm(basis):
    with pytest.raises(NumericError):
        StateVector(basis, np.full(64, 1.0))
    with pytest.raises(DomainError):
        StateVector(basis, np.ones(3) / math.sqrt(3))


def test_displaced_vacuum_at_origin_is_vacuum(basis):
    assert np.array_equal(displaced_vacuum(basis, (0, 0)).amplitudes, vacuum_state(basis).amplitudes)


def test_displaced_vacuum_moments(basis):
    psi = displaced_vacuum(basis, (1.2, 2.0))
    # Poisson occupation: <n> = |beta|^2 = 1.44 + 4.0
    assert mean_excitation(psi) - 0.5 == pytest.approx(5.44, abs=1e-10)
    assert 1 - 1e-8 <= psi.norm() <= 1 + 1e-15
    # <a> = beta
    a = np.diag(np.sqrt(np.arange(1, 64)), 1)
    assert np.vdot(psi.amplitudes, a @ psi.amplitudes) == pytest.approx(1.2 + 2.0j, abs=1e-10)


def test_displaced_vacuum_vu_coordinates(basis):
    eta = 0.4
    a = displaced_vacuum(basis, (2 * eta * 1.2, 2 * eta * 2.0), eta=eta, coords="vu")
    b = displaced_vacuum(basis, (1.2, 2.0))
    assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-14)


def test_displaced_vacuum_needs_room():
    with pytest.raises(InsufficientBasisError):
        displaced_vacuum(FockBasis(8), (2.0, 2.0))


def test_mean_excitation_values(basis):
    assert mean_excitation(fock_state(basis, 1)) == 1.5
    amps = np.zeros(64, dtype=complex)
    amps[[0, 2]] = 1 / math.sqrt(2)
    assert mean_excitation(StateVector(basis, amps)) == pytest.approx(1.5, abs=1e-15)


def test_leakage(basis):
    assert leakage(vacuum_state(basis), 0.5) == 0
    assert leakage(fock_state(basis, 63), 0.1) == 1
    assert leakage(fock_state(basis, 57), 0.1) == 1  # top ceil(6.4) = 7 levels
    assert leakage(fock_state(basis, 56), 0.1) == 0
    with pytest.raises(DomainError):
        leakage(vacuum_state(basis), 1.0)


def test_free_evolution(basis):
    p = build_params(0, 6, 0.4)
    U = floquet_operator(p, basis)
    out = apply_floquet(vacuum_state(basis), U)
    assert out.amplitudes[0] == 1
    out = apply_floquet(fock_state(basis, 5), U)
    assert out.amplitudes[5] == pytest.approx(np.exp(-1j * p.alpha * 5), abs=1e-15)


def test_apply_floquet_dimension_mismatch():
    U = floquet_operator(build_params(1, 6, 0.4), FockBasis(10))
    with pytest.raises(DomainError):
        apply_floquet(vacuum_state(FockBasis(12)), U)


def test_norm_drift_600_kicks():
    basis = FockBasis(300)
    U = floquet_operator(build_params(2.0, 6, 0.464), basis)
    psi = vacuum_state(basis)
    for _ in range(600):
        psi = apply_floquet(psi, U)
    assert abs(psi.norm() - 1) < 1e-8


def test_norm_conservation_scales_with_kicks():
    basis = FockBasis(200)
    U = floquet_operator(build_params(2.0, 5, 0.6), basis)
    psi = vacuum_state(basis).amplitudes
    for n in range(1, 3001):
        psi = U.matrix @ psi
        if n in (10, 100, 1000, 3000):
            assert abs(np.linalg.norm(psi) - 1) < n * 1e-12


def test_heating_curve_initial_energy_exact():
    basis = FockBasis(128)
    psi0 = displaced_vacuum(basis, (0.7, -0.4))
    c = heating_curve(build_params(2.0, 6, 0.464), basis, 5, psi0)
    assert c.energies[0] == mean_excitation(psi0)
    assert len(c.energies) == 6 and len(c.leakage_series) == 6
    assert np.all(c.leakage_series >= 0)


@pytest.mark.parametrize("center", [(0, 0), (1.0, 0.5), (-2.0, 1.5)])
def test_heating_curve_without_kick_is_constant(center):
    basis = FockBasis(96)
    psi0 = displaced_vacuum(basis, center)
    c = heating_curve(build_params(0, 5, 0.3), basis, 50, psi0)
    assert np.max(np.abs(c.energies - c.energies[0])) < 1e-12 * max(1, c.energies[0])


def test_heating_curve_flags_leakage():
    c = heating_curve(build_params(2.0, 6, 0.464), FockBasis(40), 100)
    assert not c.converged
    assert c.notes


def test_converged_curve_passes_doubling():
    p = build_params(2.0, 6, 0.464)
    c = converged_heating_curve(p, 30, start_size=64, max_size=1024)
    assert c.converged
    assert c.max_leakage < 1e-6
    assert c.doubling_deviation < 1e-6
    big = heating_curve(p, FockBasis(2 * c.basis.size), 30)
    assert np.max(np.abs(c.energies - big.energies) / big.energies) < 1e-6


def test_converged_curve_reports_cap():
    c = converged_heating_curve(build_params(2.0, 6, 0.464), 100, start_size=32, max_size=64)
    assert not c.converged


def test_energy_scan_matches_single_curves():
    basis = FockBasis(96)
    grid = [0.45, 0.5, 0.55]
    E, L = energy_scan(2.0, 6, grid, 20, basis, workers=2)
    for eta, e in zip(grid, E):
        assert e == heating_curve(build_params(2.0, 6, eta), basis, 20).energies[-1]
    E1, _ = energy_scan(2.0, 6, grid, 20, basis, workers=1)
    assert np.array_equal(E, E1)
