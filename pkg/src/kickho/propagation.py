"""Stroboscopic quantum evolution and heating curves.

Energies are ``<a^dagger a> + 1/2`` in units of ``hbar nu``, recorded right
after each full period (kick, then free rotation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.special import gammaln

from ._parallel import map_ordered
from .exceptions import DomainError, InsufficientBasisError, NumericError
from .fock import FloquetOperator, FockBasis, floquet_operator
from .params import SystemParams, build_params

NORM_TOL = 1e-8
LEAKAGE_TOL = 1e-6
DOUBLING_RTOL = 1e-6
TOP_FRACTION = 0.1


@dataclass(frozen=True)
class StateVector:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.size,):
            raise DomainError(
                f"amplitude vector has shape {amps.shape}, basis size is {self.basis.size}"
            )
        object.__setattr__(self, "amplitudes", amps)
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise NumericError("state is not normalised", {"norm": self.norm()})

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: StateVector) -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def padded(self, basis: FockBasis) -> StateVector:
        """The same state embedded in a larger basis."""
        if basis.size < self.basis.size:
            raise DomainError("cannot pad into a smaller basis")
        amps = np.zeros(basis.size, dtype=complex)
        amps[: self.basis.size] = self.amplitudes
        return StateVector(basis, amps)


@dataclass
class HeatingCurve:
    params: SystemParams
    basis: FockBasis
    n_kicks: int
    energies: np.ndarray
    leakage_series: np.ndarray
    converged: bool = True
    doubling_deviation: float | None = None
    notes: list = field(default_factory=list)

    @property
    def max_leakage(self) -> float:
        return float(np.max(self.leakage_series))


def vacuum_state(basis: FockBasis) -> StateVector:
    amps = np.zeros(basis.size, dtype=complex)
    amps[0] = 1.0
    return StateVector(basis, amps)


def fock_state(basis: FockBasis, n: int) -> StateVector:
    if not 0 <= n < basis.size:
        raise DomainError(f"level {n} outside basis of size {basis.size}")
    amps = np.zeros(basis.size, dtype=complex)
    amps[n] = 1.0
    return StateVector(basis, amps)


def center_to_beta(center, eta: float | None = None, coords: str = "scaled") -> complex:
    """Coherent amplitude for a phase-space centre.

    ``coords="scaled"`` reads ``center`` as ``(v/2eta, u/2eta)``, i.e. directly
    as ``(Re beta, Im beta)``; ``coords="vu"`` reads it as ``(v, u)``.
    """
    x1, x2 = center
    if coords == "scaled":
        return complex(x1, x2)
    if coords == "vu":
        if eta is None or eta <= 0:
            raise DomainError("eta > 0 is required for (v, u) centres", "eta")
        return complex(x1, x2) / (2.0 * eta)
    raise DomainError(f"unknown coordinate convention {coords!r}", "coords")


def coherent_amplitudes(beta: complex, size: int) -> np.ndarray:
    """``exp(-|beta|^2/2) beta^n / sqrt(n!)`` for ``n < size``, evaluated in log space."""
    n = np.arange(size)
    r = abs(beta)
    if r == 0:
        amps = np.zeros(size, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1.0)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(beta))


def displaced_vacuum(
    basis: FockBasis, center, eta: float | None = None, coords: str = "scaled"
) -> StateVector:
    """Coherent state centred at ``center``, renormalised after truncation.

    The basis must hold the state to ``1e-8`` in norm; as a rule of thumb
    ``|beta|^2 <= N/4`` suffices for moderate displacements.
    """
    beta = center_to_beta(center, eta, coords)
    amps = coherent_amplitudes(beta, basis.size)
    deficit = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if deficit > NORM_TOL:
        raise InsufficientBasisError(
            f"coherent state with |beta|^2 = {abs(beta) ** 2:.4g} loses {deficit:.3g} "
            f"of its norm in a basis of size {basis.size}"
        )
    return StateVector(basis, amps / np.linalg.norm(amps))


def apply_floquet(state: StateVector, U: FloquetOperator) -> StateVector:
    if U.basis.size != state.basis.size:
        raise DomainError(
            f"dimension mismatch: state has {state.basis.size} levels, operator {U.basis.size}"
        )
    out = U.matrix @ state.amplitudes
    norm = np.linalg.norm(out)
    if abs(norm - state.norm()) > 1e-10:
        raise NumericError("norm not preserved by Floquet step", {"drift": norm - state.norm()})
    return StateVector(state.basis, out)


def _populations(psi):
    return psi.real**2 + psi.imag**2


def mean_excitation(state: StateVector) -> float:
    """``<a^dagger a> + 1/2``: mean energy in units of ``hbar nu``."""
    return float(np.dot(state.basis.n + 0.5, _populations(state.amplitudes)))


def _top_count(size, top_fraction):
    if not 0 < top_fraction < 1:
        raise DomainError(f"top_fraction must lie in (0, 1), got {top_fraction}", "top_fraction")
    return math.ceil(top_fraction * size)


def leakage(state: StateVector, top_fraction: float = TOP_FRACTION) -> float:
    """Population in the highest ``ceil(top_fraction * N)`` Fock levels."""
    m = _top_count(state.basis.size, top_fraction)
    return float(np.sum(state.populations()[-m:]))


def _evolve_observables(U, psi, n_kicks, top):
    levels = np.arange(len(psi)) + 0.5
    energies = np.empty(n_kicks + 1)
    leak = np.empty(n_kicks + 1)
    M = U.matrix
    for i in range(n_kicks + 1):
        pop = _populations(psi)
        energies[i] = np.dot(levels, pop)
        leak[i] = pop[-top:].sum()
        if i < n_kicks:
            psi = M @ psi
    return energies, leak, psi


def heating_curve(
    params: SystemParams,
    basis: FockBasis,
    n_kicks: int,
    initial: StateVector | None = None,
    U: FloquetOperator | None = None,
) -> HeatingCurve:
    """Mean energy and leakage after each of ``n_kicks`` periods.

    The curve is flagged ``converged=False`` as soon as the leakage exceeds
    ``1e-6``; the basis-doubling check is the job of
    :func:`converged_heating_curve`.
    """
    if n_kicks < 0:
        raise DomainError(f"n_kicks must be >= 0, got {n_kicks}", "n_kicks")
    if initial is None:
        initial = vacuum_state(basis)
    if initial.basis.size != basis.size:
        raise DomainError("initial state and basis sizes differ")
    if U is None:
        U = floquet_operator(params, basis)
    top = _top_count(basis.size, TOP_FRACTION)
    energies, leak, psi = _evolve_observables(U, initial.amplitudes, n_kicks, top)
    drift = abs(np.linalg.norm(psi) - initial.norm())
    if drift > NORM_TOL:
        raise NumericError("norm drift during propagation", {"drift": drift, "N": basis.size})
    converged = bool(np.max(leak) < LEAKAGE_TOL)
    notes = [] if converged else [f"leakage reached {np.max(leak):.3g} at N={basis.size}"]
    return HeatingCurve(params, basis, n_kicks, energies, leak, converged, None, notes)


InitialSpec = Union[str, StateVector, Callable[[FockBasis], StateVector]]


def _make_initial(initial: InitialSpec | None, basis: FockBasis) -> StateVector:
    if initial is None or (isinstance(initial, str) and initial == "vacuum"):
        return vacuum_state(basis)
    if isinstance(initial, StateVector):
        return initial.padded(basis) if initial.basis.size < basis.size else initial
    if callable(initial):
        return initial(basis)
    raise DomainError(f"cannot build an initial state from {initial!r}", "initial")


def doubling_deviation(a: HeatingCurve, b: HeatingCurve) -> float:
    """Largest relative change of the energies between two basis sizes."""
    return float(np.max(np.abs(a.energies - b.energies) / np.abs(b.energies)))


def converged_heating_curve(
    params: SystemParams,
    n_kicks: int,
    initial: InitialSpec | None = None,
    start_size: int = 128,
    max_size: int = 2048,
) -> HeatingCurve:
    """Heating curve at the smallest basis passing both convergence checks.

    Starting at ``start_size``, the basis is doubled until the curve keeps
    its leakage below ``1e-6`` at every kick and its energies change by less
    than ``1e-6`` (relative) when the basis is doubled once more. If
    ``max_size`` is reached first, the best curve is returned with
    ``converged=False``.
    """
    size = start_size
    curve = heating_curve(params, FockBasis(size), n_kicks, _make_initial(initial, FockBasis(size)))
    while True:
        if 2 * size > max_size:
            curve.converged = False
            curve.notes.append(f"basis cap {max_size} reached")
            return curve
        bigger = FockBasis(2 * size)
        nxt = heating_curve(params, bigger, n_kicks, _make_initial(initial, bigger))
        if curve.converged:
            dev = doubling_deviation(curve, nxt)
            curve.doubling_deviation = dev
            if dev < DOUBLING_RTOL:
                return curve
        size, curve = 2 * size, nxt


def energy_scan(
    K: float,
    q: int,
    eta_grid,
    n_kicks: int,
    basis: FockBasis,
    initial: InitialSpec | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Energy after ``n_kicks`` periods at every ``eta`` of the grid.

    Returns ``(energies, max_leakage)`` ordered like ``eta_grid``.
    """
    def one(eta):
        p = build_params(K, q, eta)
        c = heating_curve(p, basis, n_kicks, _make_initial(initial, basis))
        return c.energies[-1], c.max_leakage

    res = map_ordered(one, list(eta_grid), workers)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])
