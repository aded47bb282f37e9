"""Reduced parameters of the kicked harmonic oscillator.

The classical phase space of the kicked oscillator depends only on the
stochasticity parameter ``K`` and on the ratio ``alpha = nu * tau = 2 pi / q``.
The quantum problem adds the Lamb-Dicke parameter ``eta``, whose square acts
as an effective Planck constant; the quantum kick strength is
``ktilde = K / (2 eta**2)``.

Scaled coordinates used throughout the package are ``v = k x`` and
``u = k p / (m nu)``, so that ``v = eta (a + a^dagger)`` and
``a = (v + i u) / (2 eta)``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

from .exceptions import DomainError, NonResonantError

#: Values of q for which the stochastic web has crystal (periodic) symmetry.
CRYSTAL_Q = frozenset({3, 4, 6})

RESONANCE_RTOL = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """Reduced parameter set fixing both the classical map and the quantum Floquet operator.

    Only ``K``, ``q`` and ``eta`` are stored; ``alpha`` and ``ktilde`` are
    recomputed on access so they cannot drift from their definitions.
    """

    K: float
    q: int
    eta: float

    def __post_init__(self):
        _check_params(self.K, self.q, self.eta)

    @property
    def alpha(self) -> float:
        return 2.0 * math.pi / self.q

    @property
    def ktilde(self) -> float:
        return self.K / (2.0 * self.eta**2)

    @property
    def crystal(self) -> bool:
        return self.q in CRYSTAL_Q

    @property
    def quasicrystal(self) -> bool:
        return not self.crystal

    def with_eta(self, eta: float) -> SystemParams:
        return SystemParams(self.K, self.q, eta)

    def as_dict(self) -> dict:
        return {
            "K": self.K,
            "q": self.q,
            "eta": self.eta,
            "alpha": self.alpha,
            "ktilde": self.ktilde,
        }


@dataclass(frozen=True)
class PhysicalParams:
    """Trap and kick quantities in one consistent (caller-chosen) unit system.

    Attributes
    ----------
    m : particle mass
    nu : trap angular frequency
    tau : kick period
    k : wave vector of the kicking potential
    A : depth of the kicking potential
    hbar : Planck constant in the same units
    """

    m: float
    nu: float
    tau: float
    k: float
    A: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "nu", "tau", "k", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be strictly positive, got {value!r}", name)
        # A = 0 is the unkicked oscillator, kept for analytic checks
        if not (math.isfinite(self.A) and self.A >= 0):
            raise DomainError(f"A must be non-negative, got {self.A!r}", "A")


def _check_params(K, q, eta):
    if isinstance(q, bool) or not isinstance(q, numbers.Integral):
        raise DomainError(f"q must be an integer, got {q!r}", "q")
    if q < 3:
        raise DomainError(f"q must be >= 3, got {q}", "q")
    if not (isinstance(K, numbers.Real) and math.isfinite(K) and K >= 0):
        raise DomainError(f"K must be a finite non-negative number, got {K!r}", "K")
    if not (isinstance(eta, numbers.Real) and math.isfinite(eta) and eta > 0):
        raise DomainError(f"eta must be a finite positive number, got {eta!r}", "eta")


def build_params(K: float, q: int, eta: float) -> SystemParams:
    """Validate and bundle the reduced parameters.

    ``q`` may be given as an integral float (``6.0``); anything else that is
    not an integer is rejected.

    >>> p = build_params(2.0, 6, 0.464)
    >>> round(p.ktilde, 4)
    4.6448
    """
    if isinstance(q, float) and q.is_integer():
        q = int(q)
    _check_params(K, q, eta)
    return SystemParams(float(K), q, float(eta))


def params_from_physical(p: PhysicalParams) -> SystemParams:
    """Map trap quantities onto ``(K, q, eta)``.

    Raises
    ------
    NonResonantError
        If ``2 pi / (nu tau)`` is not an integer to within ``1e-9`` relative.
    """
    ratio = 2.0 * math.pi / (p.nu * p.tau)
    q = round(ratio)
    if q < 1 or abs(ratio - q) > RESONANCE_RTOL * ratio:
        raise NonResonantError(
            f"2*pi/(nu*tau) = {ratio!r} is not an integer; the web requires integer q", "tau"
        )
    K = p.A * p.k**2 / (p.m * p.nu)
    eta = p.k * math.sqrt(p.hbar / (2.0 * p.m * p.nu))
    return build_params(K, q, eta)
