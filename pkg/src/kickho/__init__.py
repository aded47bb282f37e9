"""Kicked harmonic oscillator: stochastic webs, Floquet spectra and web-assisted tunneling."""

__version__ = "0.1.0"

from .exceptions import (
    DomainError,
    InsufficientBasisError,
    KickHOError,
    NonResonantError,
    NumericError,
)
from .params import PhysicalParams, SystemParams, build_params, params_from_physical

__all__ = [
    "__version__",
    "DomainError",
    "InsufficientBasisError",
    "KickHOError",
    "NonResonantError",
    "NumericError",
    "PhysicalParams",
    "SystemParams",
    "build_params",
    "params_from_physical",
]
