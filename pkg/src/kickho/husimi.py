"""Husimi Q functions on phase-space grids.

Grid coordinates are ``(x1, x2) = (v / 2eta, u / 2eta) = (Re beta, Im beta)``,
and ``Q(beta) = |<beta|psi>|^2 / pi`` integrates to one over the plane.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError
from .propagation import StateVector

#: Disc radius used to call a state localised near the origin.
LOCALIZATION_RADIUS = 1.5
LOCALIZED_THRESHOLD = 0.5


@dataclass(frozen=True)
class HusimiGrid:
    x1_range: tuple[float, float]
    x2_range: tuple[float, float]
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise DomainError("a Husimi grid needs at least 2 nodes per axis")
        if self.x1_range[0] >= self.x1_range[1] or self.x2_range[0] >= self.x2_range[1]:
            raise DomainError("grid ranges must be increasing")

    @classmethod
    def square(cls, half_width: float, nodes: int) -> HusimiGrid:
        return cls((-half_width, half_width), (-half_width, half_width), nodes, nodes)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(*self.x1_range, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(*self.x2_range, self.n2)

    @property
    def cell_area(self) -> float:
        d1 = (self.x1_range[1] - self.x1_range[0]) / (self.n1 - 1)
        d2 = (self.x2_range[1] - self.x2_range[0]) / (self.n2 - 1)
        return d1 * d2


@dataclass(frozen=True)
class HusimiField:
    """``values[i, j]`` is ``Q`` at ``beta = x1[i] + 1j * x2[j]``."""

    grid: HusimiGrid
    values: np.ndarray

    @property
    def x1(self):
        return self.grid.x1

    @property
    def x2(self):
        return self.grid.x2

    def total_mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def argmax(self) -> complex:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return complex(self.x1[i], self.x2[j])

    def radii(self) -> np.ndarray:
        return np.hypot(self.x1[:, None], self.x2[None, :])

    def mass_beyond(self, radius: float) -> float:
        """Fraction of the grid's Q mass at ``|beta| > radius``."""
        return 1.0 - localization_fraction(self, radius, check_coverage=False)


def _coherent_rows(betas, size):
    """Rows of ``conj(<n|beta>)``; evaluated in log space for large ``|beta|``."""
    betas = np.asarray(betas, dtype=complex).ravel()
    n = np.arange(size)
    r = np.abs(betas)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        n_logr = np.where(n[None, :] == 0, 0.0, n[None, :] * logr)
    log_mag = -0.5 * r * r + n_logr - 0.5 * gammaln(n + 1.0)[None, :]
    phase = np.exp(-1j * np.angle(betas)[:, None] * n[None, :])
    return np.exp(log_mag) * phase


def _warn_reach(beta_max_sq, size):
    if beta_max_sq > size / 4:
        warnings.warn(
            f"|beta|^2 = {beta_max_sq:.3g} exceeds N/4 = {size / 4:.3g}; "
            "coherent overlaps near the basis edge are unreliable",
            stacklevel=3,
        )


def coherent_overlap(state: StateVector, beta: complex) -> complex:
    """``<beta|psi>``."""
    _warn_reach(abs(beta) ** 2, state.basis.size)
    row = _coherent_rows([beta], state.basis.size)[0]
    return complex(row @ state.amplitudes)


def _as_columns(state):
    if isinstance(state, StateVector):
        return state.amplitudes[:, None]
    cols = np.asarray(state, dtype=complex)
    return cols[:, None] if cols.ndim == 1 else cols


def husimi_grid(state, grid: HusimiGrid, chunk: int = 4096) -> HusimiField:
    """Evaluate ``Q`` on every grid node.

    ``state`` is a :class:`StateVector`, a plain amplitude vector, or an
    ``N x d`` array of orthonormal columns; in the last case the result is
    the Q function of the equal mixture of the columns (used for
    near-degenerate multiplets).
    """
    cols = _as_columns(state)
    size, d = cols.shape
    B = grid.x1[:, None] + 1j * grid.x2[None, :]
    flat = B.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, chunk):
        rows = _coherent_rows(flat[start : start + chunk], size)
        amp = rows @ cols
        out[start : start + chunk] = np.sum(np.abs(amp) ** 2, axis=1) / (d * math.pi)
    return HusimiField(grid, out.reshape(B.shape))


def localization_fraction(field: HusimiField, radius: float, check_coverage: bool = True) -> float:
    """Share of the field's mass inside the disc ``|beta| <= radius``."""
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}", "radius")
    g = field.grid
    if check_coverage and (
        -radius < g.x1_range[0] or radius > g.x1_range[1] or -radius < g.x2_range[0] or radius > g.x2_range[1]
    ):
        raise DomainError(f"disc of radius {radius} is not covered by the grid", "radius")
    total = field.values.sum()
    if total <= 0:
        return 0.0
    inside = field.values[field.radii() <= radius].sum()
    return float(inside / total)


def is_localized(field: HusimiField, radius: float = LOCALIZATION_RADIUS,
                 threshold: float = LOCALIZED_THRESHOLD) -> bool:
    return localization_fraction(field, radius) > threshold
