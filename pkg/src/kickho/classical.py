"""Classical stochastic-web map of the kicked harmonic oscillator.

One period is a kick followed by a harmonic rotation by ``alpha``::

    u1 = u + K sin(v)
    v' =  v cos(alpha) + u1 sin(alpha)
    u' = -v sin(alpha) + u1 cos(alpha)

This is the classical counterpart of the Floquet operator
``exp(-i alpha n) exp(-i ktilde cos(eta (a + a^dagger)))`` read right to left.
Energies are reported in units of ``hbar nu`` as ``(v**2 + u**2) / (4 eta**2)``
so classical and quantum heating curves share one axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .exceptions import DomainError
from .params import SystemParams


@dataclass(frozen=True)
class PhasePoint:
    v: float
    u: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.u)):
            raise DomainError(f"phase point must be finite, got ({self.v}, {self.u})")

    def __iter__(self):
        yield self.v
        yield self.u


@dataclass(frozen=True)
class Trajectory:
    """Orbit of the web map; ``v[i], u[i]`` is the state after ``i`` kicks.

    If the orbit overflowed, ``escaped`` is set and the arrays stop at
    ``last_finite`` (inclusive).
    """

    v: np.ndarray
    u: np.ndarray
    escaped: bool = False
    last_finite: int | None = None

    def __len__(self):
        return len(self.v)

    def __getitem__(self, i):
        return PhasePoint(float(self.v[i]), float(self.u[i]))

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.v, self.u)]


@dataclass(frozen=True)
class Ensemble:
    v: np.ndarray
    u: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if len(self.v) == 0 or len(self.v) != len(self.u):
            raise DomainError("ensemble must be non-empty with matching coordinate arrays")

    def __len__(self):
        return len(self.v)

    @property
    def points(self) -> list[PhasePoint]:
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.v, self.u)]


@dataclass(frozen=True)
class ClassicalHeatingCurve:
    params: SystemParams
    energies: np.ndarray
    n_escaped: int = 0


@dataclass(frozen=True)
class GridSpec:
    v_range: tuple[float, float]
    u_range: tuple[float, float]
    nv: int
    nu: int

    def __post_init__(self):
        bounds = (*self.v_range, *self.u_range)
        if not all(math.isfinite(b) for b in bounds):
            raise DomainError("grid bounds must be finite")
        if self.v_range[0] >= self.v_range[1] or self.u_range[0] >= self.u_range[1]:
            raise DomainError("grid ranges must be increasing")
        if self.nv < 1 or self.nu < 1:
            raise DomainError("bin counts must be >= 1")

    @classmethod
    def square(cls, half_width: float, bins: int) -> GridSpec:
        return cls((-half_width, half_width), (-half_width, half_width), bins, bins)


@dataclass
class OccupancyHistogram:
    """Counts of trajectory points per phase-space cell.

    ``counts[i, j]`` is the number of points with ``v`` in bin ``i`` and
    ``u`` in bin ``j``. Points outside the grid go to ``overflow``.
    """

    grid: GridSpec
    counts: np.ndarray
    overflow: int = 0
    v_edges: np.ndarray = field(default=None, repr=False)
    u_edges: np.ndarray = field(default=None, repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    def occupied(self) -> np.ndarray:
        return self.counts > 0

    def largest_component(self) -> np.ndarray:
        """Boolean mask of the largest 8-connected cluster of occupied cells."""
        labels, n = ndimage.label(self.occupied(), structure=np.ones((3, 3), dtype=int))
        if n == 0:
            return np.zeros_like(self.counts, dtype=bool)
        sizes = np.bincount(labels.ravel())[1:]
        return labels == (np.argmax(sizes) + 1)

    def component_extent(self, mask=None) -> float:
        """Largest ``max(|v|, |u|)`` of any cell centre in ``mask``."""
        if mask is None:
            mask = self.largest_component()
        vc = 0.5 * (self.v_edges[:-1] + self.v_edges[1:])
        uc = 0.5 * (self.u_edges[:-1] + self.u_edges[1:])
        iv, iu = np.nonzero(mask)
        if len(iv) == 0:
            return 0.0
        return float(np.max(np.maximum(np.abs(vc[iv]), np.abs(uc[iu]))))


def _step_arrays(v, u, K, ca, sa):
    u1 = u + K * np.sin(v)
    return v * ca + u1 * sa, -v * sa + u1 * ca


def web_map_step(pt: PhasePoint, params: SystemParams) -> PhasePoint:
    """One kick followed by one harmonic rotation."""
    ca, sa = math.cos(params.alpha), math.sin(params.alpha)
    u1 = pt.u + params.K * math.sin(pt.v)
    return PhasePoint(pt.v * ca + u1 * sa, -pt.v * sa + u1 * ca)


def iterate_trajectory(pt: PhasePoint, params: SystemParams, n_kicks: int) -> Trajectory:
    if n_kicks < 0:
        raise DomainError(f"n_kicks must be >= 0, got {n_kicks}", "n_kicks")
    K = params.K
    ca, sa = math.cos(params.alpha), math.sin(params.alpha)
    sin = math.sin
    vs = np.empty(n_kicks + 1)
    us = np.empty(n_kicks + 1)
    v, u = float(pt.v), float(pt.u)
    vs[0], us[0] = v, u
    for i in range(1, n_kicks + 1):
        try:
            u1 = u + K * sin(v)
            v, u = v * ca + u1 * sa, -v * sa + u1 * ca
        except (OverflowError, ValueError):
            v = u = math.inf
        if not (math.isfinite(v) and math.isfinite(u)):
            return Trajectory(vs[:i].copy(), us[:i].copy(), escaped=True, last_finite=i - 1)
        vs[i], us[i] = v, u
    return Trajectory(vs, us)


def sample_vacuum_ensemble(eta: float, size: int, seed: int) -> Ensemble:
    """Gaussian cloud with the second moments of the oscillator ground state.

    ``<v^2> = <u^2> = eta^2``, so the mean scaled energy is 1/2.
    """
    if size < 1:
        raise DomainError(f"ensemble size must be >= 1, got {size}", "size")
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}", "eta")
    rng = np.random.default_rng(seed)
    v, u = rng.normal(0.0, eta, size=(2, size))
    return Ensemble(v, u, seed)


def scaled_energy(pt, eta: float):
    """Oscillator energy in units of ``hbar nu``: ``(v^2 + u^2) / (4 eta^2)``.

    Accepts a :class:`PhasePoint` or anything with ``v`` and ``u`` arrays.
    """
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}", "eta")
    return (np.square(pt.v) + np.square(pt.u)) / (4.0 * eta**2)


def ensemble_heating_curve(e: Ensemble, params: SystemParams, n_kicks: int) -> ClassicalHeatingCurve:
    """Mean scaled energy of the ensemble after each map step.

    Members whose coordinates overflow are dropped from all later means and
    counted in ``n_escaped``.
    """
    if n_kicks < 0:
        raise DomainError(f"n_kicks must be >= 0, got {n_kicks}", "n_kicks")
    ca, sa = math.cos(params.alpha), math.sin(params.alpha)
    scale = 1.0 / (4.0 * params.eta**2)
    v = np.array(e.v, dtype=float)
    u = np.array(e.u, dtype=float)
    energies = np.empty(n_kicks + 1)
    energies[0] = np.mean(v * v + u * u) * scale
    n_escaped = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_kicks + 1):
            v, u = _step_arrays(v, u, params.K, ca, sa)
            ok = np.isfinite(v) & np.isfinite(u)
            if not ok.all():
                n_escaped += int((~ok).sum())
                v, u = v[ok], u[ok]
            energies[i] = np.mean(v * v + u * u) * scale if len(v) else np.nan
    return ClassicalHeatingCurve(params, energies, n_escaped)


def occupancy_histogram(traj, grid: GridSpec) -> OccupancyHistogram:
    v = np.asarray(traj.v if hasattr(traj, "v") else [p.v for p in traj], dtype=float)
    u = np.asarray(traj.u if hasattr(traj, "u") else [p.u for p in traj], dtype=float)
    v_edges = np.linspace(*grid.v_range, grid.nv + 1)
    u_edges = np.linspace(*grid.u_range, grid.nu + 1)
    counts, _, _ = np.histogram2d(v, u, bins=(v_edges, u_edges))
    counts = counts.astype(np.int64)
    overflow = len(v) - int(counts.sum())
    return OccupancyHistogram(grid, counts, overflow, v_edges, u_edges)
