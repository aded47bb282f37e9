"""Quasienergy spectra, level dynamics and avoided crossings.

Quasienergies follow ``U |e_j> = exp(+i phi_j) |e_j>`` with ``phi_j`` in
``(-pi, pi]``. Distances between quasienergies are always circular.

The kicked oscillator's spectrum is organised in tight multiplets (the
symmetry-induced quasienergy bands), whose members can sit only ``~1e-3``
apart while whole bands are separated by ``~1e-2`` or more even at an avoided
crossing. Level tracking therefore works on *bands*: groups of filtered
levels closer than ``merge_gap`` in phase, followed from one ``eta`` to the
next through the overlap of the subspaces they span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from ._parallel import map_ordered
from .exceptions import DomainError, KickHOError, NumericError
from .fock import FloquetOperator, FockBasis, floquet_operator
from .husimi import LOCALIZATION_RADIUS, HusimiGrid, husimi_grid, localization_fraction
from .params import build_params
from .propagation import StateVector, _make_initial

RESIDUAL_TOL = 1e-8
BAND_MERGE_GAP = 1e-2
CONTINUATION_OVERLAP = 0.5
SATURATION_TOL = 1e-6

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def wrap_phase(phi):
    """Map angles into ``(-pi, pi]``."""
    out = np.mod(np.asarray(phi, dtype=float) + math.pi, 2 * math.pi) - math.pi
    out = np.where(out <= -math.pi, out + 2 * math.pi, out)
    return out if out.ndim else float(out)


def circular_distance(a, b):
    d = np.abs(wrap_phase(np.asarray(a) - np.asarray(b)))
    return d if np.ndim(d) else float(d)


def circular_mean(phases, weights=None) -> float:
    phases = np.asarray(phases, dtype=float)
    w = np.ones_like(phases) if weights is None else np.asarray(weights, dtype=float)
    z = np.sum(w * np.exp(1j * phases))
    return float(wrap_phase(np.angle(z)))


@dataclass
class QuasienergySpectrum:
    """Complete eigendecomposition of a Floquet operator.

    ``eigenvectors[:, j]`` belongs to ``phases[j]``; phases are sorted.
    """

    basis: FockBasis
    phases: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    moduli: np.ndarray
    context: dict = field(default_factory=dict)

    def overlaps(self, psi0) -> np.ndarray:
        """``|<e_j|psi0>|^2`` for every eigenstate."""
        amps = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0)
        return np.abs(self.eigenvectors.conj().T @ amps) ** 2

    def orthonormality_defect(self) -> float:
        V = self.eigenvectors
        return float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))))


def _schur_block(M):
    T, Z = linalg.schur(M, output="complex")
    return np.diag(T).copy(), Z


def diagonalize(U, context: dict | None = None, check: bool = True) -> QuasienergySpectrum:
    """Eigenphases and orthonormal eigenvectors of a unitary matrix.

    Uses the complex Schur form, which for a normal matrix is diagonal and
    yields an orthonormal eigenbasis even inside near-degenerate multiplets.
    A :class:`~kickho.fock.FloquetOperator` is decomposed one parity sector
    at a time.

    Raises
    ------
    NumericError
        If LAPACK fails or any eigenpair residual exceeds ``1e-8``.
    """
    if isinstance(U, FloquetOperator):
        p = U.params
        ctx = {"eta": p.eta, "K": p.K, "q": p.q, "N": U.basis.size}
        blocks = U.parity_blocks()
        M = U.matrix
        basis = U.basis
    else:
        M = np.asarray(U, dtype=complex)
        ctx = {"N": M.shape[0]}
        blocks = [(np.arange(M.shape[0]), M)]
        basis = FockBasis(M.shape[0]) if M.shape[0] >= 2 else None
    ctx.update(context or {})
    N = M.shape[0]
    lam = np.empty(N, dtype=complex)
    V = np.zeros((N, N), dtype=complex)
    col = 0
    try:
        for idx, block in blocks:
            w, Z = _schur_block(block)
            k = len(w)
            lam[col : col + k] = w
            V[np.ix_(idx, np.arange(col, col + k))] = Z
            col += k
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError("Schur decomposition failed", ctx) from exc
    residuals = np.linalg.norm(M @ V - V * lam[None, :], axis=0)
    moduli = np.abs(lam)
    if check:
        worst = float(np.max(residuals))
        if worst > RESIDUAL_TOL or np.max(np.abs(moduli - 1)) > RESIDUAL_TOL:
            raise NumericError(
                "eigenpair residual or modulus out of tolerance",
                {**ctx, "max_residual": worst, "max_modulus_defect": float(np.max(np.abs(moduli - 1)))},
            )
    phases = wrap_phase(np.angle(lam))
    order = np.argsort(phases, kind="stable")
    return QuasienergySpectrum(
        basis, phases[order], V[:, order], residuals[order], moduli[order], ctx
    )


@dataclass(frozen=True)
class Level:
    phase: float
    overlap: float
    index: int
    vector: np.ndarray = field(repr=False, compare=False)


def overlap_filter(spec: QuasienergySpectrum, psi0, threshold: float) -> list[Level]:
    """Eigenstates with ``|<e_j|psi0>|^2 >= threshold``, sorted by phase."""
    if not 0 < threshold < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}", "threshold")
    ov = spec.overlaps(psi0)
    keep = np.nonzero(ov >= threshold)[0]
    keep = keep[np.argsort(spec.phases[keep], kind="stable")]
    return [Level(float(spec.phases[j]), float(ov[j]), int(j), spec.eigenvectors[:, j]) for j in keep]


@dataclass
class LevelDynamics:
    """Filtered spectra along an ``eta`` grid.

    ``levels[i]`` is ``None`` where the computation at ``eta_grid[i]`` failed
    (see ``failures``). ``completeness[i]`` is the unfiltered sum of
    overlaps, which must be one.
    """

    eta_grid: np.ndarray
    levels: list
    threshold: float
    psi0: str
    completeness: np.ndarray
    failures: dict = field(default_factory=dict)

    def phases_at(self, i) -> np.ndarray:
        return np.array([lv.phase for lv in self.levels[i] or []])


SpectrumSource = Callable[[float], QuasienergySpectrum]


def floquet_source(K: float, q: int, basis: FockBasis) -> SpectrumSource:
    """``eta -> diagonalize(floquet_operator(K, q, eta))``."""

    def source(eta):
        return diagonalize(floquet_operator(build_params(K, q, eta), basis))

    return source


def sweep_spectra(
    source: SpectrumSource,
    eta_grid,
    psi0,
    threshold: float,
    workers: int = 1,
    psi0_label: str = "",
) -> LevelDynamics:
    """Filtered spectrum at every grid point, failures recorded per point."""
    grid = np.asarray(eta_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise DomainError("eta grid must be a non-empty 1-D sequence", "eta_grid")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("eta grid must be strictly increasing", "eta_grid")
    if not 0 < threshold < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}", "threshold")

    def one(eta):
        try:
            spec = source(float(eta))
        except KickHOError as exc:
            return None, math.nan, str(exc)
        ov = spec.overlaps(psi0)
        return overlap_filter(spec, psi0, threshold), float(ov.sum()), None

    results = map_ordered(one, grid, workers)
    failures = {float(e): r[2] for e, r in zip(grid, results) if r[2] is not None}
    return LevelDynamics(
        grid,
        [r[0] for r in results],
        threshold,
        psi0_label,
        np.array([r[1] for r in results]),
        failures,
    )


def eta_sweep(
    K: float,
    q: int,
    basis: FockBasis,
    eta_grid,
    psi0="vacuum",
    threshold: float = 1e-3,
    workers: int = 1,
) -> LevelDynamics:
    """Overlap-filtered quasienergies of the kicked oscillator along ``eta_grid``."""
    grid = np.asarray(eta_grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError("eta values must be positive", "eta_grid")
    state = _make_initial(psi0, basis)
    label = psi0 if isinstance(psi0, str) else "custom"
    return sweep_spectra(floquet_source(K, q, basis), grid, state, threshold, workers, label)


# -- bands and branches ----------------------------------------------------


@dataclass
class Band:
    """Near-degenerate filtered levels treated as one spectral feature."""

    phase: float
    weight: float
    vectors: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.vectors.shape[1]


def group_bands(levels: Sequence[Level], merge_gap: float = BAND_MERGE_GAP) -> list[Band]:
    """Single-linkage grouping of phase-sorted levels on the circle."""
    if not levels:
        return []
    levels = sorted(levels, key=lambda lv: lv.phase)
    groups = [[levels[0]]]
    for lv in levels[1:]:
        if lv.phase - groups[-1][-1].phase < merge_gap:
            groups[-1].append(lv)
        else:
            groups.append([lv])
    if len(groups) > 1 and (levels[0].phase + 2 * math.pi - levels[-1].phase) < merge_gap:
        groups[0] = groups.pop() + groups[0]
    bands = []
    for g in groups:
        ph = np.array([lv.phase for lv in g])
        w = np.array([lv.overlap for lv in g])
        bands.append(Band(circular_mean(ph, w), float(w.sum()), np.column_stack([lv.vector for lv in g]), ph))
    return sorted(bands, key=lambda b: b.phase)


def subspace_overlap(A: np.ndarray, B: np.ndarray) -> float:
    """``tr(P_A P_B) / min(dim A, dim B)`` for orthonormal column sets."""
    if A.shape[0] != B.shape[0]:
        n = max(A.shape[0], B.shape[0])
        A = np.pad(A, ((0, n - A.shape[0]), (0, 0)))
        B = np.pad(B, ((0, n - B.shape[0]), (0, 0)))
    s = np.sum(np.abs(A.conj().T @ B) ** 2)
    return float(s / min(A.shape[1], B.shape[1]))


@dataclass
class Branch:
    """A band followed continuously over consecutive grid points."""

    id: int
    start: int
    bands: list = field(default_factory=list)
    start_overlap: float = 0.0
    ambiguous: bool = False

    @property
    def indices(self) -> range:
        return range(self.start, self.start + len(self.bands))

    @property
    def stop(self) -> int:
        return self.start + len(self.bands)

    def phases(self) -> np.ndarray:
        return np.array([b.phase for b in self.bands])

    def band_at(self, i) -> Band:
        return self.bands[i - self.start]


def track_bands(
    ld: LevelDynamics,
    merge_gap: float = BAND_MERGE_GAP,
    min_overlap: float = CONTINUATION_OVERLAP,
) -> list[Branch]:
    """Connect bands across the grid by greedy subspace-overlap assignment.

    A band continues a branch from the previous grid point when their
    subspace overlap is at least ``min_overlap``; otherwise it starts a new
    branch. A new branch whose best overlap with the previous point was
    between 0.25 and ``min_overlap`` is marked ``ambiguous``.
    """
    branches: list[Branch] = []
    active: list[tuple[Band, Branch]] = []
    for i, levels in enumerate(ld.levels):
        if levels is None:
            active = []
            continue
        bands = group_bands(levels, merge_gap)
        if not active:
            new_active = []
            for b in bands:
                br = Branch(len(branches), i, [b])
                branches.append(br)
                new_active.append((b, br))
            active = new_active
            continue
        M = np.array([[subspace_overlap(pb.vectors, b.vectors) for b in bands] for pb, _ in active])
        pairs = sorted(
            ((M[a, c], a, c) for a in range(len(active)) for c in range(len(bands))),
            key=lambda t: (-t[0], t[1], t[2]),
        )
        used_prev, used_new = set(), set()
        assign = {}
        for val, a, c in pairs:
            if val < min_overlap:
                break
            if a in used_prev or c in used_new:
                continue
            used_prev.add(a)
            used_new.add(c)
            assign[c] = a
        new_active = []
        for c, b in enumerate(bands):
            if c in assign:
                br = active[assign[c]][1]
                br.bands.append(b)
            else:
                best = float(M[:, c].max()) if M.size else 0.0
                br = Branch(len(branches), i, [b], best, 0.25 <= best < min_overlap)
                branches.append(br)
            new_active.append((b, br))
        active = new_active
    return branches


@dataclass
class AvoidedCrossing:
    eta_center: float
    phase_center: float
    min_gap: float
    branch_ids: tuple[int, int]
    grid_index: int
    refined: bool = True
    converged: bool = True
    degenerate: bool = False
    classification: dict | None = None
    lower_vectors: np.ndarray | None = field(default=None, repr=False)
    upper_vectors: np.ndarray | None = field(default=None, repr=False)


def _match_band(reference: Band, bands: Sequence[Band]):
    if not bands:
        return None, 0.0
    scores = [subspace_overlap(reference.vectors, b.vectors) for b in bands]
    k = int(np.argmax(scores))
    return bands[k], scores[k]


def _pair_gap(source, psi0, threshold, merge_gap, ref_a, ref_b, eta):
    spec = source(eta)
    bands = group_bands(overlap_filter(spec, psi0, threshold), merge_gap)
    a, sa = _match_band(ref_a, bands)
    b, sb = _match_band(ref_b, bands)
    if a is None or b is None:
        return math.inf, None, None
    if a is b:
        return 0.0, a, b
    return circular_distance(a.phase, b.phase), a, b


def _golden_min(f, lo, hi, tol):
    """Golden-section minimisation; returns ``(x, f(x), n_evals)``."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    evals = 2
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
        evals += 1
    x = c if fc <= fd else d
    return x, min(fc, fd), evals


def find_avoided_crossings(
    branches: Sequence[Branch],
    ld: LevelDynamics,
    refine_tol: float = 1e-5,
    source: SpectrumSource | None = None,
    psi0=None,
    merge_gap: float = BAND_MERGE_GAP,
    max_gap: float | None = None,
) -> list[AvoidedCrossing]:
    """Local minima of the phase distance between pairs of branches.

    Each interior minimum on the grid is refined by golden-section search on
    ``eta`` over the two neighbouring grid intervals, re-diagonalising through
    ``source`` and re-identifying the two bands by subspace overlap. Without
    a ``source`` the grid minimum is reported with ``refined=False``.
    ``max_gap`` drops candidates whose grid minimum is wider than that.
    """
    grid = ld.eta_grid
    out = []
    for ia in range(len(branches)):
        for ib in range(ia + 1, len(branches)):
            A, B = branches[ia], branches[ib]
            lo, hi = max(A.start, B.start), min(A.stop, B.stop)
            if hi - lo < 3:
                continue
            d = np.array([circular_distance(A.band_at(i).phase, B.band_at(i).phase) for i in range(lo, hi)])
            for t in range(1, len(d) - 1):
                if not (d[t] < d[t - 1] and d[t] <= d[t + 1]):
                    continue
                if max_gap is not None and d[t] > max_gap:
                    continue
                i = lo + t
                out.append(_refine(A, B, i, d[t], grid, ld, source, psi0, refine_tol, merge_gap))
    out.sort(key=lambda c: (c.eta_center, c.phase_center))
    return out


def _refine(A, B, i, grid_gap, grid, ld, source, psi0, refine_tol, merge_gap):
    ba, bb = A.band_at(i), B.band_at(i)
    lower, upper = (ba, bb) if wrap_phase(bb.phase - ba.phase) > 0 else (bb, ba)
    center_phase = circular_mean([ba.phase, bb.phase])
    base = AvoidedCrossing(
        float(grid[i]), center_phase, float(grid_gap), (A.id, B.id), i,
        refined=False, lower_vectors=lower.vectors, upper_vectors=upper.vectors,
    )
    if source is None or psi0 is None:
        return base
    cache = {}

    def gap(eta):
        if eta not in cache:
            cache[eta] = _pair_gap(source, psi0, ld.threshold, merge_gap, ba, bb, eta)
        return cache[eta][0]

    lo, hi = float(grid[i - 1]), float(grid[i + 1])
    try:
        x, g, _ = _golden_min(gap, lo, hi, refine_tol)
    except KickHOError:
        base.converged = False
        return base
    _, a, b = cache[x]
    # a minimum pinned to the bracket edge means the grid minimum was spurious
    converged = math.isfinite(g) and (x - lo) > refine_tol and (hi - x) > refine_tol and g <= grid_gap
    if a is None or b is None:
        base.converged = False
        return base
    lo_band, up_band = (a, b) if wrap_phase(b.phase - a.phase) >= 0 else (b, a)
    return AvoidedCrossing(
        float(x),
        circular_mean([a.phase, b.phase]),
        float(g),
        (A.id, B.id),
        i,
        refined=True,
        converged=bool(converged),
        degenerate=bool(g < 1e-10),
        lower_vectors=lo_band.vectors,
        upper_vectors=up_band.vectors,
    )


def follow_band(
    source: SpectrumSource,
    vectors: np.ndarray,
    eta_from: float,
    eta_to: float,
    max_step: float = 2.5e-4,
):
    """Adiabatically continue a band's subspace from ``eta_from`` to ``eta_to``.

    At every step the band is replaced by the eigenvectors (of the full,
    unfiltered spectrum) carrying the largest weight in the previous band
    subspace, keeping the band dimension fixed. Returns
    ``(vectors, phases, min_overlap)`` at ``eta_to``; ``min_overlap`` is the
    worst step-to-step subspace overlap seen on the way.
    """
    n_steps = max(1, int(math.ceil(abs(eta_to - eta_from) / max_step)))
    etas = np.linspace(eta_from, eta_to, n_steps + 1)[1:]
    d = vectors.shape[1]
    cur = vectors
    phases = None
    worst = 1.0
    for eta in etas:
        spec = source(float(eta))
        weights = np.sum(np.abs(cur.conj().T @ spec.eigenvectors) ** 2, axis=0)
        pick = np.sort(np.argsort(weights)[::-1][:d])
        worst = min(worst, float(weights[pick].sum() / d))
        cur = spec.eigenvectors[:, pick]
        phases = spec.phases[pick]
    return cur, phases, worst


@dataclass(frozen=True)
class PartnerCharacter:
    """Husimi summary of one crossing partner at one ``eta``."""

    eta: float
    phases: np.ndarray
    localization: float
    mass_beyond: float
    follow_overlap: float


def classify_crossing(
    crossing: AvoidedCrossing,
    source: SpectrumSource,
    etas: Sequence[float],
    grid: HusimiGrid | None = None,
    radius: float = LOCALIZATION_RADIUS,
    outer_radius: float = 3.0,
    max_step: float = 2.5e-4,
) -> dict:
    """Localisation character of both partners on either side of a crossing.

    Each partner band is followed adiabatically from the crossing centre to
    every ``eta`` in ``etas`` and its Husimi function (equal mixture over the
    band) is summarised by the mass inside ``radius`` and beyond
    ``outer_radius``. At every ``eta`` the partner with the larger inner
    mass is labelled ``"localized"`` and the other ``"extended"``; the
    crossing *exchanges* character when the labels swap between the first
    and the last ``eta``. The result is also stored on
    ``crossing.classification``.
    """
    if crossing.lower_vectors is None or crossing.upper_vectors is None:
        raise DomainError("crossing carries no partner vectors", "crossing")
    grid = grid or HusimiGrid.square(20.0, 161)
    out: dict = {"lower": [], "upper": [], "labels": []}
    for eta in etas:
        row = {}
        for name, vecs in (("lower", crossing.lower_vectors), ("upper", crossing.upper_vectors)):
            v, ph, w = follow_band(source, vecs, crossing.eta_center, float(eta), max_step)
            f = husimi_grid(v, grid)
            ch = PartnerCharacter(float(eta), ph, localization_fraction(f, radius), f.mass_beyond(outer_radius), w)
            out[name].append(ch)
            row[name] = ch.localization
        loc = "lower" if row["lower"] >= row["upper"] else "upper"
        out["labels"].append({"localized": loc, "extended": "upper" if loc == "lower" else "lower"})
    labels = out["labels"]
    out["exchanged"] = len(labels) > 1 and labels[0]["localized"] != labels[-1]["localized"]
    crossing.classification = out
    return out


@dataclass
class CrossingPipelineResult:
    level_dynamics: LevelDynamics
    branches: list
    crossings: list


def crossings_pipeline(
    K: float,
    q: int,
    basis: FockBasis,
    eta_grid,
    psi0="vacuum",
    threshold: float = 1e-2,
    refine_tol: float = 1e-5,
    merge_gap: float = BAND_MERGE_GAP,
    max_gap: float | None = None,
    workers: int = 1,
) -> CrossingPipelineResult:
    """Sweep, track and locate avoided crossings in one call."""
    state = _make_initial(psi0, basis)
    ld = eta_sweep(K, q, basis, eta_grid, state, threshold, workers)
    ld.psi0 = psi0 if isinstance(psi0, str) else "custom"
    branches = track_bands(ld, merge_gap)
    crossings = find_avoided_crossings(
        branches, ld, refine_tol, floquet_source(K, q, basis), state, merge_gap, max_gap
    )
    return CrossingPipelineResult(ld, branches, crossings)


# -- basis-size convergence ------------------------------------------------


@dataclass
class ConvergenceReport:
    sizes: list
    drifts: list
    saturated_at: int | None
    matched: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.drifts, self.drifts[1:]))


def convergence_report(
    K: float,
    q: int,
    eta: float,
    sizes: Sequence[int],
    psi0="vacuum",
    threshold: float = 1e-2,
    phase_window: tuple[float, float] | None = None,
    tol: float = SATURATION_TOL,
    merge_gap: float = BAND_MERGE_GAP,
) -> ConvergenceReport:
    """Phase drift of the filtered bands between consecutive basis sizes.

    Filtered levels are grouped into bands; each band at size ``N_a`` is
    matched to the band at the next size ``N_b`` spanning the most similar
    subspace (vectors compared on the common Fock states), and the drift is
    the largest change of a matched band's weighted phase. Members of a
    multiplet reshuffle as the basis grows, so individual eigenvectors are
    not compared. ``phase_window`` restricts the comparison to bands whose
    phase lies in that interval.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError("basis sizes must be increasing", "sizes")
    params = build_params(K, q, eta)
    band_sets = []
    for N in sizes:
        basis = FockBasis(N)
        spec = diagonalize(floquet_operator(params, basis))
        bands = group_bands(overlap_filter(spec, _make_initial(psi0, basis), threshold), merge_gap)
        band_sets.append(bands)
    drifts, matched = [], []
    saturated = None
    for na, ba, bb in zip(sizes, band_sets, band_sets[1:]):
        if phase_window is not None:
            ba = [b for b in ba if phase_window[0] <= b.phase <= phase_window[1]]
        pairs = []
        for band in ba:
            other, score = _match_band(band, bb)
            if other is not None:
                pairs.append((band.phase, other.phase, score))
        drift = max((circular_distance(a, b) for a, b, _ in pairs), default=0.0)
        drifts.append(float(drift))
        matched.append(pairs)
        if saturated is None and drift < tol:
            saturated = na
    return ConvergenceReport(sizes, drifts, saturated, matched)
