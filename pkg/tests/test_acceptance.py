"""Acceptance criteria, each checked at its stated tolerance.

Run under pytest (the PASS/FAIL lines appear in the terminal summary) or
directly with ``python tests/test_acceptance.py``. Criterion 4 dominates
the runtime (about ten minutes on one core).
"""

from __future__ import annotations

import functools
import math
import sys
import time

import numpy as np
import pytest
from scipy import linalg

from kickho.classical import GridSpec, PhasePoint, iterate_trajectory, occupancy_histogram, web_map_step
from kickho.fock import FockBasis, cosine_operator, displacement_matrix, floquet_operator, kick_operator
from kickho.husimi import HusimiGrid
from kickho.params import build_params
from kickho.propagation import apply_floquet, converged_heating_curve, energy_scan, vacuum_state
from kickho.spectral import (
    circular_distance,
    classify_crossing,
    convergence_report,
    crossings_pipeline,
    diagonalize,
    find_avoided_crossings,
    floquet_source,
    sweep_spectra,
    track_bands,
    wrap_phase,
)

K, Q = 2.0, 6
ETA_PEAK, ETA_LEFT, ETA_RIGHT = 0.464, 0.459, 0.469

# spectral settings for criteria 2, 3 and 7
CROSSING_N = 400
CROSSING_WINDOW = (0.44, 0.49)
CROSSING_STEP = 1e-3
CROSSING_THRESHOLD = 1e-2
MAX_GAP = 0.1

# eta scan of criterion 4
SCAN_N = 1024
SCAN_STEP = 0.002
SCAN_KICKS = 600
SCAN_SPECTRAL_N = 512
SCAN_SPECTRAL_STEP = 1e-3


def _line(n, ok, text):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"


# -- shared computations -----------------------------------------------------


@functools.lru_cache(maxsize=None)
def heating_curves():
    return {eta: converged_heating_curve(build_params(K, Q, eta), 100) for eta in (ETA_LEFT, ETA_PEAK, ETA_RIGHT)}


@functools.lru_cache(maxsize=None)
def window_crossings():
    lo, hi = CROSSING_WINDOW
    grid = np.round(np.arange(lo, hi + 1e-9, CROSSING_STEP), 10)
    res = crossings_pipeline(K, Q, FockBasis(CROSSING_N), grid, threshold=CROSSING_THRESHOLD, max_gap=MAX_GAP)
    return res.crossings


def _phase_match(phase, target=1.35, tol=0.1):
    # a global sign flip of the convention is allowed
    return circular_distance(phase, target) < tol or circular_distance(-phase, target) < tol


def target_crossing():
    cands = [
        c for c in window_crossings()
        if ETA_LEFT <= c.eta_center <= ETA_RIGHT and _phase_match(c.phase_center)
    ]
    return cands


# -- criteria ----------------------------------------------------------------


def criterion_1():
    curves = heating_curves()
    e = {eta: c.energies[100] for eta, c in curves.items()}
    ratio = e[ETA_PEAK] / max(e[ETA_LEFT], e[ETA_RIGHT])
    conv = all(c.converged for c in curves.values())
    ok = conv and e[ETA_PEAK] >= 2 * e[ETA_LEFT] and e[ETA_PEAK] >= 2 * e[ETA_RIGHT]
    sizes = {eta: c.basis.size for eta, c in curves.items()}
    text = (
        f"E100(0.459, 0.464, 0.469) = {e[ETA_LEFT]:.4f}, {e[ETA_PEAK]:.4f}, {e[ETA_RIGHT]:.4f}; "
        f"ratio {ratio:.3f} (need >= 2); converged={conv}, N={sizes}"
    )
    return ok, text


def criterion_2():
    cands = target_crossing()
    if len(cands) != 1:
        return False, f"{len(cands)} candidate crossings in the target box (need exactly one)"
    c = cands[0]
    ok = c.refined and c.converged
    return ok, f"eta_center {c.eta_center:.5f}, phase_center {c.phase_center:.4f}, gap {c.min_gap:.4f}, N={CROSSING_N}"


def criterion_3():
    cands = target_crossing()
    if len(cands) != 1:
        return False, "no unique crossing from criterion 2"
    c = cands[0]
    cls = classify_crossing(c, floquet_source(K, Q, FockBasis(CROSSING_N)), [ETA_LEFT, ETA_RIGHT],
                            HusimiGrid.square(20.0, 161))
    parts = []
    extended_ok = True
    for k, eta in enumerate((ETA_LEFT, ETA_RIGHT)):
        ext = cls["labels"][k]["extended"]
        beyond = cls[ext][k].mass_beyond
        extended_ok &= beyond >= 0.2
        parts.append(
            f"eta={eta}: loc(lower)={cls['lower'][k].localization:.3f} loc(upper)={cls['upper'][k].localization:.3f} "
            f"extended={ext} mass(|b|>3)={beyond:.3f}"
        )
    ok = cls["exchanged"] and extended_ok
    return ok, "; ".join(parts) + f"; exchanged={cls['exchanged']}"


def _scan_peaks(grid, E):
    med = float(np.median(E))
    peaks = [i for i in range(1, len(E) - 1) if E[i] > E[i - 1] and E[i] >= E[i + 1] and E[i] > 3 * med]
    return peaks, med


def criterion_4():
    grid = np.round(np.arange(0.40, 0.70 + 1e-9, SCAN_STEP), 10)
    t0 = time.perf_counter()
    E, L = energy_scan(K, Q, grid, SCAN_KICKS, FockBasis(SCAN_N))
    t_scan = time.perf_counter() - t0
    peaks, med = _scan_peaks(grid, E)
    sgrid = np.round(np.arange(0.40, 0.70 + 1e-9, SCAN_SPECTRAL_STEP), 10)
    res = crossings_pipeline(K, Q, FockBasis(SCAN_SPECTRAL_N), sgrid, threshold=1e-2, max_gap=MAX_GAP)
    centers = np.array([c.eta_center for c in res.crossings])
    unmatched = [float(grid[i]) for i in peaks if not np.any(np.abs(centers - grid[i]) <= 0.005)]
    ok = bool(peaks) and not unmatched
    text = (
        f"{len(peaks)} peaks > 3x median ({med:.2f}) at {[float(grid[i]) for i in peaks]}; "
        f"{len(res.crossings)} crossings; unmatched {unmatched}; scan N={SCAN_N} max leakage {L.max():.2e}, "
        f"{t_scan:.0f} s"
    )
    return ok, text


def criterion_5():
    p = build_params(K, Q, ETA_PEAK)
    start = PhasePoint(0.005, 0.005)
    traj = iterate_trajectory(start, p, 40000)
    r2 = traj.v**2 + traj.u**2
    hits = np.nonzero(r2 > (4 * math.pi) ** 2)[0]
    reached = hits.size > 0
    grid = GridSpec.square(60.0, 120)
    h = occupancy_histogram(traj, grid)
    comp = h.largest_component()
    # the channel must connect the origin cell to cells beyond radius 4 pi
    iv0 = np.searchsorted(h.v_edges, 0.0) - 1
    iu0 = np.searchsorted(h.u_edges, 0.0) - 1
    connected = bool(comp[iv0, iu0]) and h.component_extent(comp) > 4 * math.pi
    free = iterate_trajectory(start, build_params(0.0, Q, ETA_PEAK), 40000)
    r_free = np.hypot(free.v, free.u)
    circle_dev = float(np.max(np.abs(r_free - math.hypot(0.005, 0.005))))
    ok = reached and connected and not traj.escaped and circle_dev < 1e-10
    first = int(hits[0]) if reached else None
    return ok, (
        f"first kick beyond 4 pi: {first}; connected channel from origin: {connected} "
        f"(extent {h.component_extent(comp):.1f}); K=0 radius deviation {circle_dev:.1e}"
    )


def _taylor_exp(A, tol=1e-18):
    out = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, 400):
        term = term @ A / k
        out += term
        if np.abs(term).max() < tol:
            break
    return out


def criterion_6():
    t0 = time.perf_counter()
    checks = {}
    rng = np.random.default_rng(2024)
    worst = 0.0
    h = 1e-6
    for _ in range(200):
        p = build_params(rng.uniform(0, 4), int(rng.integers(3, 9)), 0.5)
        v, u = rng.uniform(-20, 20, size=2)
        J = np.empty((2, 2))
        for j, (dv, du) in enumerate(((h, 0), (0, h))):
            a = web_map_step(PhasePoint(v + dv, u + du), p)
            b = web_map_step(PhasePoint(v - dv, u - du), p)
            J[:, j] = ((a.v - b.v) / (2 * h), (a.u - b.u) / (2 * h))
        worst = max(worst, abs(np.linalg.det(J) - 1))
    checks["area"] = (worst < 1e-6, f"|detJ-1|={worst:.1e}")

    p = build_params(K, Q, ETA_PEAK)
    U = floquet_operator(p, FockBasis(300))
    checks["unitarity"] = (U.unitarity_defect() < 1e-10, f"defect={U.unitarity_defect():.1e}")

    psi = vacuum_state(FockBasis(300))
    for _ in range(600):
        psi = apply_floquet(psi, U)
    drift = abs(psi.norm() - 1)
    checks["norm"] = (drift < 1e-8, f"drift={drift:.1e}")

    C = cosine_operator(ETA_PEAK, FockBasis(257)).elements
    m, n = np.indices(C.shape)
    checks["parity"] = (bool(np.all(C[(m - n) % 2 == 1] == 0)), "odd elements zero")

    p0 = build_params(0.0, Q, 0.4)
    spec = diagonalize(floquet_operator(p0, FockBasis(60)))
    k = np.round(-spec.phases / p0.alpha).astype(int) % Q
    dev = float(np.max(circular_distance(spec.phases, wrap_phase(-p0.alpha * k))))
    counts = np.array_equal(np.bincount(k, minlength=Q), np.bincount(np.arange(60) % Q, minlength=Q))
    checks["K0"] = (dev < 1e-12 and counts, f"phase dev={dev:.1e}")

    N = 20
    a = np.diag(np.sqrt(np.arange(1, N + 60)), 1)
    D_ref = _taylor_exp(1j * 0.464 * (a + a.T))[:N, :N]
    d_err = float(np.max(np.abs(displacement_matrix(0.464, FockBasis(N)) - D_ref)))
    checks["displacement"] = (d_err < 1e-8, f"err={d_err:.1e}")

    C16 = cosine_operator(0.3, FockBasis(16))
    k_err = float(np.max(np.abs(kick_operator(1.0, C16) - linalg.expm(-1j * C16.elements))))
    checks["kick"] = (k_err < 1e-10, f"err={k_err:.1e}")

    eta0, gap = 0.5137, 0.2

    def lz(eta):
        d = 1.3 * (eta - eta0)
        return diagonalize(linalg.expm(-1j * np.array([[d + 0.3, gap / 2], [gap / 2, -d + 0.3]])))

    psi0 = np.array([1, 1j]) / math.sqrt(2)
    ld = sweep_spectra(lz, np.linspace(0.3, 0.7, 41), psi0, 1e-2)
    cs = find_avoided_crossings(track_bands(ld), ld, 1e-7, lz, psi0)
    lz_ok = len(cs) == 1 and abs(cs[0].eta_center - eta0) / eta0 < 0.01 and abs(cs[0].min_gap - gap) / gap < 0.01
    checks["landau-zener"] = (lz_ok, f"{[(round(c.eta_center, 5), round(c.min_gap, 5)) for c in cs]}")

    elapsed = time.perf_counter() - t0
    ok = all(v[0] for v in checks.values()) and elapsed < 60
    detail = ", ".join(f"{k}:{'ok' if v[0] else 'FAIL'}({v[1]})" for k, v in checks.items())
    return ok, f"{detail}; {elapsed:.1f} s"


def criterion_7():
    cands = target_crossing()
    if len(cands) != 1:
        return False, "no unique crossing from criterion 2"
    c = cands[0]
    half = max(0.05, c.min_gap)
    window = (c.phase_center - half, c.phase_center + half)
    # evaluated at the crossing's nominal location; the refined centre is reported alongside
    rep = convergence_report(K, Q, ETA_PEAK, [200, 300, 400], phase_window=window)
    alt = convergence_report(K, Q, round(c.eta_center, 4), [200, 300, 400], phase_window=window)
    curves = heating_curves()
    doubling = {eta: cv.doubling_deviation for eta, cv in curves.items()}
    doubling_ok = all(cv.converged and cv.doubling_deviation < 1e-6 for cv in curves.values())
    ok = rep.drifts[1] < rep.drifts[0] and doubling_ok
    return ok, (
        f"pair drift at eta={ETA_PEAK}: 200->300 {rep.drifts[0]:.2e}, 300->400 {rep.drifts[1]:.2e} "
        f"(at refined centre {round(c.eta_center, 4)}: {alt.drifts[0]:.2e}, {alt.drifts[1]:.2e}); "
        f"heating doubling deviations {', '.join(f'{e}: {d:.1e}' for e, d in doubling.items())}"
    )


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 8))
def test_criterion(number, acceptance_report):
    ok, text = CRITERIA[number - 1]()
    acceptance_report(_line(number, ok, text))
    assert ok, text


def main():
    failed = 0
    for n, fn in enumerate(CRITERIA, 1):
        ok, text = fn()
        failed += not ok
        print(_line(n, ok, text), flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
