# Quasienergy level dynamics and the avoided crossing at eta ~ 0.464.
#
# The Floquet operator is diagonalised on a grid of eta values. Only eigenstates
# with a noticeable overlap with the ground state are kept, since only those
# matter for its dynamics. Levels come in tight multiplets (bands); they are
# followed by subspace overlap and avoided crossings show up as local minima of
# the gap between two followed bands.

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kickho.fock import FockBasis
from kickho.spectral import crossings_pipeline, eta_sweep

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

basis = FockBasis(400)
grid = np.round(np.arange(0.44, 0.49 + 1e-9, 1e-3), 6)

ld = eta_sweep(2.0, 6, basis, grid, threshold=1e-3)
print("worst completeness defect:", np.nanmax(np.abs(ld.completeness - 1)))

res = crossings_pipeline(2.0, 6, basis, grid, threshold=1e-2, max_gap=0.1)
print(len(res.branches), "branches")
for c in res.crossings:
    print(f"  crossing at eta={c.eta_center:.5f} phase={c.phase_center:.4f} gap={c.min_gap:.4f}")

fig, ax = plt.subplots(figsize=(7, 5))
for eta, levels in zip(ld.eta_grid, ld.levels):
    ph = [lv.phase for lv in levels]
    ov = np.array([lv.overlap for lv in levels])
    ax.scatter([eta] * len(ph), ph, s=2 + 100 * ov, c="k")
for c in res.crossings:
    ax.plot(c.eta_center, c.phase_center, "ro", mfc="none", ms=12)
ax.set_xlabel("eta")
ax.set_ylabel("quasienergy phase")
fig.savefig(os.path.join(OUT, "level_dynamics.png"), dpi=120)
