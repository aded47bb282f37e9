# Energy after 600 kicks as a function of eta, next to the avoided crossings.
#
# Resonant tunnelling into the web appears as sharp peaks of the absorbed
# energy. The scan and the spectral pipeline are independent computations;
# peaks that sit on an avoided crossing are marked.
# Full resolution (N=1024, step 0.002) takes several minutes on one core;
# set KICKHO_THREADS to use more.

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kickho._parallel import default_workers
from kickho.fock import FockBasis
from kickho.propagation import energy_scan
from kickho.spectral import crossings_pipeline

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

workers = default_workers()
grid = np.round(np.arange(0.40, 0.70 + 1e-9, 0.002), 6)
E, L = energy_scan(2.0, 6, grid, 600, FockBasis(1024), workers=workers)
print("largest leakage in the scan:", L.max())

med = np.median(E)
peaks = [i for i in range(1, len(E) - 1) if E[i] > E[i - 1] and E[i] >= E[i + 1] and E[i] > 3 * med]

sgrid = np.round(np.arange(0.40, 0.70 + 1e-9, 1e-3), 6)
res = crossings_pipeline(2.0, 6, FockBasis(512), sgrid, threshold=1e-2, max_gap=0.1, workers=workers)
centers = np.array([c.eta_center for c in res.crossings])
for i in peaks:
    near = centers[np.abs(centers - grid[i]) <= 0.005]
    print(f"peak at eta={grid[i]:.3f} E={E[i]:.1f}: crossings nearby {np.round(near, 4)}")

fig, ax = plt.subplots(figsize=(8, 4.5))
ax.plot(grid, E, "k-")
ax.axhline(3 * med, color="gray", ls=":")
for x in centers:
    ax.axvline(x, color="r", alpha=0.3)
ax.set_xlabel("eta")
ax.set_ylabel("energy after 600 kicks")
fig.savefig(os.path.join(OUT, "eta_scan.png"), dpi=120)
