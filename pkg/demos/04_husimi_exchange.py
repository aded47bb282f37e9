# Husimi functions of the two crossing partners on either side of the crossing.
#
# Each partner band is followed adiabatically from the crossing centre to
# eta = 0.459 and eta = 0.469. Away from the crossing one partner keeps more
# weight near the hyperbolic point at the origin while the other lives on the
# web; across the crossing they swap.

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kickho.fock import FockBasis
from kickho.husimi import HusimiGrid, husimi_grid
from kickho.spectral import classify_crossing, crossings_pipeline, floquet_source, follow_band

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

basis = FockBasis(400)
grid = np.round(np.arange(0.455, 0.4725, 5e-4), 6)
res = crossings_pipeline(2.0, 6, basis, grid, threshold=1e-2, max_gap=0.1)
c = min(res.crossings, key=lambda c: abs(c.phase_center - 1.35) + abs(c.eta_center - 0.464))
print(f"crossing: eta={c.eta_center:.5f} phase={c.phase_center:.4f} gap={c.min_gap:.4f}")

source = floquet_source(2.0, 6, basis)
cls = classify_crossing(c, source, [0.459, 0.469])
for k, eta in enumerate((0.459, 0.469)):
    for name in ("lower", "upper"):
        ch = cls[name][k]
        print(f"eta={eta} {name}: inside r=1.5 {ch.localization:.3f}, beyond r=3 {ch.mass_beyond:.3f}")
print("exchanged:", cls["exchanged"])

hg = HusimiGrid.square(20.0, 161)
fig, axes = plt.subplots(2, 2, figsize=(9, 9))
for col, eta in enumerate((0.459, 0.469)):
    for row, (name, vecs) in enumerate((("upper", c.upper_vectors), ("lower", c.lower_vectors))):
        v, ph, _ = follow_band(source, vecs, c.eta_center, eta)
        Q = husimi_grid(v, hg).values
        ax = axes[row, col]
        ax.imshow(Q.T, origin="lower", extent=(-20, 20, -20, 20), cmap="viridis")
        ax.set_title(f"{name}, eta={eta}, phase={np.mean(ph):.3f}")
        ax.set_xlabel("v / 2 eta")
        ax.set_ylabel("u / 2 eta")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "husimi_exchange.png"), dpi=120)
