# The classical kicked oscillator at a q = 6 resonance.
#
# Between kicks the particle just rotates in phase space by alpha = 2 pi / q;
# each kick adds K sin(v) to the momentum. For crystal symmetries (q = 3, 4, 6)
# the separatrices of the resonance join into an infinite "stochastic web"
# along which a trajectory can wander arbitrarily far from the origin.

import math
import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kickho.classical import (
    GridSpec,
    PhasePoint,
    ensemble_heating_curve,
    iterate_trajectory,
    occupancy_histogram,
    sample_vacuum_ensemble,
)
from kickho.params import build_params

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

p = build_params(2.0, 6, 0.464)
print(p)

# A single orbit started right next to the hyperbolic point at the origin.
traj = iterate_trajectory(PhasePoint(0.005, 0.005), p, 40_000)
r = np.hypot(traj.v, traj.u)
print("largest radius reached:", r.max(), " (4 pi =", 4 * math.pi, ")")
print("first kick beyond 4 pi:", np.argmax(r > 4 * math.pi))

# Without the kick the same point just goes round its circle.
free = iterate_trajectory(PhasePoint(0.005, 0.005), build_params(0.0, 6, 0.464), 40_000)
print("K=0 radius spread:", np.ptp(np.hypot(free.v, free.u)))

# Binning the orbit shows the channels of the web. The largest connected
# cluster of visited cells is the web itself.
h = occupancy_histogram(traj, GridSpec.square(60.0, 120))
print("cells visited:", h.occupied().sum(), " extent of main channel:", h.component_extent())

fig, ax = plt.subplots(1, 2, figsize=(11, 5))
ax[0].plot(traj.v, traj.u, ",", color="k")
ax[0].set_aspect("equal")
ax[0].set_xlabel("v")
ax[0].set_ylabel("u")
ax[0].set_title("40000 kicks, K=2, q=6")
ax[1].imshow(np.log1p(h.counts.T), origin="lower", extent=(-60, 60, -60, 60), cmap="magma")
ax[1].set_title("log occupancy")
fig.savefig(os.path.join(OUT, "web.png"), dpi=120)

# Classical heating of a vacuum-like Gaussian cloud: (v^2 + u^2)/(4 eta^2) is
# the classical counterpart of <n> + 1/2.
ens = sample_vacuum_ensemble(p.eta, 20_000, seed=1)
curve = ensemble_heating_curve(ens, p, 100)
print("classical energy after 0, 10, 100 kicks:", curve.energies[[0, 10, 100]])
