"""
Heavy-tailed trap landscapes
============================

Sample trap depths, look at their tail, and watch the partial sums
S_n = tau_1 + ... + tau_n grow like n^{1/alpha} when alpha < 1.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from btmlab.env import sample_environment, volume
from btmlab.sums import fluctuation_probe, lil_constants, tail_probe, v_alpha

# a landscape is fixed once its seed is; windows can grow without changing old sites
env = sample_environment(0.5, (-2000, 2000), 1)
print("deepest trap in the window:", env.taps.max())
print("V(0, 100) =", volume(env, 0, 100), "  v_alpha(100) =", v_alpha(100, 0.5))

# empirical tail against u^-alpha
big = sample_environment(0.5, (0, 10**6 - 1), 2)
u = np.geomspace(1, 1e4, 30)
frac = [(big.taps >= x).mean() for x in u]

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].loglog(u, frac, "o", ms=3, label="empirical")
ax[0].loglog(u, u**-0.5, label="u^-1/2")
ax[0].set_xlabel("u")
ax[0].legend()

# lower fluctuations of S_n / v(n log log n) against the liminf constant
tab = fluctuation_probe(0.5, 10**6, 3)
ax[1].semilogx(tab.column("n"), tab.column("low_min"), label="block minima")
ax[1].axhline(lil_constants(0.5).liminf_const, color="k", ls="--", label="pi / 4")
ax[1].set_xlabel("n")
ax[1].legend()
fig.tight_layout()
fig.savefig("landscapes.svg")

# tails of S_n at v(n)/lambda and lambda v(n)
res = tail_probe(0.8, 1000, [2, 4, 8, 16], 10**5, 4)
print(res.to_table().to_csv())
print("upper-tail log-log slope", round(res.slope_up, 3))
