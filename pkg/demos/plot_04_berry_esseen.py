"""
Kolmogorov distance to the Gaussian
===================================

For alpha > 2 the rescaled position X_t / (sigma sqrt t) approaches a
standard normal.  At desk scale we see the trend, not the rate.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from btmlab import homog
from btmlab.env import sample_environment

times = [25, 100, 400, 1600]
res = homog.berry_esseen(homog.QUENCHED, 3.0, times, 10**5, 1)
ctrl = homog.berry_esseen(homog.QUENCHED, float("inf"), times, 10**5, 1)
print(res.to_table().to_csv())

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.loglog(times, res.D, "o-", label="alpha = 3")
ax.loglog(times, ctrl.D, "s-", label="tau = 1")
ax.axhline(res.noise_floor, color="k", ls=":", label="M^-1/2")
ax.set_xlabel("t")
ax.set_ylabel("D(t)")
ax.legend()
fig.tight_layout()
fig.savefig("berry_esseen.svg")

qv = homog.qv_error(sample_environment(3.0, (-300, 300), 1), [10, 100, 1000], 4000, 2)
print("quadratic variation error", qv.estimate, "fitted exponent", round(qv.exponent, 3))
sc = homog.scenery_error(homog.ANNEALED, 3.0, [1e2, 1e3, 1e4], 5000, 3)
print("annealed scenery error exponent", round(sc.exponent, 3))
