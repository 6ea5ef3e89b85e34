"""
Averaging over landscapes
=========================

Annealed moments of p_t(0,0) and the spread of p_t(0,0) / phi_alpha(t)
across landscapes.  For alpha < 1 a deep trap next to the origin can pull
the ratio far below 1.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from btmlab import homog

mom = homog.annealed_moment(3.0, 1.0, [1e2, 1e3, 1e4], 200, 2)
print(mom.to_csv())

lams = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1e3]
tab = homog.tightness_probe(0.5, [1e3], 500, lams, 3)
print(tab.to_csv())

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.semilogx(tab.column("lambda"), tab.column("coverage"), "o-")
ax.set_xlabel("lambda")
ax.set_ylabel("coverage at t = 1000")
fig.tight_layout()
fig.savefig("tightness.svg")
