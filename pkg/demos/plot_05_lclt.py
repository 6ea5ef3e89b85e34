"""
Local limit theorem
===================

Rescale the heat kernel to n p_{n^2 t}(0, nx) and compare it with the
Gaussian density over a compact window of (x, t).
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from btmlab import homog
from btmlab.env import sample_environment

env = sample_environment(3.0, (-10, 10), 1)
res = homog.lclt_error(env, [20, 40, 80])
print(res.to_table().to_csv())

xs = np.linspace(-2, 2, 81)
surf = homog.lclt_surface(env, 40, xs, [1.0])[0]
gauss = homog.gaussian_density(xs, 1.0)

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(xs, surf, label="n = 40")
ax.plot(xs, gauss, "k--", label="Gaussian")
ax.set_xlabel("x")
ax.legend()
fig.tight_layout()
fig.savefig("lclt.svg")

# where the error comes from
terms = homog.lclt_decomposition(env, 40, 0.5, 1.0)
print(terms)

# cell volumes concentrate around their mean at rate a^{kappa N}
tab = homog.cell_volume_scan(env, range(8, 15), 2.0, 0.75, 1.0, 0.6)
print(tab.to_csv())
