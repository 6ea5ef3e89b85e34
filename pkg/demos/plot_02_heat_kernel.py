"""
Exact heat kernels
==================

Transition probabilities by uniformization, checked against the Bessel
formula for the homogeneous walk, then the on-diagonal decay in a random
landscape and the two-sided bounds in terms of ball volumes.
"""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy.special import ive

from btmlab.env import constant_environment, sample_environment
from btmlab.kernel import (
    build_generator,
    check_diagonal_bounds,
    expected_exit_time,
    green_closed_form,
    green_function,
    ondiagonal,
    transition_row,
)

flat = constant_environment(-400, 400)
gen = build_generator(flat, (-400, 400))
for t in (1.0, 5.0, 10.0):
    p = transition_row(gen, 0, t).prob(0)
    print(f"t={t:5}: kernel {p:.12f}  bessel {ive(0, t):.12f}")

# on-diagonal decay: t^-1/2 for alpha > 1, t^-1/(1+alpha) for alpha < 1
ts = np.geomspace(1, 1e4, 25)
fig, ax = plt.subplots(figsize=(5, 3.5))
for alpha in (3.0, 0.5):
    env = sample_environment(alpha, (-10, 10), 7)
    ax.loglog(ts, ondiagonal(env, 0, ts), label=f"alpha={alpha}")
ax.loglog(ts, 1 / np.sqrt(2 * math.pi * ts), "k--", label="(2 pi t)^-1/2")
ax.set_xlabel("t")
ax.set_ylabel("p_t(0,0)")
ax.legend()
fig.tight_layout()
fig.savefig("ondiagonal.svg")

# Green functions do not see the landscape; exit times do
env = sample_environment(3.0, (-20, 20), 3)
print("g(0,0) in B(0,8):", green_function(env, 0, 8, 0, 0), "closed form", green_closed_form(0, 8, 0, 0))
print("E_0[exit of B(0,8)] =", expected_exit_time(env, 0, 8, 0))

for c in check_diagonal_bounds(env, 0, 8):
    print(f"{c.name:5} bound at t={c.t:8.1f}: {c.lhs:.4g} vs {c.rhs:.4g}  holds={c.holds}")
