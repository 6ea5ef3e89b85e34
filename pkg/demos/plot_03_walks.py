"""
Simulating the walk two ways
============================

The walk can be run directly (exponential holds with mean tau) or as a time
change of the rate-1 walk through its scenery clock.  Both give the same law.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from btmlab import walk
from btmlab.env import sample_environment

env = sample_environment(1.5, (-200, 200), 5)

traj = walk.simulate_direct(env, 0, 2000.0, walk.RNGStream(5))
y, clock = walk.simulate_scenery(env, 0, 2000.0, walk.RNGStream(5))
print("jumps up to t=2000:", traj.jump_count(2000.0))
print("scenery clock at s=100:", walk.scenery_functional(clock, 100.0))

fig, ax = plt.subplots(figsize=(6, 3))
ax.step(traj.times, traj.sites, where="post", lw=0.8)
ax.set_xlabel("t")
ax.set_ylabel("X_t")
fig.tight_layout()
fig.savefig("trajectory.svg")

a = walk.walk_endpoints(env, [1000.0], 10**5, 1, method=walk.DIRECT).positions[:, 0]
b = walk.walk_endpoints(env, [1000.0], 10**5, 1, method=walk.TIMECHANGE).positions[:, 0]
d = walk.ks_two_sample(a, b)
print(f"KS(direct, time change) = {d:.5f}, 0.1% critical value {walk.ks_critical(a.size, b.size, 1e-3):.5f}")
print("empirical variance / t:", np.var(a) / 1000.0)
