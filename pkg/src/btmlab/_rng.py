"""Counter-based random numbers (splitmix64 mixing).

Every random quantity in btmlab is a pure function of a 64-bit key and an
integer counter, so results never depend on evaluation order, window size
or thread count.  Keys are derived hierarchically with :func:`derive`.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 1.0 / 9007199254740992.0

# stream identifiers; keep stable, they are part of the reproducibility contract
STREAM_ENV = 1
STREAM_DIRECT = 2
STREAM_TIMECHANGE = 3
STREAM_SUMS = 4
STREAM_EXIT = 5
STREAM_ENSEMBLE = 6
STREAM_BOOTSTRAP = 7


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def derive(key, index):
    """Child key for (key, index); index may be any int64, negatives included."""
    return mix64(np.uint64(key) ^ mix64(np.uint64(index) + GOLDEN))


@njit(cache=True)
def next_uniform(state):
    """splitmix64 step. Returns (new_state, u) with u uniform on (0, 1]."""
    state = np.uint64(state) + GOLDEN
    z = mix64(state)
    return state, (np.float64(z >> _S11) + 1.0) * _TWO_M53


@njit(cache=True)
def key_uniform(key):
    """Uniform on (0, 1] determined by a single key."""
    return (np.float64(mix64(key + GOLDEN) >> _S11) + 1.0) * _TWO_M53


@njit(cache=True)
def site_tau(env_key, site, alpha):
    """Trap depth at `site`: inverse CDF u**(-1/alpha) of the per-site uniform."""
    u = key_uniform(derive(env_key, site))
    return u ** (-1.0 / alpha)


@njit(cache=True)
def fill_taus(env_key, lo, hi, alpha):
    out = np.empty(hi - lo + 1)
    for i in range(hi - lo + 1):
        out[i] = site_tau(env_key, lo + i, alpha)
    return out


def as_key(seed):
    """Normalize a Python int seed to a uint64 key."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def stream_key(seed, stream):
    return np.uint64(derive(as_key(seed), np.int64(stream)))
