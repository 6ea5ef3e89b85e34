"""Event-driven Monte Carlo of the trap walk and its trajectory functionals.

Two constructions are provided:

* direct: hold at x for ``tau_x * E`` with ``E ~ Exp(1)``, then step +-1;
* time change: run the rate-1 simple walk ``Y``, accumulate the scenery
  clock ``A_s = int_0^s tau_{Y_u} du`` and read ``X_t = Y_{A^{-1}(t)}``.

Every replicate owns a counter-based stream keyed by ``(seed, stream,
replicate)``; exponentials are drawn by inversion.  Bulk runs keep only
the requested functionals, never the event lists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit, prange
from scipy.special import ndtr

from . import _rng
from .env import Environment, env_key
from .errors import ParameterError, RangeError

DIRECT = "direct"
TIMECHANGE = "timechange"


@dataclass(frozen=True)
class RNGStream:
    """Identifies one replicate's random stream."""

    seed: int
    stream: int = _rng.STREAM_DIRECT
    replicate: int = 0

    def key(self) -> np.uint64:
        return np.uint64(_rng.derive(_rng.stream_key(self.seed, self.stream), np.int64(self.replicate)))


def ensemble_seed(seed: int, i: int) -> int:
    """Seed of the i-th landscape of an annealed ensemble."""
    return int(_rng.derive(_rng.stream_key(seed, _rng.STREAM_ENSEMBLE), np.int64(i)))


# ---------------------------------------------------------------------------
# single trajectories (debug / inspection)


@dataclass(frozen=True)
class Trajectory:
    start: int
    times: np.ndarray      # jump times, strictly increasing
    sites: np.ndarray      # site entered at each jump
    t_end: float
    env_seed: int | None = None
    replicate: int = 0

    def _check(self, t):
        if t < 0 or t > self.t_end:
            raise RangeError(f"time {t} outside [0, {self.t_end}]")

    def position(self, t: float) -> int:
        self._check(t)
        k = int(np.searchsorted(self.times, t, side="right"))
        return int(self.start if k == 0 else self.sites[k - 1])

    def jump_count(self, t: float) -> int:
        self._check(t)
        return int(np.searchsorted(self.times, t, side="right"))

    @property
    def path(self) -> np.ndarray:
        return np.concatenate([[self.start], self.sites])


@dataclass(frozen=True)
class SceneryClock:
    """Rate-1 simple walk ``Y`` with the additive functional ``A``.

    ``y_times[k]`` is the k-th jump time of Y (in Y's own time) and
    ``a_values[k]`` the value of A there; between jumps A grows with slope
    ``tau`` of the occupied site.
    """

    start: int
    y_times: np.ndarray
    y_sites: np.ndarray
    a_values: np.ndarray
    slopes: np.ndarray     # tau of the site occupied on each segment (len = jumps + 1)
    horizon: float

    def value(self, s: float) -> float:
        if s < 0 or s > self.horizon:
            raise RangeError(f"time {s} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.y_times, s, side="right"))
        t0 = 0.0 if k == 0 else float(self.y_times[k - 1])
        a0 = 0.0 if k == 0 else float(self.a_values[k - 1])
        return a0 + float(self.slopes[k]) * (s - t0)


@njit(cache=True)
def _single(taus, offset, x0, t_end, key, timechange):
    cap = 64
    times = np.empty(cap)
    sites = np.empty(cap, dtype=np.int64)
    ytimes = np.empty(cap)
    slopes = np.empty(cap + 1)
    n = 0
    x = x0
    t = 0.0
    s = 0.0
    state = key
    exited = False
    while True:
        i = x - offset
        if i < 0 or i >= taus.size:
            exited = True
            break
        tau = taus[i]
        state, u = _rng.next_uniform(state)
        e = -math.log(u)
        tn = t + tau * e
        if n >= cap:
            cap *= 2
            times2 = np.empty(cap)
            sites2 = np.empty(cap, dtype=np.int64)
            ytimes2 = np.empty(cap)
            slopes2 = np.empty(cap + 1)
            times2[:n] = times[:n]
            sites2[:n] = sites[:n]
            ytimes2[:n] = ytimes[:n]
            slopes2[:n] = slopes[:n]
            times, sites, ytimes, slopes = times2, sites2, ytimes2, slopes2
        slopes[n] = tau
        if tn > t_end:
            break
        state, u = _rng.next_uniform(state)
        x = x + 1 if u <= 0.5 else x - 1
        times[n] = tn
        sites[n] = x
        s = s + e
        ytimes[n] = s
        n += 1
        t = tn
    return times[:n], sites[:n], ytimes[:n], slopes[:n + 1], exited


def _simulate_single(env, x0, t_end, stream, timechange):
    if t_end < 0:
        raise ParameterError("t_end must be >= 0")
    half = max(64, int(4 * math.sqrt(t_end)) + 16)
    while True:
        env = env.covering(x0 - half, x0 + half)
        out = _single(env.taps, env.offset, int(x0), float(t_end), stream.key(), timechange)
        if not out[4]:
            return env, out
        half *= 2


def simulate_direct(env: Environment, x0: int, t_end: float,
                    stream: RNGStream | None = None) -> Trajectory:
    """One trajectory on ``[0, t_end]`` with exponential holding times of mean ``tau_x``."""
    stream = stream or RNGStream(env.seed or 0, _rng.STREAM_DIRECT)
    env, (times, sites, _, _, _) = _simulate_single(env, x0, t_end, stream, False)
    return Trajectory(int(x0), times.copy(), sites.copy(), float(t_end), env.seed, stream.replicate)


def simulate_scenery(env: Environment, x0: int, t_end: float,
                     stream: RNGStream | None = None) -> tuple[Trajectory, SceneryClock]:
    """Time-change construction; returns X on ``[0, t_end]`` and the clock of Y.

    The clock covers Y up to ``A^{-1}(t_end)``.
    """
    stream = stream or RNGStream(env.seed or 0, _rng.STREAM_TIMECHANGE)
    env, (a_jumps, sites, ytimes, slopes, _) = _simulate_single(env, x0, t_end, stream, True)
    last_a = float(a_jumps[-1]) if a_jumps.size else 0.0
    last_s = float(ytimes[-1]) if ytimes.size else 0.0
    horizon = last_s + (t_end - last_a) / float(slopes[-1])
    clock = SceneryClock(int(x0), ytimes.copy(), sites.copy(), a_jumps.copy(), slopes.copy(), horizon)
    # X jumps exactly when A passes the jump times of Y
    traj = Trajectory(int(x0), a_jumps.copy(), sites.copy(), float(t_end), env.seed, stream.replicate)
    return traj, clock


def simulate_timechange(env: Environment, x0: int, t_end: float,
                        stream: RNGStream | None = None) -> Trajectory:
    return simulate_scenery(env, x0, t_end, stream)[0]


def scenery_functional(clock: SceneryClock, s: float) -> float:
    """``A_s = int_0^s tau_{Y_u} du`` (exact, piecewise linear)."""
    return clock.value(s)


def quadratic_variation(traj: Trajectory, t: float, powers=(2,)) -> dict:
    """Jump count up to t together with ``sum |dX|^p`` for each requested power."""
    k = traj.jump_count(t)
    steps = np.abs(np.diff(traj.path[: k + 1]))
    out = {"jumps": k}
    for p in powers:
        out[p] = int(np.sum(steps ** p))
    return out


# ---------------------------------------------------------------------------
# bulk engines


@njit(cache=True, parallel=True)
def _bulk(taus, offset, annealed, alpha, ens_key, stream_key, x0, obs, M, timechange, first):
    nobs = obs.size
    pos = np.zeros((M, nobs), dtype=np.int64)
    jumps = np.zeros((M, nobs), dtype=np.int64)
    exited = np.zeros(M, dtype=np.bool_)
    for r in prange(M):
        rep = first + r
        state = _rng.derive(stream_key, rep)
        if annealed:
            ekey = _rng.derive(_rng.derive(ens_key, rep), 1)
        else:
            ekey = ens_key
        x = x0
        t = 0.0
        nj = 0
        j = 0
        while j < nobs:
            if annealed:
                tau = _rng.site_tau(ekey, x, alpha)
            else:
                i = x - offset
                if i < 0 or i >= taus.size:
                    exited[r] = True
                    break
                tau = taus[i]
            state, u = _rng.next_uniform(state)
            tn = t + tau * -math.log(u)
            while j < nobs and obs[j] < tn:
                pos[r, j] = x
                jumps[r, j] = nj
                j += 1
            if j == nobs:
                break
            state, u = _rng.next_uniform(state)
            x = x + 1 if u <= 0.5 else x - 1
            nj += 1
            t = tn
    return pos, jumps, exited


@njit(cache=True, parallel=True)
def _bulk_scenery(taus, offset, annealed, alpha, ens_key, stream_key, x0, obs, M, first):
    nobs = obs.size
    vals = np.zeros((M, nobs))
    exited = np.zeros(M, dtype=np.bool_)
    for r in prange(M):
        rep = first + r
        state = _rng.derive(stream_key, rep)
        if annealed:
            ekey = _rng.derive(_rng.derive(ens_key, rep), 1)
        else:
            ekey = ens_key
        y = x0
        s = 0.0
        a = 0.0
        j = 0
        while j < nobs:
            if annealed:
                tau = _rng.site_tau(ekey, y, alpha)
            else:
                i = y - offset
                if i < 0 or i >= taus.size:
                    exited[r] = True
                    break
                tau = taus[i]
            state, u = _rng.next_uniform(state)
            e = -math.log(u)
            sn = s + e
            while j < nobs and obs[j] < sn:
                vals[r, j] = a + tau * (obs[j] - s)
                j += 1
            if j == nobs:
                break
            state, u = _rng.next_uniform(state)
            y = y + 1 if u <= 0.5 else y - 1
            a += tau * e
            s = sn
    return vals, exited


@njit(cache=True, parallel=True)
def _bulk_exit(taus, offset, x0, radius, stream_key, M):
    out = np.zeros(M)
    exited = np.zeros(M, dtype=np.bool_)
    for r in prange(M):
        state = _rng.derive(stream_key, r)
        x = x0
        t = 0.0
        while abs(x - x0) < radius:
            i = x - offset
            if i < 0 or i >= taus.size:
                exited[r] = True
                break
            state, u = _rng.next_uniform(state)
            t += taus[i] * -math.log(u)
            state, u = _rng.next_uniform(state)
            x = x + 1 if u <= 0.5 else x - 1
        out[r] = t
    return out, exited


class Endpoints(NamedTuple):
    times: np.ndarray
    positions: np.ndarray   # (M, len(times))
    jumps: np.ndarray       # jump counts up to each time


def _obs(times):
    obs = np.asarray(times, dtype=np.float64)
    if obs.ndim != 1 or obs.size == 0 or np.any(obs < 0) or np.any(np.diff(obs) < 0):
        raise ParameterError("observation times must be a nonempty nondecreasing sequence >= 0")
    return obs


def _run_quenched(env, x0, half, engine):
    """Run ``engine(env)`` and rerun the replicates that left the landscape."""
    env = env.covering(x0 - half, x0 + half)
    result = engine(env, None)
    exited = result[-1]
    while exited.any():
        half *= 2
        env = env.covering(x0 - half, x0 + half)
        idx = np.flatnonzero(exited)
        redo = engine(env, idx)
        for full, part in zip(result[:-1], redo[:-1]):
            full[idx] = part
        exited = np.zeros_like(exited)
        exited[idx] = redo[-1]
    return result[:-1]


def _half_width(t_max):
    return max(64, int(6 * math.sqrt(t_max)) + 16)


def walk_endpoints(env: Environment, times, M: int, seed: int, x0: int = 0,
                   method: str = DIRECT) -> Endpoints:
    """Positions and jump counts of M quenched replicates at the given times."""
    obs = _obs(times)
    if method not in (DIRECT, TIMECHANGE):
        raise ParameterError(f"unknown method {method!r}")
    sid = _rng.STREAM_DIRECT if method == DIRECT else _rng.STREAM_TIMECHANGE
    skey = _rng.stream_key(seed, sid)

    def engine(e, idx):
        if idx is None:
            return _bulk(e.taps, e.offset, False, e.alpha, np.uint64(0), skey, int(x0), obs,
                         int(M), method == TIMECHANGE, 0)
        outs = [_bulk(e.taps, e.offset, False, e.alpha, np.uint64(0), skey, int(x0), obs,
                      1, method == TIMECHANGE, int(r)) for r in idx]
        return tuple(np.concatenate([o[k] for o in outs]) for k in range(3))

    pos, jumps = _run_quenched(env, int(x0), _half_width(obs[-1]), engine)
    return Endpoints(obs, pos, jumps)


def annealed_endpoints(alpha: float, times, M: int, seed: int, x0: int = 0,
                       method: str = DIRECT) -> Endpoints:
    """Like :func:`walk_endpoints` but replicate r lives in landscape ``ensemble_seed(seed, r)``."""
    obs = _obs(times)
    sid = _rng.STREAM_DIRECT if method == DIRECT else _rng.STREAM_TIMECHANGE
    skey = _rng.stream_key(seed, sid)
    ens = _rng.stream_key(seed, _rng.STREAM_ENSEMBLE)
    pos, jumps, _ = _bulk(np.ones(1), 0, True, float(alpha), ens, skey, int(x0), obs,
                          int(M), method == TIMECHANGE, 0)
    return Endpoints(obs, pos, jumps)


def scenery_samples(env: Environment | None, times, M: int, seed: int, x0: int = 0,
                    alpha: float | None = None) -> np.ndarray:
    """``A_s`` of the rate-1 walk at each s in ``times`` for M replicates.

    Pass ``env`` for a fixed landscape, or ``env=None`` with ``alpha`` for
    the annealed ensemble.
    """
    obs = _obs(times)
    skey = _rng.stream_key(seed, _rng.STREAM_TIMECHANGE)
    if env is None:
        ens = _rng.stream_key(seed, _rng.STREAM_ENSEMBLE)
        vals, _ = _bulk_scenery(np.ones(1), 0, True, float(alpha), ens, skey, int(x0), obs, int(M), 0)
        return vals

    def engine(e, idx):
        if idx is None:
            return _bulk_scenery(e.taps, e.offset, False, e.alpha, np.uint64(0), skey, int(x0),
                                 obs, int(M), 0)
        outs = [_bulk_scenery(e.taps, e.offset, False, e.alpha, np.uint64(0), skey, int(x0),
                              obs, 1, int(r)) for r in idx]
        return tuple(np.concatenate([o[k] for o in outs]) for k in range(2))

    (vals,) = _run_quenched(env, int(x0), max(64, int(6 * math.sqrt(obs[-1])) + 16), engine)
    return vals


def exit_times(env: Environment, x: int, n: int, M: int, seed: int) -> np.ndarray:
    """Monte Carlo exit times from ``B(x, n) = {|y - x| < n}`` started at x."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    env = env.covering(x - n, x + n)
    skey = _rng.stream_key(seed, _rng.STREAM_EXIT)
    out, exited = _bulk_exit(env.taps, env.offset, int(x), int(n), skey, int(M))
    assert not exited.any()
    return out


# ---------------------------------------------------------------------------
# distribution-level statistics


def std_normal_cdf(x):
    """Standard normal distribution function."""
    out = ndtr(np.asarray(x, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def kolmogorov_distance(samples, cdf=std_normal_cdf) -> float:
    """``sup_x |F_M(x) - F(x)|`` of the empirical CDF of ``samples`` against ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    if m == 0:
        raise ParameterError("kolmogorov_distance needs at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ParameterError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n: int, m: int, level: float) -> float:
    """Asymptotic two-sample KS critical value at significance ``level``."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))
