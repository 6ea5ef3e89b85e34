"""Heavy-tailed i.i.d. sums: scaling functions, LIL constants and Monte Carlo probes.

The summands follow the trap law ``P[X >= u] = u**(-alpha)``, ``u >= 1``,
drawn from the same counter-based sampler as the landscapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit, prange
from scipy.special import gamma as gamma_fn

from . import _rng
from .errors import DomainError, ParameterError, RegimeError
from .table import ResultTable

EULER_GAMMA = 0.57721566490153286061

_TAGS = ("(0,1)", "{1}", "(1,2)", "{2}", "(2,inf)")


@dataclass(frozen=True)
class ScalingRegime:
    alpha: float
    tag: str

    @classmethod
    def of(cls, alpha: float) -> "ScalingRegime":
        alpha = float(alpha)
        if not alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {alpha}")
        if alpha < 1:
            tag = _TAGS[0]
        elif alpha == 1:
            tag = _TAGS[1]
        elif alpha < 2:
            tag = _TAGS[2]
        elif alpha == 2:
            tag = _TAGS[3]
        else:
            tag = _TAGS[4]
        return cls(alpha, tag)


def phi_alpha(t, alpha: float):
    """On-diagonal heat kernel scale: t^(-1/(1+a)), (t log t)^(-1/2) or t^(-1/2)."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError("t must be > 0")
    if alpha < 1:
        out = t ** (-1.0 / (1.0 + alpha))
    elif alpha == 1:
        if np.any(t <= math.e):
            raise DomainError("phi_alpha at alpha = 1 needs t > e")
        out = 1.0 / np.sqrt(t * np.log(t))
    else:
        out = t ** -0.5
    return float(out) if out.ndim == 0 else out


def v_alpha(r, alpha: float):
    """Volume scale of a ball of radius r: r^(1/a), r max(1, log r) or r."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 1):
        raise DomainError("r must be >= 1")
    if alpha < 1:
        out = r ** (1.0 / alpha)
    elif alpha == 1:
        out = r * np.maximum(1.0, np.log(r))
    else:
        out = r.copy()
    return float(out) if out.ndim == 0 else out


class LILConstants(NamedTuple):
    liminf_const: float
    K_alpha: float
    C_alpha: float | None


def lil_constants(alpha: float, c_F: float = 1.0) -> LILConstants:
    """Finite liminf constants of the iterated-logarithm laws for alpha in (0, 2].

    ``liminf_const`` is the a.s. liminf of the regime's normalized sum;
    ``K_alpha`` the Mason constant (in [-sqrt 2, 0]); ``C_alpha`` the
    centering correction, defined only for alpha < 1.
    """
    alpha = float(alpha)
    if not c_F > 0:
        raise ParameterError("c_F must be > 0")
    if not 0 < alpha <= 2:
        raise RegimeError(f"LIL constants are tabulated for alpha in (0, 2], got {alpha}")
    if alpha == 2:
        return LILConstants(-math.sqrt(2.0 * c_F), -math.sqrt(2.0), None)
    if alpha == 1:
        return LILConstants(c_F, -EULER_GAMMA / math.sqrt(2.0), None)
    g = gamma_fn(2.0 - alpha) ** (1.0 / alpha)
    lead = alpha / (1.0 - alpha)
    root = math.sqrt((2.0 - alpha) / 2.0)
    K = (g - 1.0) * lead * root
    if alpha < 1:
        return LILConstants(c_F ** (1.0 / alpha) * lead * g, K, lead * root)
    return LILConstants(c_F ** (1.0 / alpha) * lead * (g - 1.0), K, None)


def _mean(alpha):
    return 1.0 if math.isinf(alpha) else alpha / (alpha - 1.0)


# compiled samplers ------------------------------------------------------------

@njit(cache=True, parallel=True)
def _kahan_sums(key, n, M, alpha):
    out = np.empty(M)
    for r in prange(M):
        state = _rng.derive(key, r)
        s = 0.0
        c = 0.0
        for _ in range(n):
            state, u = _rng.next_uniform(state)
            y = u ** (-1.0 / alpha) - c
            tmp = s + y
            c = (tmp - s) - y
            s = tmp
        out[r] = s
    return out


@njit(cache=True)
def _dyadic_trace(key, N, alpha, regime, mean):
    # regime: 0 (0,1), 1 {1}, 2 (1,2), 3 {2}, 4 (2,inf)
    kmax = 0
    while (1 << (kmax + 1)) <= N:
        kmax += 1
    nblk = kmax - 3
    if nblk < 1:
        nblk = 0
    low_min = np.full(nblk, np.inf)
    low_max = np.full(nblk, -np.inf)
    up_min = np.full(nblk, np.inf)
    up_max = np.full(nblk, -np.inf)
    s_end = np.zeros(nblk)
    n_end = np.zeros(nblk, dtype=np.int64)
    state = _rng.derive(key, 0)
    s = 0.0
    c = 0.0
    a = 1.0 / alpha
    for n in range(1, N + 1):
        state, u = _rng.next_uniform(state)
        y = u ** (-a) - c
        tmp = s + y
        c = (tmp - s) - y
        s = tmp
        if n < 16:
            continue
        b = 0
        m = n
        while m > 1:
            m >>= 1
            b += 1
        blk = b - 4
        ln = math.log(n)
        ll = math.log(ln)
        if regime == 0:
            cen = s
            low = n ** a * ll ** (1.0 - a)
            up = n ** a * ln ** a * ll ** a
        elif regime == 1:
            cen = s
            low = n * ln
            up = n * ln * ll
        elif regime == 2:
            cen = s - n * mean
            low = n ** a * ll ** (1.0 - a)
            up = n ** a * ln ** a * ll ** a
        elif regime == 3:
            cen = s - n * mean
            low = math.sqrt(n * ln * ll)
            up = low
        else:
            cen = s - n * mean
            low = math.sqrt(n * ll)
            up = low
        lv = cen / low
        uv = cen / up
        if lv < low_min[blk]:
            low_min[blk] = lv
        if lv > low_max[blk]:
            low_max[blk] = lv
        if uv < up_min[blk]:
            up_min[blk] = uv
        if uv > up_max[blk]:
            up_max[blk] = uv
        s_end[blk] = s
        n_end[blk] = n
    return n_end, s_end, low_min, low_max, up_min, up_max


def fluctuation_probe(alpha: float, N_max: int, seed: int) -> ResultTable:
    """Running sum of one sequence, summarized over dyadic blocks [2^k, 2^(k+1)).

    ``low_*`` columns use the liminf normalizer of the regime and ``up_*``
    the limsup normalizer (at the boundary exponent); sums are centered by
    ``n E[X]`` when alpha > 1.  Blocks start at n = 16 so that log log n > 1; shorter runs give an empty table.
    """
    alpha = float(alpha)
    if N_max < 10:
        raise ParameterError("N_max must be >= 10")
    regime = _TAGS.index(ScalingRegime.of(alpha).tag)
    mean = _mean(alpha) if alpha > 1 else 0.0
    key = _rng.stream_key(seed, _rng.STREAM_SUMS)
    n_end, s_end, lmin, lmax, umin, umax = _dyadic_trace(key, int(N_max), alpha, regime, mean)
    tab = ResultTable(
        ["k", "n", "S_n", "S_n_over_n", "low_min", "low_max", "up_min", "up_max"],
        params={"alpha": alpha, "N_max": int(N_max), "seed": seed,
                "regime": ScalingRegime.of(alpha).tag},
    )
    for i in range(n_end.size):
        if n_end[i] == 0:
            continue
        tab.append(i + 4, int(n_end[i]), float(s_end[i]), float(s_end[i] / n_end[i]),
                   float(lmin[i]), float(lmax[i]), float(umin[i]), float(umax[i]))
    return tab


def iid_sums(alpha: float, n: int, M: int, seed: int, stream: int = _rng.STREAM_SUMS) -> np.ndarray:
    """M independent compensated sums of n trap-law variables."""
    key = np.uint64(_rng.derive(_rng.stream_key(seed, stream), np.int64(n)))
    return _kahan_sums(key, int(n), int(M), float(alpha))


def median_probe(alpha: float, ns, M: int, seed: int, n_boot: int = 500,
                 level: float = 0.95) -> ResultTable:
    """Empirical medians of S_n with percentile-bootstrap intervals.

    ``ratio`` is the median over the leading-order term (n^(1/a), n log n
    or n E[X] + n^(1/a)); ``mbar`` is the implied Monte Carlo estimate of
    the limiting stable median.
    """
    regime = ScalingRegime.of(alpha)
    alpha = regime.alpha
    if alpha >= 2:
        raise RegimeError("median asymptotics need alpha in (0, 2)")
    if M < 1000:
        raise ParameterError("median_probe needs M >= 1000 replicates")
    boot = np.random.default_rng(int(_rng.stream_key(seed, _rng.STREAM_BOOTSTRAP)))
    tab = ResultTable(["n", "median", "ci_lo", "ci_hi", "leading", "ratio", "median_over_n", "mbar"],
                      params={"alpha": alpha, "M": M, "seed": seed, "n_boot": n_boot, "level": level})
    for n in ns:
        n = int(n)
        s = iid_sums(alpha, n, M, seed)
        med = float(np.median(s))
        idx = boot.integers(0, M, size=(n_boot, M))
        meds = np.median(s[idx], axis=1)
        lo, hi = np.quantile(meds, [(1 - level) / 2, (1 + level) / 2])
        if alpha < 1:
            lead = n ** (1.0 / alpha)
            mbar = med / lead
        elif alpha == 1:
            lead = n * math.log(n) if n > 1 else 1.0
            mbar = med / lead
        else:
            lead = n * _mean(alpha) + n ** (1.0 / alpha)
            mbar = (med - n * _mean(alpha)) / n ** (1.0 / alpha)
        tab.append(n, med, float(lo), float(hi), lead, med / lead, med / n, mbar)
    return tab


@dataclass
class TailProbeResult:
    lambdas: np.ndarray
    p_low: np.ndarray
    p_up: np.ndarray
    se_low: np.ndarray
    se_up: np.ndarray
    M: int
    n: int
    alpha: float
    gamma: float
    slope_up: float
    slope_low: float

    def to_table(self) -> ResultTable:
        tab = ResultTable(["lambda", "p_low", "se_low", "p_up", "se_up"],
                          params={"alpha": self.alpha, "n": self.n, "M": self.M,
                                  "gamma": self.gamma, "slope_up": self.slope_up,
                                  "slope_low": self.slope_low})
        for row in zip(self.lambdas, self.p_low, self.se_low, self.p_up, self.se_up):
            tab.append(*(float(v) for v in row))
        return tab


def _slope(x, y):
    mask = y > 0
    if mask.sum() < 2:
        return math.nan
    return float(np.polyfit(x[mask], np.log(y[mask]), 1)[0])


def tail_probe(alpha: float, n: int, lambdas, M: int, seed: int) -> TailProbeResult:
    """Lower/upper tail frequencies of S_n at ``v_alpha(n) / lambda`` and ``lambda v_alpha(n)``.

    Where ``v_alpha(n) / lambda < n`` the lower tail is exactly zero (each
    summand is >= 1) and is set without sampling.
    """
    alpha = float(alpha)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise ParameterError("empty lambda grid")
    if np.any(lambdas < 1):
        raise ParameterError("lambda values must be >= 1")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if M < 10_000:
        raise ParameterError("tail_probe needs M >= 1e4 replicates")
    v = v_alpha(n, alpha)
    s = np.sort(iid_sums(alpha, n, M, seed))
    low_thr = v / lambdas
    up_thr = v * lambdas
    impossible = low_thr < n
    c_low = np.searchsorted(s, low_thr, side="right").astype(np.float64)
    c_low[impossible] = 0.0
    c_up = (M - np.searchsorted(s, up_thr, side="left")).astype(np.float64)
    p_low = c_low / M
    p_up = c_up / M
    gam = min(1.0, alpha)
    return TailProbeResult(
        lambdas, p_low, p_up,
        np.sqrt(p_low * (1 - p_low) / M), np.sqrt(p_up * (1 - p_up) / M),
        int(M), int(n), alpha, gam,
        _slope(np.log(lambdas), p_up),
        _slope(lambdas ** gam, p_low),
    )
