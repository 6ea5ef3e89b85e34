"""Quantitative homogenization measurements for trap depths with finite variance.

All Gaussian comparisons use the analytic diffusivity ``sigma^2 = 1/E[tau_0]
= (alpha - 1)/alpha``; only the walk is random.  ``alpha = inf`` selects the
homogeneous control ``tau == 1`` (``sigma^2 = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import walk
from .env import Environment, mean_trap, sample_environment
from .errors import ParameterError, RegimeError
from .kernel import generator_for, ondiagonal, transition_rows
from .sums import phi_alpha
from .table import ResultTable

QUENCHED = "quenched"
ANNEALED = "annealed"


def _require_finite_variance(alpha, what):
    if not alpha > 2:
        raise RegimeError(
            f"{what} needs alpha > 2 (second moment of tau_0 finite), got alpha = {alpha}"
        )


def sigma2(alpha: float) -> float:
    """Diffusivity ``1/E[tau_0]``."""
    return 1.0 / mean_trap(alpha)


def log_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan if any y <= 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def gaussian_density(x, t):
    """``(2 pi t)^{-1/2} exp(-x^2 / 2t)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)


def _times(t_grid):
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0):
        raise ParameterError("time grid must be a nonempty list of positive times")
    return np.sort(t)


def _landscape(alpha, seed, t_max, env):
    if env is not None:
        return env
    w = max(64, int(6 * math.sqrt(t_max)) + 16)
    return sample_environment(alpha, (-w, w), seed)


# ---------------------------------------------------------------------------
# Berry-Esseen distances


@dataclass
class BEResult:
    mode: str
    alpha: float
    seed: int
    times: np.ndarray
    D: np.ndarray
    M: int
    sigma2: float
    slope: float
    noise_floor: float

    def to_table(self) -> ResultTable:
        params = {"mode": self.mode, "alpha": self.alpha, "seed": self.seed, "M": self.M,
                  "sigma2": self.sigma2, "slope": self.slope, "noise_floor": self.noise_floor}
        rows = [(float(t), float(d)) for t, d in zip(self.times, self.D)]
        return ResultTable(["t", "D"], rows, params)


def berry_esseen(mode: str, alpha: float, t_grid, M: int, seed: int,
                 env: Environment | None = None) -> BEResult:
    """Kolmogorov distance between ``X_t / (sigma sqrt t)`` and the standard normal.

    ``quenched`` runs all M walks in one landscape (``env`` or one sampled
    from ``seed``); ``annealed`` gives every walk its own landscape.
    """
    alpha = float(alpha)
    _require_finite_variance(alpha, "berry_esseen")
    if mode not in (QUENCHED, ANNEALED):
        raise ParameterError(f"mode must be {QUENCHED!r} or {ANNEALED!r}, got {mode!r}")
    if M < 1:
        raise ParameterError("M must be >= 1")
    times = _times(t_grid)
    s2 = sigma2(alpha)
    if mode == QUENCHED:
        env = _landscape(alpha, seed, times[-1], env)
        ends = walk.walk_endpoints(env, times, M, seed)
    else:
        ends = walk.annealed_endpoints(alpha, times, M, seed)
    D = np.array([
        walk.kolmogorov_distance(ends.positions[:, j] / math.sqrt(s2 * t))
        for j, t in enumerate(times)
    ])
    return BEResult(mode, alpha, int(seed), times, D, int(M), s2,
                    log_slope(times, D), 1.0 / math.sqrt(M))


# ---------------------------------------------------------------------------
# quadratic variation and scenery errors


@dataclass
class RateResult:
    """Per-time Monte Carlo estimates with standard errors and a fitted log-log slope."""

    quantity: str
    times: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    exponent: float
    params: dict = field(default_factory=dict)

    def to_table(self) -> ResultTable:
        params = {"quantity": self.quantity, **self.params, "exponent": self.exponent}
        rows = [(float(t), float(e), float(s))
                for t, e, s in zip(self.times, self.estimate, self.se)]
        return ResultTable(["t", "estimate", "se"], rows, params)


def _mean_se(v):
    m = v.shape[0]
    est = v.mean(axis=0)
    se = v.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.full(v.shape[1], math.nan)
    return est, se


def qv_error(env: Environment, t_grid, M: int, seed: int) -> RateResult:
    """``E[(<X>_t / t - sigma^2)^2]`` in a fixed landscape.

    ``<X>_t`` is the jump count; the estimate carries its standard error and
    the fitted decay exponent over the grid.
    """
    _require_finite_variance(env.alpha, "qv_error")
    times = _times(t_grid)
    s2 = sigma2(env.alpha)
    ends = walk.walk_endpoints(env, times, M, seed)
    dev = (ends.jumps / times[None, :] - s2) ** 2
    est, se = _mean_se(dev)
    return RateResult("qv_error", times, est, se, log_slope(times, est),
                      {"alpha": env.alpha, "env_seed": env.seed, "seed": seed, "M": M})


def scenery_error(mode: str, alpha: float, t_grid, M: int, seed: int,
                  env: Environment | None = None, centering: float | None = None) -> RateResult:
    """``E[(A_t - c t)^2]`` for the scenery clock of the rate-1 walk, ``c = E[tau_0]`` by default."""
    alpha = float(alpha)
    _require_finite_variance(alpha, "scenery_error")
    if mode not in (QUENCHED, ANNEALED):
        raise ParameterError(f"mode must be {QUENCHED!r} or {ANNEALED!r}, got {mode!r}")
    times = _times(t_grid)
    c = mean_trap(alpha) if centering is None else float(centering)
    if mode == QUENCHED:
        env = _landscape(alpha, seed, times[-1], env)
        vals = walk.scenery_samples(env, times, M, seed)
    else:
        vals = walk.scenery_samples(None, times, M, seed, alpha=alpha)
    dev = (vals - c * times[None, :]) ** 2
    est, se = _mean_se(dev)
    return RateResult("scenery_error", times, est, se, log_slope(times, est),
                      {"mode": mode, "alpha": alpha, "seed": seed, "M": M, "centering": c})


# ---------------------------------------------------------------------------
# local limit theorem


def theta_sup(alpha: float) -> float:
    """Supremum of the admissible LCLT exponents, ``(alpha - 2)/(10 (2 alpha - 1))``."""
    if math.isinf(alpha):
        return 0.05
    return (alpha - 2.0) / (10.0 * (2.0 * alpha - 1.0))


@dataclass
class LCLTResult:
    alpha: float
    n: np.ndarray
    K: float
    T1: float
    T2: float
    theta: float
    error: np.ndarray
    argmax_x: np.ndarray
    argmax_t: np.ndarray

    @property
    def scaled(self) -> np.ndarray:
        return self.n ** (2.0 * self.theta / 3.0) * self.error

    def to_table(self) -> ResultTable:
        params = {"alpha": self.alpha, "K": self.K, "T1": self.T1, "T2": self.T2,
                  "theta": self.theta}
        rows = [(int(n), float(e), float(s), float(x), float(t))
                for n, e, s, x, t in zip(self.n, self.error, self.scaled,
                                         self.argmax_x, self.argmax_t)]
        return ResultTable(["n", "E", "scaled", "x", "t"], rows, params)


def _grid(lo, hi, step):
    k = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def lclt_surface(env: Environment, n: int, xs, ts, tol: float = 1e-10) -> np.ndarray:
    """``E[tau_0] n p_{E[tau_0] n^2 t}(0, floor(n x))`` on the grid ``ts x xs``."""
    m = mean_trap(env.alpha)
    ys = np.floor(n * np.asarray(xs) + 1e-9).astype(np.int64)
    times = m * n * n * np.asarray(ts, dtype=np.float64)
    gen = generator_for(env, 0, float(times.max()), tol, extra=(int(ys.min()), int(ys.max())))
    rows = transition_rows(gen, 0, times, tol)
    taus = gen.env.tau(ys)
    return np.array([[m * n * r.prob(int(y)) / tau for y, tau in zip(ys, taus)] for r in rows])


def lclt_error(env: Environment, n_grid, K: float = 2.0, T1: float = 1.0, T2: float = 2.0,
               x_step: float = 0.1, t_step: float = 0.25, theta: float | None = None,
               tol: float = 1e-10) -> LCLTResult:
    """Sup over ``|x| <= K``, ``t in [T1, T2]`` of the rescaled heat kernel minus the Gaussian."""
    alpha = env.alpha
    _require_finite_variance(alpha, "lclt_error")
    sup = theta_sup(alpha)
    if theta is None:
        theta = sup / 2.0
    if not 0 < theta < sup:
        raise ParameterError(f"theta must lie in (0, {sup}), got {theta}")
    if not (K > 0 and 0 < T1 <= T2 and x_step > 0 and t_step > 0):
        raise ParameterError("need K > 0, 0 < T1 <= T2 and positive grid steps")
    xs = _grid(-K, K, x_step)
    ts = _grid(T1, T2, t_step)
    gauss = gaussian_density(xs[None, :], ts[:, None])
    ns = np.asarray(sorted(int(n) for n in n_grid))
    err, ax, at = [], [], []
    for n in ns:
        if n < 1:
            raise ParameterError("n must be >= 1")
        diff = np.abs(lclt_surface(env, int(n), xs, ts, tol) - gauss)
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        err.append(diff[i, j])
        at.append(ts[i])
        ax.append(xs[j])
    return LCLTResult(alpha, ns, float(K), float(T1), float(T2), float(theta),
                      np.array(err), np.array(ax), np.array(at))


# ---------------------------------------------------------------------------
# cell partitions


@dataclass(frozen=True)
class CellPartition:
    """Half-open cells ``[k w, (k+1) w)`` of width ``w = floor(a^(eta N))``.

    The cells are the ones meeting ``[-R, R]`` with ``R = ceil(h a^(N+1))``.
    """

    N: int
    a: float
    eta: float
    h: float

    def __post_init__(self):
        if not self.a > 1:
            raise ParameterError("base a must be > 1")
        if not 0.5 < self.eta < 1:
            raise ParameterError("eta must lie in (1/2, 1)")
        if not self.h > 0:
            raise ParameterError("h must be > 0")
        if self.N < 0:
            raise ParameterError("level N must be >= 0")

    @property
    def width(self) -> int:
        return max(1, int(math.floor(self.a ** (self.eta * self.N) + 1e-9)))

    @property
    def radius(self) -> int:
        return int(math.ceil(self.h * self.a ** (self.N + 1) - 1e-9))

    @property
    def starts(self) -> np.ndarray:
        w, r = self.width, self.radius
        return w * np.arange((-r) // w, r // w + 1)

    def cell_of(self, y: int) -> tuple[int, int]:
        lo = (y // self.width) * self.width
        return lo, lo + self.width - 1


def cell_volumes(env: Environment, part: CellPartition) -> np.ndarray:
    w = part.width
    starts = part.starts
    env = env.covering(int(starts[0]), int(starts[-1]) + w - 1)
    cs = np.concatenate([[0.0], np.cumsum(env.slice(int(starts[0]), int(starts[-1]) + w - 1))])
    idx = starts - starts[0]
    return cs[idx + w] - cs[idx]


def cell_volume_check(env: Environment, part: CellPartition, kappa: float):
    """``sup_I |V(I) - E[tau_0] |I||`` and its ratio to ``a^(kappa N)``."""
    if not 0.5 < kappa < part.eta:
        raise ParameterError(f"kappa must lie in (1/2, eta = {part.eta}), got {kappa}")
    vols = cell_volumes(env, part)
    dev = float(np.max(np.abs(vols - mean_trap(env.alpha) * part.width)))
    return dev, dev / part.a ** (kappa * part.N)


def cell_volume_scan(env: Environment, levels, a: float, eta: float, h: float,
                     kappa: float) -> ResultTable:
    """Cell deviations across levels; ``params['slope']`` is the fitted slope of log deviation vs N."""
    rows = []
    for N in levels:
        part = CellPartition(int(N), a, eta, h)
        dev, const = cell_volume_check(env, part, kappa)
        rows.append((int(N), part.width, part.starts.size, dev, const))
    devs = np.array([r[3] for r in rows])
    Ns = np.array([r[0] for r in rows], dtype=float)
    slope = float(np.polyfit(Ns, np.log(devs), 1)[0]) if np.all(devs > 0) and len(rows) > 1 else math.nan
    params = {"alpha": env.alpha, "env_seed": env.seed if env.seed is not None else "none",
              "a": a, "eta": eta, "h": h, "kappa": kappa, "slope": slope,
              "bound_slope": kappa * math.log(a)}
    return ResultTable(["N", "width", "cells", "deviation", "constant"], rows, params)


@dataclass
class LCLTTerms:
    """Telescoping split of the LCLT error at one point through the cell containing the site."""

    n: int
    x: float
    t: float
    error: float
    local: float        # pointwise density vs cell average
    clt: float          # cell probability vs Gaussian mass
    volume: float       # cell volume vs its mean
    gaussian: float     # Gaussian cell average vs density

    @property
    def total(self) -> float:
        return self.local + self.clt + self.volume + self.gaussian


def lclt_decomposition(env: Environment, n: int, x: float, t: float, eta: float = 0.75,
                       tol: float = 1e-10) -> LCLTTerms:
    """Split ``|E[tau_0] n p - phi|`` into four nonnegative terms whose sum bounds it.

    The cell is the half-open interval of width ``floor(n^eta)`` containing
    ``floor(n x)``.
    """
    from scipy.special import ndtr

    m = mean_trap(env.alpha)
    y = int(math.floor(n * x + 1e-9))
    w = max(1, int(math.floor(n ** eta + 1e-9)))
    lo = (y // w) * w
    hi = lo + w - 1
    T = m * n * n * t
    gen = generator_for(env, 0, T, tol, extra=(lo, hi))
    row = transition_rows(gen, 0, [T], tol)[0]
    taus = gen.env.slice(lo, hi)
    P = sum(row.prob(z) for z in range(lo, hi + 1))
    V = math.fsum(taus)
    s = math.sqrt(t)
    phi_I = float(ndtr((hi + 1) / n / s) - ndtr(lo / n / s))
    f = m * n * row.prob(y) / float(gen.env.tau(y))
    g = float(gaussian_density(x, t))
    return LCLTTerms(
        n, x, t, abs(f - g),
        abs(f - m * n * P / V),
        m * n * abs(P - phi_I) / V,
        n * phi_I / w * abs(m * w / V - 1.0),
        abs(n * phi_I / w - g),
    )


# ---------------------------------------------------------------------------
# annealed heat-kernel statistics


def _ensemble_diagonals(alpha, t_grid, n_envs, seed, tol):
    times = _times(t_grid)
    out = np.empty((n_envs, times.size))
    for i in range(n_envs):
        env = sample_environment(alpha, (-8, 8), walk.ensemble_seed(seed, i))
        out[i] = ondiagonal(env, 0, times, tol)
    return times, out


def annealed_moment(alpha: float, eps: float, t_grid, n_envs: int, seed: int,
                    tol: float = 1e-10) -> ResultTable:
    """``mean over landscapes of p_t(0,0)^eps``, divided by ``phi_alpha(t)^eps``."""
    alpha = float(alpha)
    if not 0 <= eps <= 1:
        raise ParameterError(f"eps must lie in [0, 1], got {eps}")
    if eps == 1 and not alpha > 1.5:
        raise RegimeError(f"the first moment needs alpha > 3/2, got alpha = {alpha}")
    if n_envs < 1:
        raise ParameterError("n_envs must be >= 1")
    times, p = _ensemble_diagonals(alpha, t_grid, n_envs, seed, tol)
    vals = p ** eps
    est, se = _mean_se(vals)
    phi = np.array([phi_alpha(t, alpha) for t in times]) ** eps
    rows = [(float(t), float(e / f), float(s / f)) for t, e, s, f in zip(times, est, se, phi)]
    return ResultTable(["t", "ratio", "se"], rows,
                       {"alpha": alpha, "eps": eps, "n_envs": n_envs, "seed": seed, "tol": tol})


def tightness_probe(alpha: float, t_grid, n_envs: int, lam, seed: int,
                    tol: float = 1e-10) -> ResultTable:
    """Fraction of landscapes with ``p_t(0,0)/phi_alpha(t)`` in ``[1/lam, lam]`` for each lam."""
    alpha = float(alpha)
    lams = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if np.any(lams < 1):
        raise ParameterError("lambda must be >= 1")
    if n_envs < 1:
        raise ParameterError("n_envs must be >= 1")
    times, p = _ensemble_diagonals(alpha, t_grid, n_envs, seed, tol)
    ratio = p / np.array([phi_alpha(t, alpha) for t in times])[None, :]
    rows = []
    for L in lams:
        inside = (ratio >= 1.0 / L) & (ratio <= L)
        for j, t in enumerate(times):
            c = float(inside[:, j].mean())
            rows.append((float(L), float(t), c, math.sqrt(c * (1 - c) / n_envs),
                         float(ratio[:, j].min()), float(ratio[:, j].max())))
    return ResultTable(["lambda", "t", "coverage", "se", "ratio_min", "ratio_max"], rows,
                       {"alpha": alpha, "n_envs": n_envs, "seed": seed, "tol": tol})
