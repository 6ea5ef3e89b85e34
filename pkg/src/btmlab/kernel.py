"""Exact finite-window semigroup of the trap walk.

Transition probabilities are computed by uniformization with rate 1, which
is admissible because every site's total jump rate ``1/tau_x`` is at most 1.
With ``Q = I + L`` the row ``P_x(X_t = .)`` is the Poisson(t) mixture of
``delta_x Q^k``; the series is cut where a Chernoff bound puts the Poisson
upper tail below ``tol``.  Mass that leaves the window (absorbing mode) is
accounted for exactly and reported as ``leak``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

from .env import Environment, mean_trap, volume
from .errors import DomainError, ParameterError, RangeError, WindowTooSmallError
from .sums import phi_alpha
from .table import ResultTable

ABSORBING = "absorbing"
REFLECTING = "reflecting"


@dataclass(frozen=True)
class Generator:
    """Tridiagonal generator on ``[lo, hi]`` with uniformization constant 1."""

    env: Environment
    lo: int
    hi: int
    boundary: str
    rates: np.ndarray          # total jump rate 1/tau_x per window site
    uniformization: float = 1.0

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def taus(self) -> np.ndarray:
        return self.env.slice(self.lo, self.hi)

    def rate(self, x: int, y: int) -> float:
        """Jump rate x -> y (0 unless |x - y| == 1 and both in window)."""
        if not (self.lo <= x <= self.hi and self.lo <= y <= self.hi):
            raise RangeError(f"({x}, {y}) outside window [{self.lo}, {self.hi}]")
        if abs(x - y) != 1:
            return 0.0
        return 0.5 * self.rates[x - self.lo]

    def matrix(self) -> np.ndarray:
        """Dense generator matrix (rows sum to 0 except absorbing end rows)."""
        n = self.size
        half = 0.5 * self.rates
        m = np.zeros((n, n))
        idx = np.arange(n)
        m[idx, idx] = -self.rates
        m[idx[:-1], idx[:-1] + 1] = half[:-1]
        m[idx[1:], idx[1:] - 1] = half[1:]
        if self.boundary == REFLECTING:
            m[0, 0] += half[0]
            m[-1, -1] += half[-1]
        return m

    def _stay(self) -> np.ndarray:
        stay = 1.0 - self.rates
        if self.boundary == REFLECTING:
            stay = stay.copy()
            stay[0] += 0.5 * self.rates[0]
            stay[-1] += 0.5 * self.rates[-1]
        return stay


def build_generator(env: Environment, window, boundary: str = ABSORBING) -> Generator:
    lo, hi = (int(w) for w in window)
    if hi - lo + 1 < 3:
        raise ParameterError("generator window needs at least 3 sites")
    if boundary not in (ABSORBING, REFLECTING):
        raise ParameterError(f"unknown boundary mode {boundary!r}")
    taus = env.slice(lo, hi)
    return Generator(env, lo, hi, boundary, 1.0 / taus)


class KernelRow(NamedTuple):
    x: int
    t: float
    lo: int
    probs: np.ndarray
    leak: float
    tol: float
    truncation: float   # Poisson mass beyond the cut, <= tol

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.lo + self.probs.size)

    def prob(self, y: int) -> float:
        i = y - self.lo
        if not 0 <= i < self.probs.size:
            raise RangeError(f"site {y} outside kernel window")
        return float(self.probs[i])

    def to_table(self, taus: np.ndarray) -> ResultTable:
        params = {"x": self.x, "t": self.t, "tol": self.tol, "leak": self.leak}
        rows = [(int(y), float(p), float(p / tau))
                for y, p, tau in zip(self.sites, self.probs, taus)]
        return ResultTable(["y", "prob", "density"], rows, params)


def poisson_cutoff(t: float, tol: float) -> int:
    """Smallest K with the Chernoff bound on P[Poisson(t) > K] at most ``tol``."""
    if t == 0:
        return 0
    log_tol = math.log(tol)
    k = max(int(math.ceil(t)), 1)
    def bound(k):
        m = k + 1
        return -t + m * (1.0 + math.log(t) - math.log(m))
    if bound(k) <= log_tol:
        return k
    step = max(1, int(math.sqrt(t)))
    while bound(k + step) > log_tol:
        k += step
    hi = k + step
    while hi - k > 1:
        mid = (k + hi) // 2
        if bound(mid) <= log_tol:
            hi = mid
        else:
            k = mid
    return hi


def window_halfwidth(t: float, tol: float) -> int:
    """Half-width ``w`` with ``P[sup_{s<=t} |Y_s| > w] <= tol`` for the rate-1 walk.

    The trap walk is a slowed-down time change of that walk, so the same
    window bounds its boundary leak.  Uses Doob's inequality on
    ``exp(theta Y)`` with the optimal theta.
    """
    if t <= 0:
        return 1
    log_target = math.log(tol / 2.0)
    def log_bound(w):
        u = w / t
        return -w * math.asinh(u) + t * (math.sqrt(1.0 + u * u) - 1.0)
    w = max(1, int(math.sqrt(t)))
    while log_bound(w) > log_target:
        w = int(w * 1.25) + 1
    lo = max(1, int(w / 1.25) - 1)
    while w - lo > 1:
        mid = (lo + w) // 2
        if log_bound(mid) <= log_target:
            w = mid
        else:
            lo = mid
    return w


@njit(cache=True)
def _sweep(half, stay, init, times, cutoffs, absorbing):
    n = half.size
    nt = times.size
    out = np.zeros((nt, n))
    leak = np.zeros(nt)
    wsum = np.zeros(nt)
    cur = init.copy()
    nxt = np.zeros(n)
    a = n
    b = -1
    for i in range(n):
        if init[i] != 0.0:
            if a == n:
                a = i
            b = i
    if b < 0:
        return out, leak, wsum
    logt = np.empty(nt)
    for j in range(nt):
        logt[j] = math.log(times[j]) if times[j] > 0 else 0.0
    kmax = 0
    for j in range(nt):
        if cutoffs[j] > kmax:
            kmax = cutoffs[j]
    lost = 0.0
    for k in range(kmax + 1):
        lg = math.lgamma(k + 1.0)
        for j in range(nt):
            if k > cutoffs[j]:
                continue
            if times[j] == 0.0:
                w = 1.0 if k == 0 else 0.0
            else:
                lw = -times[j] + k * logt[j] - lg
                w = math.exp(lw) if lw > -745.0 else 0.0
            if w > 0.0:
                wsum[j] += w
                leak[j] += w * lost
                for i in range(a, b + 1):
                    out[j, i] += w * cur[i]
        if k == kmax:
            break
        if absorbing:
            if a == 0:
                lost += cur[0] * half[0]
            if b == n - 1:
                lost += cur[n - 1] * half[n - 1]
        na = a - 1 if a > 0 else 0
        nb = b + 1 if b < n - 1 else n - 1
        for i in range(na, nb + 1):
            v = cur[i] * stay[i]
            if i > 0:
                v += cur[i - 1] * half[i - 1]
            if i < n - 1:
                v += cur[i + 1] * half[i + 1]
            nxt[i] = v
        cur, nxt = nxt, cur
        a = na
        b = nb
    return out, leak, wsum


def propagate(gen: Generator, dist, times, tol: float = 1e-10):
    """Evolve the row vector ``dist`` (indexed by window site) to each time.

    Returns ``(rows, leaks, truncations)`` with ``rows[j]`` the distribution
    at ``times[j]``.  Raises WindowTooSmallError when absorbed mass exceeds
    ``10 * tol``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if np.any(times < 0):
        raise DomainError("time must be >= 0")
    if not 0 < tol <= 1e-6:
        raise ParameterError("tol must lie in (0, 1e-6]")
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (gen.size,):
        raise ParameterError("distribution does not match the generator window")
    cutoffs = np.array([poisson_cutoff(float(t), tol) for t in times], dtype=np.int64)
    half = 0.5 * gen.rates
    rows, leaks, wsum = _sweep(half, gen._stay(), dist, times, cutoffs,
                               gen.boundary == ABSORBING)
    worst = float(leaks.max())
    if worst > 10 * tol:
        raise WindowTooSmallError(worst, 10 * tol)
    return rows, leaks, 1.0 - wsum


def transition_rows(gen: Generator, x: int, times, tol: float = 1e-10) -> list[KernelRow]:
    """``P_x(X_t = .)`` on the generator window for every t in ``times`` (one sweep)."""
    if not gen.lo <= x <= gen.hi:
        raise RangeError(f"start {x} outside window [{gen.lo}, {gen.hi}]")
    init = np.zeros(gen.size)
    init[x - gen.lo] = 1.0
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    rows, leaks, trunc = propagate(gen, init, times, tol)
    return [KernelRow(int(x), float(t), gen.lo, rows[j], float(leaks[j]), tol, float(trunc[j]))
            for j, t in enumerate(times)]


def transition_row(gen: Generator, x: int, t: float, tol: float = 1e-10) -> KernelRow:
    if t < 0:
        raise DomainError("time must be >= 0")
    return transition_rows(gen, x, [t], tol)[0]


def heat_kernel(gen: Generator, x: int, y: int, t: float, tol: float = 1e-10) -> float:
    """``p_t(x, y) = P_x(X_t = y) / tau_y``."""
    row = transition_row(gen, x, t, tol)
    return row.prob(y) / float(gen.env.tau(y))


def generator_for(env: Environment, x: int, t_max: float, tol: float = 1e-10,
                  boundary: str = ABSORBING, extra=None) -> Generator:
    """Generator on a window around ``x`` wide enough for times up to ``t_max``.

    ``extra`` is an optional ``(lo, hi)`` that the window must also contain.
    The environment is extended (per-site seeding) when it is too narrow.
    """
    w = window_halfwidth(t_max, tol)
    lo, hi = x - w, x + w
    if extra is not None:
        lo, hi = min(lo, extra[0]), max(hi, extra[1])
    return build_generator(env.covering(lo, hi), (lo, hi), boundary)


def ondiagonal(env: Environment, x: int, times, tol: float = 1e-10) -> np.ndarray:
    """``p_t(x, x)`` for each t, on an automatically sized window."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    gen = generator_for(env, x, float(times.max()), tol)
    rows = transition_rows(gen, x, times, tol)
    tau_x = float(gen.env.tau(x))
    return np.array([r.prob(x) / tau_x for r in rows])


# Green's function and exit times -------------------------------------------

def _ball(x: int, n: int):
    if n <= 0:
        raise ParameterError("ball radius must be >= 1")
    return x - n + 1, x + n - 1


def _killed_banded(env: Environment, x: int, n: int):
    lo, hi = _ball(x, n)
    inv = 1.0 / env.slice(lo, hi)
    m = hi - lo + 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5 * inv[:-1]     # row i, column i+1
    ab[1, :] = inv
    ab[2, :-1] = -0.5 * inv[1:]     # row i+1, column i
    return lo, hi, ab


def green_matrix(env: Environment, x: int, n: int) -> tuple[int, np.ndarray]:
    """``g_B(y, z)`` for all y, z in ``B(x, n) = {|w - x| < n}``.

    ``g(y, z)`` is the expected time spent at z before leaving B, started
    from y, divided by ``tau_z``.  Returns ``(lo, g)`` with ``g[i, j]`` for
    sites ``lo + i``, ``lo + j``.
    """
    env = env.covering(*_ball(x, n))
    lo, hi, ab = _killed_banded(env, x, n)
    occ = solve_banded((1, 1), ab, np.eye(hi - lo + 1))
    return lo, occ / env.slice(lo, hi)[None, :]


def green_function(env: Environment, x: int, n: int, y: int, z: int) -> float:
    lo, hi = _ball(x, n)
    if not (lo <= y <= hi and lo <= z <= hi):
        return 0.0
    env = env.covering(lo, hi)
    _, _, ab = _killed_banded(env, x, n)
    rhs = np.zeros(hi - lo + 1)
    rhs[z - lo] = 1.0
    # column z of (-L_B)^{-1}: occupation density of z from every start
    occ = solve_banded((1, 1), ab, rhs)
    return float(occ[y - lo] / env.tau(z))


def green_closed_form(x: int, n: int, y: int, z: int) -> float:
    """Closed form of :func:`green_function`; independent of the landscape."""
    if n <= 0:
        raise ParameterError("ball radius must be >= 1")
    if not (abs(y - x) < n and abs(z - x) < n):
        return 0.0
    if y <= z:
        return (n - x + y) * (n + x - z) / n
    return (n + x - y) * (n - x + z) / n


def exit_time_vector(env: Environment, x: int, n: int) -> tuple[int, np.ndarray]:
    env = env.covering(*_ball(x, n))
    lo, hi, ab = _killed_banded(env, x, n)
    return lo, solve_banded((1, 1), ab, np.ones(hi - lo + 1))


def expected_exit_time(env: Environment, x: int, n: int, y: int) -> float:
    """``E_y[T_B]`` for ``B = B(x, n)``, from ``-L_B u = 1`` with ``u = 0`` outside."""
    lo, hi = _ball(x, n)
    if not lo <= y <= hi:
        return 0.0
    lo, u = exit_time_vector(env, x, n)
    return float(u[y - lo])


def effective_resistance(x: int, n: int) -> float:
    """Resistance from x to the complement of B(x, n): two unit-resistor arms of length n."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return n / 2.0


# bound checkers -------------------------------------------------------------

class BoundCheck(NamedTuple):
    name: str
    n: int
    t: float
    lhs: float
    rhs: float
    slack: float
    holds: bool


def check_diagonal_bounds(env: Environment, x: int, n: int, tol: float = 1e-10) -> list[BoundCheck]:
    """Evaluate the on-diagonal upper bound at ``t = 2nV(x,n)`` and the lower
    bound at ``t = (n/2)V(x,n)``.

    Upper: ``p_t(x,x) <= 2 / V(x, n-1)``.
    Lower: ``p_t(x,x) >= V(x,n)^2 / (16 V(x,2n)^3)``.
    """
    if n < 2:
        raise ParameterError("n must be >= 2")
    env = env.covering(x - 2 * n, x + 2 * n)
    v_n = volume(env, x, n)
    v_nm1 = volume(env, x, n - 1)
    v_2n = volume(env, x, 2 * n)
    t_up = 2.0 * n * v_n
    t_low = 0.5 * n * v_n
    p_up, p_low = ondiagonal(env, x, [t_up, t_low], tol)
    rhs_up = 2.0 / v_nm1
    rhs_low = v_n ** 2 / (16.0 * v_2n ** 3)
    return [
        BoundCheck("upper", n, t_up, float(p_up), rhs_up, rhs_up - p_up, bool(p_up <= rhs_up)),
        BoundCheck("lower", n, t_low, float(p_low), rhs_low, p_low - rhs_low, bool(p_low >= rhs_low)),
    ]


def checks_table(checks) -> ResultTable:
    """Bound checks as rows ``(name, n, t, lhs, rhs, slack, holds)``; ``name`` is 0 upper, 1 lower."""
    code = {"upper": 0, "lower": 1}
    rows = [(code[c.name], c.n, c.t, c.lhs, c.rhs, c.slack, bool(c.holds)) for c in checks]
    return ResultTable(["bound", "n", "t", "lhs", "rhs", "slack", "holds"], rows,
                       {"bound_codes": "0=upper,1=lower"})


def check_holder(env: Environment, t: float, xs, tol: float = 1e-10) -> float:
    """Largest ``|p_t(0,x) - p_t(0,y)|^2 / (|x - y| t^{-3/2})`` over pairs in ``xs``."""
    if t < 1:
        raise DomainError("t must be >= 1")
    xs = np.unique(np.asarray(xs, dtype=np.int64))
    if xs.size < 2:
        return 0.0
    gen = generator_for(env, 0, t, tol, extra=(int(xs.min()), int(xs.max())))
    row = transition_row(gen, 0, t, tol)
    dens = row.probs[xs - gen.lo] / gen.env.tau(xs)
    diff = dens[:, None] - dens[None, :]
    dist = np.abs(xs[:, None] - xs[None, :]).astype(np.float64)
    iu = np.triu_indices(xs.size, 1)
    return float(np.max(diff[iu] ** 2 / dist[iu]) * t ** 1.5)


def ondiagonal_trace(env: Environment, t_grid, alpha: float | None = None,
                     tol: float = 1e-10) -> ResultTable:
    """``p_t(0,0)`` along ``t_grid`` with the natural-scale ratios.

    ``alpha`` defaults to the landscape's own exponent; it only selects the
    scaling function.  For alpha > 1 the column ``ratio_mean`` holds
    ``p_t(0,0) / phi(E[tau_0] t)``.
    """
    alpha = env.alpha if alpha is None else float(alpha)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(np.diff(t_grid) <= 0):
        raise ParameterError("t grid must be strictly increasing")
    p = ondiagonal(env, 0, t_grid, tol)
    phi = phi_alpha(t_grid, alpha)
    cols = ["t", "p", "ratio"]
    if alpha > 1:
        cols.append("ratio_mean")
        phim = phi_alpha(mean_trap(alpha) * t_grid, alpha)
    tab = ResultTable(cols, params={"alpha": alpha, "seed": env.seed, "tol": tol})
    for j, t in enumerate(t_grid):
        row = [float(t), float(p[j]), float(p[j] / phi[j])]
        if alpha > 1:
            row.append(float(p[j] / phim[j]))
        tab.append(*row)
    return tab
