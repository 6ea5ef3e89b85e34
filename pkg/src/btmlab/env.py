"""Pareto trap landscapes and volume analytics of the invariant measure.

The trap depths satisfy ``P[tau_0 >= u] = u**(-alpha)`` for ``u >= 1``.
``alpha = inf`` is accepted everywhere as the homogeneous control
``tau == 1`` (the inverse CDF degenerates to the constant 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _rng
from .errors import InfiniteMeanError, ParameterError, RangeError
from .table import ResultTable


@dataclass(frozen=True)
class Environment:
    """A contiguous window ``[offset, offset + len(taps) - 1]`` of trap depths.

    ``seed`` is ``None`` for hand-built landscapes; only seeded landscapes can
    be extended, because extension re-evaluates the per-site sampler.
    """

    alpha: float
    offset: int
    taps: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size < 1:
            raise ParameterError("an environment needs at least one site")
        if not np.all(taps >= 1.0):
            raise ParameterError("trap depths must be >= 1")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.taps.size - 1

    def __len__(self):
        return self.taps.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def contains(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def tau(self, x):
        """Trap depth(s) at site(s) ``x``; raises RangeError outside the window."""
        x = np.asarray(x)
        if np.any(x < self.lo) or np.any(x > self.hi):
            raise RangeError(f"site(s) outside window [{self.lo}, {self.hi}]")
        out = self.taps[x - self.offset]
        return float(out) if out.ndim == 0 else out

    def slice(self, lo: int, hi: int) -> np.ndarray:
        if not self.contains(lo, hi):
            raise RangeError(f"[{lo}, {hi}] not inside [{self.lo}, {self.hi}]")
        return self.taps[lo - self.offset: hi - self.offset + 1]

    @property
    def extendable(self) -> bool:
        return self.seed is not None

    def extend(self, lo: int, hi: int) -> "Environment":
        """Environment covering the union of the current window and [lo, hi]."""
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        if lo == self.lo and hi == self.hi:
            return self
        if not self.extendable:
            raise RangeError(
                f"unseeded environment [{self.lo}, {self.hi}] cannot grow to [{lo}, {hi}]"
            )
        return sample_environment(self.alpha, (lo, hi), self.seed)

    def covering(self, lo: int, hi: int) -> "Environment":
        return self if self.contains(lo, hi) else self.extend(lo, hi)

    def shifted(self, dx: int) -> "Environment":
        """Same landscape relabelled so that old site ``x`` becomes ``x - dx``."""
        return Environment(self.alpha, self.offset - dx, self.taps, None)

    # serialization --------------------------------------------------------
    def to_table(self) -> ResultTable:
        params = {"alpha": self.alpha, "offset": self.offset,
                  "seed": "none" if self.seed is None else self.seed}
        rows = [(int(s), float(t)) for s, t in zip(self.sites, self.taps)]
        return ResultTable(["site", "tau"], rows, params)

    def write_csv(self, path) -> Path:
        return self.to_table().write_csv(path)

    @classmethod
    def read_csv(cls, path) -> "Environment":
        tab = ResultTable.read_csv(path)
        sites = tab.column("site").astype(np.int64)
        if sites.size == 0 or np.any(np.diff(sites) != 1):
            raise ParameterError("environment CSV must list contiguous sites")
        seed = tab.params.get("seed", "none")
        return cls(
            alpha=float(tab.params.get("alpha", "nan")),
            offset=int(sites[0]),
            taps=tab.column("tau"),
            seed=None if seed == "none" else int(seed),
        )


def _check_alpha(alpha):
    alpha = float(alpha)
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    return alpha


def sample_environment(alpha: float, window, seed: int) -> Environment:
    """Sample ``tau_x = U_x**(-1/alpha)`` on ``window = (lo, hi)``.

    ``U_x`` is a counter-based uniform on (0, 1] keyed by ``(seed, x)``, so
    a site's depth does not depend on the window it was sampled in.
    """
    alpha = _check_alpha(alpha)
    lo, hi = (int(w) for w in window)
    if lo > hi:
        raise ParameterError(f"empty window [{lo}, {hi}]")
    key = _rng.stream_key(seed, _rng.STREAM_ENV)
    taps = _rng.fill_taus(key, np.int64(lo), np.int64(hi), alpha)
    return Environment(alpha, lo, taps, int(seed))


def env_key(seed: int) -> np.uint64:
    """Key used by :func:`sample_environment`; lets compiled code sample sites lazily."""
    return _rng.stream_key(seed, _rng.STREAM_ENV)


def constant_environment(lo: int, hi: int, value: float = 1.0) -> Environment:
    """Deterministic flat landscape (alpha recorded as inf)."""
    return Environment(math.inf, lo, np.full(hi - lo + 1, float(value)), None)


def volume(env: Environment, x: int, n: int) -> float:
    """``V(x, n) = sum_{y=x-n}^{x+n} tau_y`` (exactly rounded)."""
    if n < 0:
        raise ParameterError("radius must be >= 0")
    if not env.contains(x - n, x + n):
        raise RangeError(f"[{x - n}, {x + n}] not inside [{env.lo}, {env.hi}]")
    return math.fsum(env.slice(x - n, x + n))


def mean_trap(alpha: float) -> float:
    """``E[tau_0] = alpha / (alpha - 1)``; 1 for the homogeneous control."""
    alpha = _check_alpha(alpha)
    if alpha <= 1:
        raise InfiniteMeanError(f"E[tau_0] is infinite for alpha = {alpha} <= 1")
    if math.isinf(alpha):
        return 1.0
    return alpha / (alpha - 1.0)


def var_trap(alpha: float) -> float:
    alpha = _check_alpha(alpha)
    if alpha <= 2:
        raise InfiniteMeanError(f"Var(tau_0) is infinite for alpha = {alpha} <= 2")
    if math.isinf(alpha):
        return 0.0
    return alpha / ((alpha - 1.0) ** 2 * (alpha - 2.0))


class TruncatedStats(NamedTuple):
    quantile: float
    mean: float
    variance: float


def truncated_stats(alpha: float, c_F: float, s: float) -> TruncatedStats:
    """Truncation statistics of ``F(x) = 1 - c_F x**(-alpha)`` at level ``s``.

    Returns the quantile ``Q(s)``, the truncated mean ``mu(s) = int_0^{1-s} Q`` and the
    truncated variance ``s Q(1-s)^2 + int_0^{1-s} Q^2 - (s Q(1-s) + mu(s))^2``.
    """
    alpha = _check_alpha(alpha)
    if not 0 < alpha < 2:
        raise ParameterError("truncated statistics need alpha in (0, 2)")
    if not c_F > 0:
        raise ParameterError("c_F must be > 0")
    if not 0 < s < 1:
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    c1 = c_F ** (1.0 / alpha)
    c2 = c_F ** (2.0 / alpha)
    q = c1 * (1.0 - s) ** (-1.0 / alpha)
    if alpha == 1.0:
        mu = -c_F * math.log(s)
    else:
        mu = c1 * alpha / (1.0 - alpha) * (s ** (1.0 - 1.0 / alpha) - 1.0)
    top = c1 * s ** (1.0 - 1.0 / alpha)                     # s * Q(1 - s)
    sq_int = c2 * alpha / (2.0 - alpha) * (s ** (1.0 - 2.0 / alpha) - 1.0)
    var = c2 * s ** (1.0 - 2.0 / alpha) + sq_int - (top + mu) ** 2
    return TruncatedStats(q, mu, var)
