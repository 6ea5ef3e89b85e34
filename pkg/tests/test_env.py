import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from btmlab import _rng
from btmlab.env import (
    Environment,
    constant_environment,
    mean_trap,
    sample_environment,
    truncated_stats,
    var_trap,
    volume,
)
from btmlab.errors import InfiniteMeanError, ParameterError, RangeError


def test_inverse_cdf_boundary_values():
    # U = 1 gives the support endpoint; alpha = 1 and U = 0.25 gives 4
    assert 1.0 ** (-1.0 / 3.0) == 1.0
    assert 0.25 ** (-1.0 / 1.0) == 4.0


def test_uniform_stream_in_half_open_unit_interval():
    key = _rng.stream_key(5, 1)
    us = np.array([_rng.key_uniform(np.uint64(_rng.derive(key, i))) for i in range(20000)])
    assert us.min() > 0.0 and us.max() <= 1.0
    assert abs(us.mean() - 0.5) < 4 * math.sqrt(1 / 12 / us.size)


def test_samples_bounded_below():
    env = sample_environment(0.3, (-500, 500), 7)
    assert env.taps.min() >= 1.0
    assert len(env) == 1001


def test_deterministic_per_seed():
    a = sample_environment(3.0, (-50, 50), 42)
    b = sample_environment(3.0, (-50, 50), 42)
    c = sample_environment(3.0, (-50, 50), 43)
    assert np.array_equal(a.taps, b.taps)
    assert not np.array_equal(a.taps, c.taps)


def test_window_growth_preserves_sites():
    small = sample_environment(1.5, (-100, 100), 9)
    big = sample_environment(1.5, (-200, 200), 9)
    assert np.array_equal(small.taps, big.slice(-100, 100))
    grown = small.extend(-150, 300)
    assert np.array_equal(grown.slice(-100, 100), small.taps)
    assert grown.lo == -150 and grown.hi == 300


def test_empirical_tail_binomial_band():
    alpha = 1.7
    env = sample_environment(alpha, (0, 10**6 - 1), 2024)
    for u in (2.0, 4.0, 8.0):
        p = u ** -alpha
        frac = np.mean(env.taps >= u)
        assert abs(frac - p) <= 4 * math.sqrt(p / 1e6)


def test_sample_mean_matches_mean_trap():
    env = sample_environment(3.0, (0, 10**7 - 1), 77)
    se = env.taps.std() / math.sqrt(len(env))
    assert abs(env.taps.mean() - mean_trap(3.0)) < 4 * se


def test_parameter_errors():
    with pytest.raises(ParameterError):
        sample_environment(0.0, (0, 5), 1)
    with pytest.raises(ParameterError):
        sample_environment(-1.0, (0, 5), 1)
    with pytest.raises(ParameterError):
        sample_environment(2.0, (5, 4), 1)


def test_volume_examples():
    env = constant_environment(-10, 10)
    assert volume(env, 0, 4) == 9.0
    hand = Environment(2.0, -1, [2.0, 3.0, 5.0])
    assert volume(hand, 0, 1) == 10.0
    assert volume(hand, 1, 0) == 5.0


def test_volume_out_of_window_is_range_error():
    hand = Environment(2.0, -1, [2.0, 3.0, 5.0])
    with pytest.raises(RangeError):
        volume(hand, 0, 2)
    with pytest.raises(RangeError):
        hand.tau(7)


@settings(max_examples=50, deadline=None)
@given(x=st.integers(-40, 40), n=st.integers(0, 30), seed=st.integers(0, 2**32))
def test_volume_monotone_and_shift_consistent(x, n, seed):
    env = sample_environment(0.8, (-80, 80), seed)
    v = volume(env, x, n)
    assert volume(env, x, n + 1) >= v
    assert volume(env.shifted(x), 0, n) == v


def test_mean_trap_examples():
    # tail-integral oracle: E[tau] = 1 + int_1^inf u^-alpha du
    for alpha in (3.0, 2.0):
        oracle = 1.0 + integrate.quad(lambda u: u ** -alpha, 1, np.inf)[0]
        assert mean_trap(alpha) == pytest.approx(oracle, rel=1e-10)
    assert mean_trap(3.0) == 1.5
    assert mean_trap(math.inf) == 1.0
    with pytest.raises(InfiniteMeanError):
        mean_trap(1.0)
    with pytest.raises(InfiniteMeanError):
        mean_trap(0.5)


def test_var_trap_against_quadrature():
    alpha = 3.5
    second = 1.0 + integrate.quad(lambda u: 2 * u * u ** -alpha, 1, np.inf)[0]
    assert var_trap(alpha) == pytest.approx(second - mean_trap(alpha) ** 2, rel=1e-9)


def test_truncated_quantile_and_mean_examples():
    q, _, _ = truncated_stats(0.5, 1.0, 0.75)
    assert q == pytest.approx(16.0, rel=1e-14)
    _, mu, _ = truncated_stats(1.0, 2.5, math.exp(-1))
    assert mu == pytest.approx(2.5, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.4, 0.5, 1.0, 1.3])
@pytest.mark.parametrize("s", [0.3, 0.05])
def test_truncated_stats_against_quadrature(alpha, s):
    # variance of the variable Q(U) winsorized at Q(1 - s)
    c_F = 1.7
    Q = lambda u: c_F ** (1 / alpha) * (1 - u) ** (-1 / alpha)
    cap = Q(1 - s)
    m1 = integrate.quad(Q, 0, 1 - s, limit=200)[0]
    m2 = integrate.quad(lambda u: Q(u) ** 2, 0, 1 - s, limit=200)[0]
    var = s * cap**2 + m2 - (s * cap + m1) ** 2
    out = truncated_stats(alpha, c_F, s)
    assert out.mean == pytest.approx(m1, rel=1e-8)
    assert out.variance == pytest.approx(var, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0])
def test_truncated_variance_leading_order(alpha):
    s = 1e-6
    c_F = 1.3
    lead = c_F ** (2 / alpha) * (2 / (2 - alpha)) * s ** (1 - 2 / alpha)
    assert truncated_stats(alpha, c_F, s).variance / lead == pytest.approx(1.0, rel=0.01)


def test_truncated_stats_errors():
    for s in (0.0, 1.0, -0.1):
        with pytest.raises(ParameterError):
            truncated_stats(0.5, 1.0, s)


def test_csv_roundtrip(tmp_path):
    env = sample_environment(2.5, (-5, 7), 3)
    path = env.write_csv(tmp_path / "env.csv")
    first = path.read_text().splitlines()[0]
    assert first.startswith("#") and "alpha=2.5" in first and "seed=3" in first
    back = Environment.read_csv(path)
    assert np.array_equal(back.taps, env.taps)
    assert back.offset == -5 and back.seed == 3 and back.alpha == 2.5


def test_unseeded_environment_cannot_grow():
    env = constant_environment(-3, 3)
    with pytest.raises(RangeError):
        env.extend(-10, 3)
