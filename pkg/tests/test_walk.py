import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson
from scipy.stats import ks_2samp

from btmlab import walk
from btmlab.env import mean_trap, sample_environment
from btmlab.errors import ParameterError, RangeError
from btmlab.kernel import expected_exit_time, generator_for, transition_rows


def flat(w=200):
    return sample_environment(math.inf, (-w, w), 0)


# single trajectories ----------------------------------------------------------

def test_zero_horizon_has_no_events():
    tr = walk.simulate_direct(flat(), 0, 0.0, walk.RNGStream(1))
    assert tr.times.size == 0 and tr.position(0.0) == 0 and tr.jump_count(0.0) == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.sampled_from([0.5, 1.5, 3.0]))
def test_trajectory_invariants(seed, alpha):
    env = sample_environment(alpha, (-20, 20), seed)
    tr = walk.simulate_direct(env, 0, 200.0, walk.RNGStream(seed))
    assert np.all(np.diff(tr.times) > 0)
    assert np.all(np.abs(np.diff(tr.path)) == 1)
    assert tr.times.size == 0 or tr.times[-1] <= 200.0


def test_trajectory_deterministic():
    env = sample_environment(3.0, (-30, 30), 4)
    a = walk.simulate_direct(env, 0, 500.0, walk.RNGStream(9, replicate=3))
    b = walk.simulate_direct(env, 0, 500.0, walk.RNGStream(9, replicate=3))
    c = walk.simulate_direct(env, 0, 500.0, walk.RNGStream(9, replicate=4))
    assert np.array_equal(a.times, b.times) and np.array_equal(a.sites, b.sites)
    assert not np.array_equal(a.sites, c.sites)


def test_trajectory_leaves_initial_window():
    env = sample_environment(3.0, (-2, 2), 4)
    tr = walk.simulate_direct(env, 0, 2000.0, walk.RNGStream(1))
    assert np.abs(tr.path).max() > 2


@pytest.mark.parametrize("alpha", [0.4, 3.0, math.inf])
def test_shared_stream_makes_constructions_coincide(alpha):
    env = sample_environment(alpha, (-50, 50), 2)
    stream = walk.RNGStream(7, 11, 5)
    a = walk.simulate_direct(env, 0, 300.0, stream)
    b = walk.simulate_timechange(env, 0, 300.0, stream)
    assert np.array_equal(a.sites, b.sites)
    assert np.allclose(a.times, b.times, rtol=1e-12)


def test_homogeneous_scenery_clock_is_identity():
    traj, clock = walk.simulate_scenery(flat(), 0, 50.0, walk.RNGStream(3))
    for s in np.linspace(0, clock.horizon, 17):
        assert walk.scenery_functional(clock, s) == pytest.approx(s, rel=1e-12, abs=1e-12)
    assert clock.horizon == pytest.approx(50.0)


def test_scenery_clock_properties():
    env = sample_environment(1.2, (-40, 40), 6)
    traj, clock = walk.simulate_scenery(env, 0, 400.0, walk.RNGStream(8))
    assert walk.scenery_functional(clock, 0.0) == 0.0
    s = np.linspace(0, clock.horizon, 200)
    a = np.array([clock.value(v) for v in s])
    assert np.all(np.diff(a) > 0)
    assert np.all(a >= s - 1e-9)
    assert clock.value(clock.horizon) == pytest.approx(400.0, rel=1e-12)
    # before the first jump of Y the clock runs at slope tau_{x0}
    first = clock.y_times[0]
    assert clock.value(0.5 * first) == pytest.approx(env.tau(0) * 0.5 * first, rel=1e-12)
    # the jump times of X are the clock at the jump times of Y
    for k in range(min(20, clock.y_times.size)):
        assert traj.times[k] == pytest.approx(clock.value(clock.y_times[k]), rel=1e-12)
    with pytest.raises(RangeError):
        clock.value(clock.horizon * 1.01)


def test_quadratic_variation_counts_jumps():
    env = sample_environment(3.0, (-50, 50), 3)
    tr = walk.simulate_direct(env, 0, 200.0, walk.RNGStream(2))
    qv = walk.quadratic_variation(tr, 200.0, powers=(2, 4, 1))
    assert qv["jumps"] == tr.times.size
    assert qv[2] == qv[4] == qv[1] == qv["jumps"]
    assert walk.quadratic_variation(tr, 0.0)["jumps"] == 0
    with pytest.raises(RangeError):
        walk.quadratic_variation(tr, 201.0)


def test_holding_time_mean_matches_trap():
    env = sample_environment(1.5, (-60, 60), 13)
    x = int(np.argmax(env.taps)) + env.lo
    tau = env.tau(x)
    holds = np.empty(10**4)
    for r in range(holds.size):
        tr = walk.simulate_direct(env, x, 60 * tau, walk.RNGStream(5, replicate=r))
        holds[r] = tr.times[0]
    se = holds.std() / math.sqrt(holds.size)
    assert abs(holds.mean() - tau) < 4 * se


# bulk -------------------------------------------------------------------------

def test_homogeneous_jump_count_is_poisson():
    ends = walk.walk_endpoints(flat(), [100.0], 10**5, 3)
    n = ends.jumps[:, 0]
    assert abs(n.mean() - 100.0) < 4 * math.sqrt(100.0 / 1e5)


def test_bulk_matches_single_trajectories():
    env = sample_environment(3.0, (-40, 40), 2)
    times = np.array([5.0, 40.0, 90.0])
    ends = walk.walk_endpoints(env, times, 20, 17)
    for r in range(20):
        tr = walk.simulate_direct(env, 0, 90.0, walk.RNGStream(17, walk._rng.STREAM_DIRECT, r))
        for j, t in enumerate(times):
            assert ends.positions[r, j] == tr.position(t)
            assert ends.jumps[r, j] == tr.jump_count(t)


def test_bulk_reruns_replicates_that_leave_the_window():
    small = sample_environment(3.0, (-3, 3), 2)
    big = sample_environment(3.0, (-400, 400), 2)
    a = walk.walk_endpoints(small, [2000.0], 300, 5)
    b = walk.walk_endpoints(big, [2000.0], 300, 5)
    assert np.array_equal(a.positions, b.positions)


def test_bulk_deterministic():
    env = sample_environment(3.0, (-40, 40), 2)
    a = walk.walk_endpoints(env, [10.0, 100.0], 1000, 8)
    b = walk.walk_endpoints(env, [10.0, 100.0], 1000, 8)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.jumps, b.jumps)


def test_martingale_mean():
    env = sample_environment(3.0, (-100, 100), 4)
    x = walk.walk_endpoints(env, [500.0], 10**5, 6).positions[:, 0]
    assert abs(x.mean()) < 4 * x.std() / math.sqrt(x.size)


@pytest.mark.parametrize("t", [100.0, 1000.0])
def test_simulators_agree_in_distribution(t):
    env = sample_environment(3.0, (-200, 200), 10)
    a = walk.walk_endpoints(env, [t], 10**5, 1, method=walk.DIRECT).positions[:, 0]
    b = walk.walk_endpoints(env, [t], 10**5, 1, method=walk.TIMECHANGE).positions[:, 0]
    d = walk.ks_two_sample(a, b)
    assert d == pytest.approx(ks_2samp(a, b).statistic, abs=1e-15)
    assert d < walk.ks_critical(a.size, b.size, 1e-3)


def test_mean_jump_count_matches_exact_compensator():
    # E[N_t] = int_0^t E[1 / tau_{X_s}] ds, the integrand evaluated with exact kernel rows
    env = sample_environment(3.0, (-150, 150), 12)
    t = 100.0
    gen = generator_for(env, 0, t)
    grid = np.linspace(0, t, 2001)
    rows = transition_rows(gen, 0, grid)
    rate = np.array([np.sum(r.probs / gen.taus) for r in rows])
    exact = simpson(rate, x=grid)
    n = walk.walk_endpoints(env, [t], 10**4, 4).jumps[:, 0]
    assert abs(n.mean() - exact) < 4 * n.std() / math.sqrt(n.size)


def test_jump_rate_approaches_inverse_mean_trap():
    ends = walk.annealed_endpoints(3.0, [100.0, 1000.0, 10000.0], 4000, 3)
    rate = ends.jumps.mean(axis=0) / np.array([100.0, 1000.0, 10000.0])
    gap = np.abs(rate - 1 / mean_trap(3.0))
    assert gap[-1] < gap[0]
    assert gap[-1] < 0.01
    assert np.all(ends.jumps[:, -1] / 1e4 <= 1.1)


def test_annealed_replicates_use_ensemble_landscapes():
    ends = walk.annealed_endpoints(3.0, [50.0, 80.0], 5, 9)
    for r in range(5):
        env = sample_environment(3.0, (-100, 100), walk.ensemble_seed(9, r))
        tr = walk.simulate_direct(env, 0, 80.0, walk.RNGStream(9, walk._rng.STREAM_DIRECT, r))
        assert ends.positions[r, 1] == tr.position(80.0)
        assert ends.jumps[r, 0] == tr.jump_count(50.0)


def test_scenery_samples_homogeneous_identity():
    vals = walk.scenery_samples(flat(), [3.0, 30.0], 200, 2)
    assert np.allclose(vals, [3.0, 30.0], rtol=1e-12)


def test_scenery_mean_ergodic():
    vals = walk.scenery_samples(None, [1000.0], 10**4, 4, alpha=3.0)[:, 0] / 1000.0
    assert abs(vals.mean() - mean_trap(3.0)) < 4 * vals.std() / math.sqrt(vals.size)
    assert vals.min() >= 1.0


def test_scenery_samples_match_single_clock():
    env = sample_environment(2.5, (-30, 30), 3)
    vals = walk.scenery_samples(env, [4.0, 25.0], 10, 6)
    for r in range(10):
        _, clock = walk.simulate_scenery(env, 0, 400.0,
                                         walk.RNGStream(6, walk._rng.STREAM_TIMECHANGE, r))
        assert vals[r, 0] == pytest.approx(clock.value(4.0), rel=1e-12)
        assert vals[r, 1] == pytest.approx(clock.value(25.0), rel=1e-12)


def test_exit_time_mc_vs_linear_solve():
    env = sample_environment(3.0, (-10, 10), 21)
    t = walk.exit_times(env, 0, 8, 10**5, 3)
    exact = expected_exit_time(env, 0, 8, 0)
    assert abs(t.mean() - exact) < 4 * t.std() / math.sqrt(t.size)


def test_observation_time_validation():
    with pytest.raises(ParameterError):
        walk.walk_endpoints(flat(), [5.0, 1.0], 10, 1)
    with pytest.raises(ParameterError):
        walk.walk_endpoints(flat(), [], 10, 1)


# distances ----------------------------------------------------------------------

def test_normal_cdf_oracle():
    mpmath.mp.dps = 40
    xs = np.concatenate([np.linspace(-8, 8, 161), [-37.0, -20.0, 1.959964]])
    got = walk.std_normal_cdf(xs)
    for x, g in zip(xs, got):
        assert abs(g - float(mpmath.ncdf(x))) <= 1e-12
    assert walk.std_normal_cdf(0.0) == 0.5
    assert walk.std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-30, 30))
def test_normal_cdf_symmetry(x):
    assert abs(walk.std_normal_cdf(-x) - (1 - walk.std_normal_cdf(x))) <= 1e-14


def test_kolmogorov_single_sample_at_median():
    assert walk.kolmogorov_distance([0.0]) == 0.5


def test_kolmogorov_reference_samples_within_dkw_band():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(10**5)
    assert walk.kolmogorov_distance(x) <= 1.95 / math.sqrt(x.size)


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.floats(-5, 5), min_size=1, max_size=60))
def test_kolmogorov_matches_brute_force(xs):
    x = np.array(xs)
    d = walk.kolmogorov_distance(x)
    assert 0 <= d <= 1
    # brute force over both one-sided limits of the empirical CDF at every sample
    s = np.sort(x)
    ecdf_r = np.searchsorted(s, s, side="right") / s.size
    ecdf_l = np.searchsorted(s, s, side="left") / s.size
    f = walk.std_normal_cdf(s)
    brute = max(np.max(np.abs(ecdf_r - f)), np.max(np.abs(ecdf_l - f)))
    assert d == pytest.approx(brute, abs=1e-15)
    dup = np.concatenate([x, x[:1]])
    assert walk.kolmogorov_distance(dup) == walk.kolmogorov_distance(dup.copy())


def test_kolmogorov_empty_is_error():
    with pytest.raises(ParameterError):
        walk.kolmogorov_distance([])


def test_ks_critical_value():
    assert walk.ks_critical(10**5, 10**5, 1e-3) == pytest.approx(0.00872, abs=1e-5)
