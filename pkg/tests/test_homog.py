import math

import numpy as np
import pytest
from scipy.special import ive

from btmlab import homog
from btmlab.env import Environment, constant_environment, sample_environment
from btmlab.errors import ParameterError, RegimeError


def flat(w=100):
    return sample_environment(math.inf, (-w, w), 0)


def test_gaussian_reference_value():
    assert homog.gaussian_density(0.0, 1.0) == pytest.approx(0.3989422804014327, rel=1e-15)


def test_sigma2_is_analytic():
    assert homog.sigma2(3.0) == pytest.approx(2 / 3)
    assert homog.sigma2(math.inf) == 1.0


# Berry-Esseen ---------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [2.0, 1.5, 0.5])
def test_berry_esseen_regime(alpha):
    with pytest.raises(RegimeError):
        homog.berry_esseen(homog.QUENCHED, alpha, [10], 100, 1)


def test_berry_esseen_mode_validation():
    with pytest.raises(ParameterError):
        homog.berry_esseen("sideways", 3.0, [10], 100, 1)


def test_berry_esseen_deterministic_and_bounded():
    a = homog.berry_esseen(homog.QUENCHED, 3.0, [25, 100], 5000, 4)
    b = homog.berry_esseen(homog.QUENCHED, 3.0, [25, 100], 5000, 4)
    assert np.array_equal(a.D, b.D)
    assert np.all((a.D >= 0) & (a.D <= 1))
    assert a.sigma2 == pytest.approx(2 / 3)
    assert a.noise_floor == pytest.approx(1 / math.sqrt(5000))
    assert a.to_table().columns == ["t", "D"]


def test_berry_esseen_annealed_runs():
    r = homog.berry_esseen(homog.ANNEALED, 4.0, [25, 400], 20000, 2)
    assert np.all((r.D >= 0) & (r.D <= 1))
    assert r.D[1] < r.D[0]


def test_berry_esseen_homogeneous_lattice_floor():
    # the rate-1 walk has an atom of mass ~ (2 pi t)^-1/2 at 0, so D(t) >= half of it
    r = homog.berry_esseen(homog.QUENCHED, math.inf, [100.0], 20000, 5)
    atom = ive(0, 100.0)
    assert r.D[0] >= atom / 2 - 2 / math.sqrt(20000)


# quadratic variation and scenery ---------------------------------------------------

def test_qv_error_poisson_oracle():
    r = homog.qv_error(flat(), [100.0], 10**4, 3)
    assert abs(r.estimate[0] - 1 / 100) < 4 * r.se[0]
    assert np.all(r.estimate >= 0)


def test_qv_error_decays():
    env = sample_environment(3.0, (-200, 200), 2)
    r = homog.qv_error(env, [10.0, 1000.0], 4000, 5)
    assert r.estimate[1] < r.estimate[0]
    assert r.exponent < 0


def test_qv_error_regime():
    with pytest.raises(RegimeError):
        homog.qv_error(sample_environment(2.0, (-5, 5), 1), [10.0], 10, 1)


def test_scenery_error_zero_for_flat_scenery():
    env = flat()
    r = homog.scenery_error(homog.QUENCHED, math.inf, [10.0, 100.0], 500, 1, env=env, centering=1.0)
    assert np.all(np.abs(r.estimate) < 1e-20)


def test_scenery_error_regime():
    with pytest.raises(RegimeError):
        homog.scenery_error(homog.ANNEALED, 2.0, [10.0], 10, 1)


def test_scenery_error_quenched_growth_below_two():
    r = homog.scenery_error(homog.QUENCHED, 3.0, [100.0, 1000.0, 10000.0], 2000, 7)
    assert r.exponent <= 1.95
    assert np.all(r.estimate >= 0)


# LCLT --------------------------------------------------------------------------------

def test_theta_range():
    env = flat()
    with pytest.raises(ParameterError):
        homog.lclt_error(env, [8], theta=0.2)
    with pytest.raises(ParameterError):
        homog.lclt_error(env, [8], theta=0.0)
    with pytest.raises(RegimeError):
        homog.lclt_error(sample_environment(2.0, (-5, 5), 1), [8])


def test_lclt_homogeneous_control():
    r = homog.lclt_error(flat(10), [8, 16, 32, 64])
    assert r.error[-1] < 0.02
    assert np.all(np.diff(r.error) < 0)
    assert np.all(r.error >= 0)


def test_lclt_surface_homogeneous_matches_bessel():
    env = flat(10)
    surf = homog.lclt_surface(env, 10, [0.0, 0.5], [1.0])
    assert surf[0, 0] == pytest.approx(10 * ive(0, 100.0), rel=1e-8)
    assert surf[0, 1] == pytest.approx(10 * ive(5, 100.0), rel=1e-8)


def test_lclt_random_landscape_improves():
    env = sample_environment(3.0, (-10, 10), 1)
    r = homog.lclt_error(env, [20, 40, 80])
    assert r.error[1] < r.error[0] and r.error[2] < r.error[1]
    assert np.all(np.isfinite(r.scaled))


@pytest.mark.parametrize("x,t", [(0.0, 1.0), (0.5, 1.5), (-1.3, 2.0)])
def test_lclt_terms_bound_the_error(x, t):
    env = sample_environment(3.0, (-10, 10), 4)
    terms = homog.lclt_decomposition(env, 30, x, t)
    assert min(terms.local, terms.clt, terms.volume, terms.gaussian) >= 0
    assert terms.error <= terms.total + 1e-12
    direct = homog.lclt_surface(env, 30, [x], [t])[0, 0]
    assert terms.error == pytest.approx(abs(direct - homog.gaussian_density(x, t)), abs=1e-12)


def test_lclt_terms_vanish_where_expected_for_flat_scenery():
    terms = homog.lclt_decomposition(flat(10), 40, 0.5, 1.0)
    assert terms.volume == 0.0


# cells ---------------------------------------------------------------------------------

@pytest.mark.parametrize("N,a,eta,h", [(8, 2.0, 0.75, 1.0), (5, 3.0, 0.6, 0.5), (10, 1.5, 0.9, 2.0)])
def test_cells_cover_ball(N, a, eta, h):
    part = homog.CellPartition(N, a, eta, h)
    starts = part.starts
    w = part.width
    assert w == math.floor(a ** (eta * N) + 1e-9)
    assert np.all(np.diff(starts) == w)
    assert starts[0] <= -part.radius and starts[-1] + w - 1 >= part.radius
    # no superfluous cells
    assert starts[0] + w - 1 >= -part.radius and starts[-1] <= part.radius
    lo, hi = part.cell_of(17)
    assert lo <= 17 <= hi and hi - lo + 1 == w


def test_cell_partition_validation():
    with pytest.raises(ParameterError):
        homog.CellPartition(5, 1.0, 0.75, 1.0)
    with pytest.raises(ParameterError):
        homog.CellPartition(5, 2.0, 0.4, 1.0)


def test_constant_scenery_has_zero_cell_deviation():
    env = sample_environment(math.inf, (-10, 10), 0)
    part = homog.CellPartition(9, 2.0, 0.75, 1.0)
    dev, const = homog.cell_volume_check(env, part, 0.6)
    assert dev == 0.0 and const == 0.0


def test_cell_volumes_sum_directly():
    env = sample_environment(3.0, (-10, 10), 2)
    part = homog.CellPartition(6, 2.0, 0.75, 1.0)
    vols = homog.cell_volumes(env, part)
    big = env.covering(int(part.starts[0]), int(part.starts[-1]) + part.width)
    for s, v in zip(part.starts, vols):
        assert v == pytest.approx(math.fsum(big.slice(int(s), int(s) + part.width - 1)), rel=1e-12)


def test_kappa_range():
    part = homog.CellPartition(6, 2.0, 0.75, 1.0)
    for kappa in (0.5, 0.75, 0.9):
        with pytest.raises(ParameterError):
            homog.cell_volume_check(flat(), part, kappa)


def test_cell_constants_do_not_grow():
    env = sample_environment(3.0, (-10, 10), 1)
    tab = homog.cell_volume_scan(env, range(8, 15), 2.0, 0.75, 1.0, 0.6)
    assert tab.params["slope"] <= 0.6 * math.log(2.0) + 0.1
    c = tab.column("constant")
    assert c.max() / c.min() < 5


# annealed heat-kernel statistics --------------------------------------------------------

def test_zeroth_moment_is_one():
    tab = homog.annealed_moment(0.7, 0.0, [10.0, 100.0], 5, 1)
    assert np.all(tab.column("ratio") == 1.0)


def test_moment_regime_and_range():
    with pytest.raises(RegimeError):
        homog.annealed_moment(1.2, 1.0, [10.0], 3, 1)
    with pytest.raises(ParameterError):
        homog.annealed_moment(3.0, 1.5, [10.0], 3, 1)


def test_first_moment_homogeneous():
    tab = homog.annealed_moment(math.inf, 1.0, [1e4], 3, 1)
    assert tab.column("ratio")[0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.03)


def test_first_moment_band_alpha_three():
    tab = homog.annealed_moment(3.0, 1.0, [1e2, 1e3, 1e4], 200, 2)
    r = tab.column("ratio")
    assert np.all((r >= 0.2) & (r <= 2))


def test_fractional_moment_positive():
    tab = homog.annealed_moment(0.5, 0.5, [100.0, 1000.0], 40, 3)
    assert np.all(tab.column("ratio") > 0)


def test_tightness_coverage():
    tab = homog.tightness_probe(0.5, [100.0, 1000.0], 60, [2.0, 10.0, 1e6], 4)
    lam = tab.column("lambda")
    cov = tab.column("coverage")
    assert np.all(cov[lam == 1e6] == 1.0)
    for t in (100.0, 1000.0):
        c = cov[tab.column("t") == t]
        assert np.all(np.diff(c) >= 0)
    with pytest.raises(ParameterError):
        homog.tightness_probe(0.5, [10.0], 3, [0.5], 1)


def test_unseeded_flat_landscape_works_for_kernels():
    env = constant_environment(-400, 400)
    r = homog.lclt_error(Environment(math.inf, env.lo, env.taps), [8], K=1.0)
    assert r.error[0] < 0.05
