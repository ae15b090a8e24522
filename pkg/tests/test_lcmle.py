import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from lctest.density import Normal1D, Uniform1D
from lctest.lcmle import (
    CONCAVITY_TOL,
    DegenerateSampleError,
    PiecewiseLogLinearDensity,
    WeightedSortedSample,
    evaluate_logpdf,
    fit_lcmle,
    log_integral_exp_segment,
    loglik,
    segment_moments,
)

from oracles import brute_force_lcmle_loglik, two_point_scan


# -- segment integral -------------------------------------------------------


def test_segment_constant():
    assert log_integral_exp_segment(0.0, 0.0, 1.0) == 0.0


def test_segment_closed_form():
    assert log_integral_exp_segment(0.0, 1.0, 1.0) == pytest.approx(math.log(math.e - 1), abs=1e-15)
    assert log_integral_exp_segment(0.0, 1.0, 1.0) == pytest.approx(0.541325, abs=1e-6)


def test_segment_empty():
    assert log_integral_exp_segment(0.3, -2.0, 0.0) == -math.inf


def test_segment_negative_length():
    with pytest.raises(ValueError):
        log_integral_exp_segment(0.0, 0.0, -1.0)


@pytest.mark.parametrize("a,b,length", [(0.0, 1e-10, 2.0), (-3.0, -3.0 + 5e-10, 0.5),
                                         (2.0, -40.0, 3.0), (-1.0, 30.0, 0.1)])
def test_segment_matches_quadrature(a, b, length):
    mpmath.mp.dps = 40
    ref = mpmath.log(mpmath.quad(lambda u: mpmath.exp(a + (b - a) * u / length), [0, length]))
    assert log_integral_exp_segment(a, b, length) == pytest.approx(float(ref), abs=1e-12)


@settings(max_examples=200)
@given(st.floats(-30, 30), st.floats(-60, 60))
def test_segment_moments_match_mpmath(a, d):
    mpmath.mp.dps = 40
    got = segment_moments(np.array([a]), np.array([a + d]))
    for k in range(3):
        ref = mpmath.quad(lambda u: u**k * mpmath.exp(a + d * u), [0, 1])
        assert got[k][0] == pytest.approx(float(ref), rel=1e-11)


# -- evaluate / loglik ------------------------------------------------------


def test_evaluate_at_knots_and_midpoints():
    dens = PiecewiseLogLinearDensity([0.0, 1.0, 3.0], [0.0, 2.0, 1.0])
    assert evaluate_logpdf(dens, 1.0) == 2.0
    assert evaluate_logpdf(dens, 0.5) == 1.0
    assert evaluate_logpdf(dens, 4.0) == -math.inf
    assert evaluate_logpdf(dens, -0.1) == -math.inf


def test_loglik_uniform_and_outside():
    dens = PiecewiseLogLinearDensity([0.0, 1.0], [0.0, 0.0])
    assert loglik(dens, WeightedSortedSample.from_values([0, 1])) == 0.0
    assert loglik(dens, WeightedSortedSample.from_values([0, 2])) == -math.inf


def test_duplicates_collapse_to_weights():
    s = WeightedSortedSample.from_values([3, 1, 3, 2, 3])
    np.testing.assert_array_equal(s.positions, [1, 2, 3])
    np.testing.assert_array_equal(s.weights, [1, 1, 3])
    assert s.n == 5


def test_degenerate_sample():
    with pytest.raises(DegenerateSampleError):
        fit_lcmle([2.0, 2.0, 2.0])
    with pytest.raises(DegenerateSampleError):
        fit_lcmle([1.0])


# -- fits ---------------------------------------------------------------------


def test_two_points_is_uniform():
    rep = fit_lcmle([0.0, 1.0])
    np.testing.assert_array_equal(rep.density.knots, [0, 1])
    np.testing.assert_allclose(rep.density.phi, [0, 0], atol=1e-15)
    assert rep.loglik == pytest.approx(0.0, abs=1e-15)
    best, slope = two_point_scan(0.0, 1.0)
    assert slope == 0.0
    assert rep.loglik >= best - 1e-12


def test_three_point_symmetry():
    rep = fit_lcmle([-1.0, 0.0, 1.0])
    d = rep.density
    assert d.logpdf(-1.0) == pytest.approx(d.logpdf(1.0), abs=1e-8)


def test_first_moment_by_quadrature():
    rep = fit_lcmle([0.0, 1.0, 2.0, 5.0])
    d = rep.density
    mean, _ = quad(lambda x: x * d.pdf(x), 0, 5, points=list(d.knots), epsabs=1e-13)
    assert mean == pytest.approx(2.0, abs=1e-5)
    assert d.mean() == pytest.approx(2.0, abs=1e-12)


def test_report_loglik_is_self_consistent():
    x = np.random.default_rng(3).standard_normal(50)
    s = WeightedSortedSample.from_values(x)
    rep = fit_lcmle(s)
    assert loglik(rep.density, s) == pytest.approx(rep.loglik, abs=1e-12)
    assert rep.converged and rep.gap <= 1e-7


def test_weighted_equals_repeated():
    rep_w = fit_lcmle(WeightedSortedSample([0.0, 1.0, 3.0], [1.0, 3.0, 1.0]))
    rep_r = fit_lcmle([0.0, 1.0, 1.0, 1.0, 3.0])
    assert rep_w.loglik == pytest.approx(rep_r.loglik, abs=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 5))
    x = rng.normal(size=n) * rng.uniform(0.3, 4)
    rep = fit_lcmle(x)
    assert rep.loglik >= brute_force_lcmle_loglik(x) - 1e-4


def _certificates(rep, sample):
    d = rep.density
    assert d.max_slope_increase() <= CONCAVITY_TOL
    assert abs(d.total_mass() - 1.0) <= 1e-7
    assert abs(d.mean() - sample.mean) <= 1e-5
    assert d.knots[0] == sample.positions[0] and d.knots[-1] == sample.positions[-1]
    assert set(d.knots).issubset(set(sample.positions))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40)
       .filter(lambda v: np.ptp(v) > 1e-6 * max(1.0, np.max(np.abs(v)))))
def test_structural_certificates_property(values):
    s = WeightedSortedSample.from_values(values)
    rep = fit_lcmle(s)
    _certificates(rep, s)


@pytest.mark.parametrize("kind", ["normal", "bimodal", "exponential", "uniform"])
def test_dominates_simple_log_concave_candidates(kind):
    rng = np.random.default_rng(9)
    x = {
        "normal": rng.standard_normal(80),
        "bimodal": np.concatenate([rng.normal(-3, 1, 40), rng.normal(3, 1, 40)]),
        "exponential": rng.exponential(size=80),
        "uniform": rng.uniform(size=80),
    }[kind]
    s = WeightedSortedSample.from_values(x)
    rep = fit_lcmle(s)
    lo, hi = s.positions[0], s.positions[-1]
    # Gaussian fit restricted to [lo, hi] and renormalised
    g = Normal1D(x.mean(), x.std())
    mass, _ = quad(lambda t: math.exp(g.logpdf(t)), lo, hi)
    gauss_ll = float(np.sum(g.logpdf(x)) - len(x) * math.log(mass))
    unif_ll = float(np.sum(Uniform1D(lo, hi).logpdf(x)))
    assert rep.loglik >= gauss_ll - 1e-9
    assert rep.loglik >= unif_ll - 1e-9


def test_scale_shift_equivariance():
    rng = np.random.default_rng(17)
    x = rng.gamma(3.0, size=60)
    base = fit_lcmle(x).density
    probes = np.linspace(x.min(), x.max(), 25)
    for _ in range(10):
        a, c = rng.uniform(-100, 100), rng.uniform(0.01, 50)
        moved = fit_lcmle(a + c * x).density
        np.testing.assert_allclose(moved.logpdf(a + c * probes), base.logpdf(probes) - math.log(c),
                                   atol=1e-6)


def test_mle_beats_truth_on_log_concave_data():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(200)
    rep = fit_lcmle(x)
    assert rep.loglik >= float(np.sum(Normal1D().logpdf(x)))


def test_non_convergence_is_reported():
    x = np.random.default_rng(2).standard_normal(200)
    rep = fit_lcmle(x, max_iter=1)
    assert not rep.converged
    assert rep.gap > 0


def test_cdf_monotone_and_ends_at_one():
    rep = fit_lcmle(np.random.default_rng(1).standard_normal(30))
    d = rep.density
    xs = np.linspace(d.knots[0] - 1, d.knots[-1] + 1, 200)
    c = d.cdf(xs)
    assert np.all(np.diff(c) >= -1e-15)
    assert c[0] == 0.0 and c[-1] == pytest.approx(1.0, abs=1e-12)
