import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cascadefuse.cascade import NewsStory, Post
from cascadefuse.errors import (
    EmptyGrid,
    InvalidInterval,
    NonPositiveDelay,
    NonPositiveTime,
    NonPositiveWindow,
    TimeBeforeOrigin,
    ZeroDenominator,
)
from cascadefuse.pointprocess import (
    DEFAULT_C,
    KernelParams,
    default_grid,
    estimate_infectiousness,
    infectiousness_series,
    intensity,
    kernel_integral,
    memory_kernel,
    post_count_series,
    simulate_hawkes,
    triangular_kernel,
)

P = KernelParams()


def make_story(events, label="true"):
    """events: list of (t, followers)."""
    return NewsStory(id="s", label=label,
                     posts=tuple(Post(t=t, followers=n) for t, n in events))


def phi_ref(s, params=P):
    """Independent scalar evaluation of the memory kernel."""
    if s <= params.s0:
        return params.c
    return params.c * (s / params.s0) ** (-(1 + params.theta))


def quad_oracle(t_i, t, params=P, tol=1e-10):
    """Adaptive-quadrature oracle for the denominator integral."""
    lo = max(t_i, t / 2)
    if lo >= t:
        return 0.0
    val, _ = quad(lambda s: max(1 - 2 * (t - s) / t, 0) * phi_ref(s - t_i, params),
                  lo, t, points=[t_i + params.s0] if lo < t_i + params.s0 < t else None,
                  epsabs=tol, epsrel=tol, limit=200)
    return val


# --- memory kernel ---

def test_kernel_flat_regime_value():
    assert memory_kernel(60) == pytest.approx(6.27e-4)


def test_kernel_boundary_continuity():
    left = memory_kernel(P.s0)
    right = memory_kernel(P.s0 * (1 + 1e-12))
    assert left == pytest.approx(DEFAULT_C)
    assert abs(left - right) < 1e-12


def test_kernel_power_law_value():
    # direct independent evaluation of c * 2^-(1+theta)
    expected = 6.27e-4 * 2 ** (-1.242)
    assert memory_kernel(600) == pytest.approx(expected, rel=1e-12)


def test_kernel_rejects_nonpositive_delay():
    with pytest.raises(NonPositiveDelay):
        memory_kernel(0.0)


@given(st.floats(min_value=1e-3, max_value=1e7),
       st.floats(min_value=1e-3, max_value=1e7))
def test_kernel_monotone_nonincreasing(a, b):
    lo, hi = sorted([a, b])
    assert memory_kernel(lo) >= memory_kernel(hi) - 1e-18


# --- triangular kernel ---

def test_triangle_peak():
    assert triangular_kernel(1e-12, 100.0) == pytest.approx(1.0)


def test_triangle_support_edge_and_midpoint():
    assert triangular_kernel(50.0, 100.0) == 0.0
    assert triangular_kernel(25.0, 100.0) == pytest.approx(0.5)


def test_triangle_rejects_nonpositive_window():
    with pytest.raises(NonPositiveWindow):
        triangular_kernel(1.0, 0.0)


@given(st.floats(min_value=0, max_value=1e6), st.floats(min_value=1e-6, max_value=1e6))
def test_triangle_bounds(s, t):
    v = triangular_kernel(s, t)
    assert 0.0 <= v <= 1.0
    if s >= t / 2:
        assert v == 0.0


def test_triangle_area_is_quarter_window():
    t = 4567.0
    area, _ = quad(lambda s: triangular_kernel(s, t), 0, t / 2, epsabs=1e-9)
    assert area == pytest.approx(t / 4, abs=1e-9 * t)


# --- kernel integral ---

def test_kernel_integral_empty_interval_limit():
    assert kernel_integral(100.0, 100.0 + 1e-9) < 1e-10


def test_kernel_integral_flat_regime_analytic():
    # t_i=0, t=200 with c=1: triangle over the flat regime integrates to 50
    p1 = KernelParams(c=1.0, s0=300.0, theta=0.242)
    assert kernel_integral(0.0, 200.0, p1) == pytest.approx(50.0, rel=1e-12)
    assert kernel_integral(0.0, 200.0) == pytest.approx(50.0 * DEFAULT_C, rel=1e-12)


def test_kernel_integral_vs_quadrature_oracle():
    expected = quad_oracle(0.0, 7200.0)
    assert kernel_integral(0.0, 7200.0) == pytest.approx(expected, rel=1e-9)


def test_kernel_integral_invalid_interval():
    with pytest.raises(InvalidInterval):
        kernel_integral(100.0, 50.0)


def test_kernel_integral_matches_oracle_on_random_cases():
    rng = np.random.default_rng(42)
    for _ in range(100):
        t = rng.uniform(10.0, 500_000.0)
        t_i = rng.uniform(0.0, t * 0.999)
        params = KernelParams(c=rng.uniform(1e-4, 1e-2),
                              s0=rng.uniform(30.0, 2000.0),
                              theta=rng.uniform(0.05, 0.95))
        got = kernel_integral(t_i, t, params)
        want = quad_oracle(t_i, t, params)
        if want == 0.0:
            assert got == pytest.approx(0.0, abs=1e-15)
        else:
            assert got == pytest.approx(want, rel=1e-6)


# --- intensity ---

def test_intensity_single_post_flat_regime():
    story = make_story([(0.0, 100.0)])
    v = intensity(story, s_h=0.5, t=60.0)
    assert v.lam == pytest.approx(0.5 * 100 * 6.27e-4)


def test_intensity_zero_infectiousness():
    story = make_story([(0.0, 100.0), (10.0, 50.0)])
    assert intensity(story, s_h=0.0, t=60.0).lam == 0.0


def test_intensity_two_posts_hand_sum():
    story = make_story([(0.0, 100.0), (300.0, 50.0)])
    expected = 0.7 * (100 * phi_ref(360.0) + 50 * phi_ref(60.0))
    assert intensity(story, s_h=0.7, t=360.0).lam == pytest.approx(expected, rel=1e-12)


def test_intensity_before_origin():
    with pytest.raises(TimeBeforeOrigin):
        intensity(make_story([(0.0, 1.0)]), 1.0, -1.0)


# --- infectiousness estimator ---

def test_estimator_no_reshares_is_zero():
    story = make_story([(0.0, 1000.0)])
    assert estimate_infectiousness(story, 7200.0) == 0.0


def test_estimator_reshare_outside_window_is_zero():
    # a reshare older than t/2 has zero triangular weight
    story = make_story([(0.0, 1000.0), (1800.0, 10.0)])
    assert estimate_infectiousness(story, 7200.0) == 0.0


def test_estimator_hand_case():
    story = make_story([(0.0, 1000.0), (5400.0, 10.0)])
    t = 7200.0
    num = max(1 - 2 * (t - 5400.0) / t, 0)
    den = 1000.0 * quad_oracle(0.0, t) + 10.0 * quad_oracle(5400.0, t)
    assert estimate_infectiousness(story, t) == pytest.approx(num / den, rel=1e-6)


def test_estimator_zero_denominator():
    story = make_story([(0.0, 0.0), (5400.0, 0.0)])
    with pytest.raises(ZeroDenominator):
        estimate_infectiousness(story, 7200.0)


def test_estimator_nonpositive_time():
    with pytest.raises(NonPositiveTime):
        estimate_infectiousness(make_story([(0.0, 1.0)]), 0.0)


def test_estimator_follower_scale_covariance():
    story = make_story([(0.0, 500.0), (4000.0, 3.0), (6000.0, 7.0)])
    scaled = make_story([(0.0, 5000.0), (4000.0, 30.0), (6000.0, 70.0)])
    t = 7200.0
    assert estimate_infectiousness(scaled, t) == pytest.approx(
        estimate_infectiousness(story, t) / 10.0, rel=1e-9)


def test_estimator_consistency_on_simulated_cascades():
    ests = []
    for seed in range(20):
        st_ = simulate_hawkes(lambda h: 0.8, lambda r: r.poisson(1.0),
                              horizon=172800.0, seed=seed, source_followers=150.0)
        assert len(st_.posts) >= 100
        ests.append(estimate_infectiousness(st_, 172800.0))
    assert np.mean(ests) == pytest.approx(0.8, rel=0.2)


# --- series ---

def test_default_grid_is_47_hours():
    g = default_grid()
    assert len(g) == 47 and g[0] == 1 and g[-1] == 47


def test_series_no_reshares_all_zero():
    series = infectiousness_series(make_story([(0.0, 100.0)]))
    assert len(series.values) == 47
    assert all(v == 0.0 for v in series.values)


def test_series_custom_day_grid_length():
    for d in (1, 3):
        grid = default_grid(24 * d - 1)
        series = infectiousness_series(make_story([(0.0, 10.0), (1800.0, 2.0)]), grid)
        assert len(series.values) == 24 * d - 1


def test_series_zero_denominator_degrades_with_warning():
    story = make_story([(0.0, 0.0), (3000.0, 0.0)])
    with pytest.warns(UserWarning):
        series = infectiousness_series(story, [1.0, 2.0])
    assert series.values == (0.0, 0.0)


def test_series_empty_grid():
    with pytest.raises(EmptyGrid):
        infectiousness_series(make_story([(0.0, 1.0)]), [])


def test_post_count_series_binning():
    story = make_story([(0.0, 1.0), (0.5 * 3600, 1.0), (1.5 * 3600, 1.0)])
    counts = post_count_series(story, [1.0, 2.0])
    assert counts.tolist() == [2.0, 1.0]


def test_post_count_series_partition():
    story = make_story([(0.0, 1.0)] + [(i * 977.0, 1.0) for i in range(1, 30)])
    counts = post_count_series(story, default_grid(9))
    in_horizon = sum(1 for p in story.posts if p.t <= 9 * 3600)
    assert counts.sum() == in_horizon
    assert counts[0] >= 1  # source in the first bin


# --- simulator ---

def test_simulate_zero_profile_only_seed():
    st_ = simulate_hawkes(lambda h: 0.0, lambda r: 5.0, horizon=86400.0, seed=1)
    assert len(st_.posts) == 1 and st_.posts[0].t == 0.0


def test_simulate_deterministic():
    a = simulate_hawkes(lambda h: 0.5, lambda r: r.poisson(1.0), 86400.0, seed=9,
                        source_followers=30.0)
    b = simulate_hawkes(lambda h: 0.5, lambda r: r.poisson(1.0), 86400.0, seed=9,
                        source_followers=30.0)
    assert a == b


def test_simulate_subcritical_branching_mean():
    # expected children of the seed: s_h * n0 * int_0^H phi; each later event
    # roughly b = s_h * E[n] * int phi children, so total ~ 1 + m0 / (1 - b)
    H = 172800.0
    s_h, n0, mean_n = 0.5, 20.0, 1.0
    phi_mass, _ = quad(phi_ref, 1e-9, H, points=[300.0], limit=200)
    m0 = s_h * n0 * phi_mass
    b = s_h * mean_n * phi_mass
    expected = 1 + m0 / (1 - b)
    counts = [len(simulate_hawkes(lambda h: s_h, lambda r: r.poisson(mean_n), H,
                                  seed=s, source_followers=n0).posts)
              for s in range(200)]
    # horizon truncation biases low; allow a generous statistical band
    assert np.mean(counts) == pytest.approx(expected, rel=0.35)
