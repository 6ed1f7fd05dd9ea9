import math

import numpy as np
import pytest

from grazslide.errors import MarkerNotFound, ValidationError, WindowEmpty
from grazslide.hyst import (
    HystMap,
    HystMarkers,
    basin_fractions,
    basin_measure,
    compute_markers,
    discontinuity_points,
    effective_sigma,
    fixed_points_gamma,
    horseshoe_check,
    horseshoe_window,
    idealized_measure,
    idealized_simulation,
    marker_asymptotics,
    poincare_P,
)
from grazslide.sections import pi_prime_routes

ALPHA = 0.01


@pytest.fixture(scope="module")
def P02(example02):
    return pi_prime_routes(example02)[0]


def test_marker_orders_below_minus_alpha(example02):
    m = compute_markers(example02, ALPHA, -2 * ALPHA)
    assert m.D_mu < m.E_mu


@pytest.mark.parametrize("mu", [0.0, 0.5 * ALPHA])
def test_marker_orders_inside_band(example02, mu):
    m = compute_markers(example02, ALPHA, mu)
    assert m.E_mu < m.D_mu < 0 and m.D_mu < m.domain_end
    assert m.A_mu < m.E_mu


def test_marker_at_minus_alpha_is_degenerate(example02):
    # the periodic orbit grazes y = -alpha: D, E and A' all sit on it
    m = compute_markers(example02, ALPHA, -ALPHA)
    assert m.graze == pytest.approx(HystMap(example02, ALPHA, -ALPHA).column, abs=1e-12)
    assert m.D_mu == pytest.approx(m.E_mu, abs=1e-6) and m.A_prime_mu == pytest.approx(m.E_mu, abs=1e-6)


def test_periodic_orbit_tangent_at_plus_alpha(example02):
    m = compute_markers(example02, ALPHA, ALPHA)
    assert m.D_mu == m.domain_end
    with pytest.raises(MarkerNotFound):
        HystMarkers(1.0, math.nan, 0, 0, 0).require("D_mu")


def test_large_shift_regime(example02, P02):
    alpha, sigma1 = 0.05, 4.0
    hm = HystMap(example02, alpha, sigma1 * alpha)
    A, E = hm.A, hm.E
    pa, p0 = hm.value(A), hm.value(hm.domain_end)
    assert A < pa < p0 < E
    assert math.isnan(hm.D)
    assert len(hm.discontinuities(10).E_n) <= 1


def test_markers_against_leading_order(normal02):
    # normal-form coordinates at kappa = 0.2; A with the corrected coefficient
    P = pi_prime_routes(normal02)[0]
    for alpha in (0.01, 0.005):
        m = compute_markers(normal02, alpha, 0.0)
        asy = marker_asymptotics(normal02, alpha, 0.0, P)
        assert abs(m.E_mu - asy["E_mu"]) <= 0.25 * alpha
        assert abs(m.A_mu - asy["A_mu"]) <= 1.0 * alpha
        assert abs(m.A_prime_mu - asy["A_prime_mu"]) <= 1.0 * alpha


def test_tangent_orbit_lands_on_graze(example02):
    hm = HystMap(example02, ALPHA, 0.0)
    s = hm.P(hm.E)
    assert s.x_out == hm.graze and not s.trapped
    with pytest.raises(ValidationError):
        hm.P(hm.domain_end + 1e-3)


def test_jump_at_E(example02):
    hm = HystMap(example02, ALPHA, 0.0)
    E, A, g = hm.E, hm.A, hm.graze
    left, right = [], []
    for h in (1e-3, 1e-4, 1e-5):
        d = h * math.sqrt(ALPHA)
        left.append(abs(hm.value(E - d) - g))
        right.append(abs(hm.value(E + d) - A))
    assert left[0] > left[1] > left[2] and right[0] > right[1] > right[2]
    assert left[2] < 0.01 * math.sqrt(ALPHA) and right[2] < 1e-3 * math.sqrt(ALPHA)


@pytest.mark.parametrize("mu,power", [(0.0, 1.0), (ALPHA, 0.5)])
def test_discontinuity_ratios(example02, P02, mu, power):
    seq = discontinuity_points(example02, ALPHA, mu, 12)
    assert all(b > a for a, b in zip(seq.E_n, seq.E_n[1:]))
    target = P02 ** -power
    for r in seq.ratios[2:]:
        assert abs(r - target) <= 0.05 * target
    if mu == ALPHA:
        assert seq.accumulation == HystMap(example02, ALPHA, mu).domain_end


def test_branches_are_increasing(example02):
    hm = HystMap(example02, ALPHA, 0.0)
    es = hm.discontinuities(4).E_n
    for a, b in zip(es, es[1:]):
        for x in np.linspace(a, b, 7)[1:-1]:
            assert hm.value(x + 1e-7 * (b - a)) > hm.value(x - 1e-7 * (b - a))


@pytest.mark.parametrize("mu", [0.0, ALPHA])
def test_fixed_points_on_each_lap_repel(example02, mu):
    es = discontinuity_points(example02, ALPHA, mu, 7).E_n
    gam = fixed_points_gamma(example02, ALPHA, mu, 5)
    assert len(gam) == 5
    for g, i, slope in gam:
        assert es[i] < g < es[i + 1] and slope > 1
    slopes = [s for _, _, s in gam]
    assert all(b > a for a, b in zip(slopes, slopes[1:]))


def test_backward_iterates(example02):
    hm = HystMap(example02, ALPHA, 0.0)
    assert hm.backward_zero(1) == hm.E and hm.backward_zero(0) == hm.graze
    for n in (2, 3, 4):
        assert abs(hm.value(hm.backward_zero(n)) - hm.backward_zero(n - 1)) <= 1e-8


def test_global_attractor_below_the_band(example02):
    alpha, mu = 0.1, -0.2
    hm = HystMap(example02, alpha, mu)
    z, steps = -1.2, 0
    while True:
        s = hm.P(z)
        if s.trapped:
            break
        z, steps = s.x_out, steps + 1
        assert steps < 20
    assert steps >= 1
    assert basin_measure(example02, alpha, mu, 20, 10) == 1.0


def test_basin_grows_with_iterates(example02):
    fr = basin_fractions(example02, ALPHA, 0.0, 40, 6)
    assert all(b >= a for a, b in zip(fr, fr[1:])) and fr[-1] > fr[0]
    assert fr[-1] >= 0.9


def test_random_grid_is_reproducible(example02):
    a = basin_fractions(example02, ALPHA, 0.0, 10, 3, seed=5)
    assert a == basin_fractions(example02, ALPHA, 0.0, 10, 3, seed=5)


def test_effective_sigma_in_unit_interval(example02):
    s = effective_sigma(example02, ALPHA, 0.0)
    assert 0 < s < 1


def test_single_evaluation_wrapper(example02):
    s = poincare_P(example02, ALPHA, 0.0, -0.3)
    assert s.x_in == -0.3 and (s.trapped or s.x_out < 0.1)


def test_idealized_closed_form():
    assert idealized_measure(0.5, 3) == 0.9375
    assert idealized_measure(0.3, 10) == pytest.approx(1 - 0.7 ** 11)
    assert idealized_measure(1.0, 4) == 1.0
    for bad in ((0.0, 3), (1.5, 3), (0.5, -1), (0.5, 1.5)):
        with pytest.raises(ValidationError):
            idealized_measure(*bad)


@pytest.mark.parametrize("sigma,k", [(0.3, 10), (0.5, 3), (0.8, 2)])
def test_idealized_simulation(sigma, k):
    assert abs(idealized_simulation(sigma, k) - idealized_measure(sigma, k)) <= 1e-3


def test_horseshoe_window_width():
    for s1, P in [(4.0, 3.5), (6.0, 10.0)]:
        lo, hi, ns = horseshoe_window(s1, P)
        assert hi - lo == pytest.approx(s1 + P)
        assert all(lo < n - 1 < hi for n in ns)


def test_horseshoe_guards(example02, P02):
    with pytest.raises(ValidationError):
        horseshoe_check(example02, 0.05, 3.0, pi_prime_0=P02)
    with pytest.raises(WindowEmpty):
        horseshoe_check(example02, 0.05, 4.0, pi_prime_0=P02, n=40)


@pytest.mark.slow
def test_horseshoe_certificate(example02, P02):
    c = horseshoe_check(example02, 0.05, 4.0, pi_prime_0=P02)
    assert c.passed and c.n == 9
    assert all(m > 1e-6 * math.sqrt(0.05) for m in c.margins)
    lo, hi = c.window
    assert lo < c.n - 1 < hi
