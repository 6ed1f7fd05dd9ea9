import numpy as np
import pytest

from grazslide.bifurcation import (
    MuWindow,
    count_scan,
    fixed_point_count,
    locate_mu_star,
    mu_window,
    semistable_point,
)
from grazslide.errors import CountNotMonotone, ValidationError
from grazslide.sections import SectionMaps


def test_window_is_ordered(example1, phi):
    eps = 0.05
    w = mu_window(example1, phi, eps)
    assert w.mu1 < w.mu2 < eps


@pytest.mark.slow
def test_located_saddle_node(mu_star):
    eps = 0.05
    r = mu_star(eps)
    lo, hi = r.mu_bracket
    assert lo < r.mu_star_numeric < hi
    assert r.bisection_width <= 1e-4 * eps ** (4 / 3)
    counts = dict(r.count_log)
    assert counts[lo] == 0 and counts[hi] > 0
    # measured c = 0.7065; the asymptotic law in the system's units gives 0.7059
    assert r.c_numeric == pytest.approx(0.7065, abs=1e-3)
    assert abs(r.mu_star_numeric - r.mu_star_asymptotic) <= 0.01 * eps ** (4 / 3)


@pytest.mark.slow
def test_two_points_straddle_the_semistable_point(example1, phi, mu_star):
    eps = 0.05
    r = mu_star(eps)
    mu = r.mu_star_numeric + 0.01 * eps ** (4 / 3)
    br = SectionMaps(example1, phi, eps, mu).fixed_points()
    stable = [x for _, x, s in br.points if s == "stable"]
    unstable = [x for _, x, s in br.points if s == "unstable"]
    assert len(stable) == 1 and len(unstable) == 1
    x_star = semistable_point(example1, phi, eps, mu)
    assert min(br.xs) < x_star < max(br.xs)
    assert x_star == pytest.approx(r.fixed_point_at_star, rel=0.05)


@pytest.mark.slow
def test_count_monotone_across_window(example02, phi):
    eps = 0.05
    w = mu_window(example02, phi, eps)
    scan = count_scan(example02, phi, eps, np.linspace(w.mu1, w.mu2, 20))
    counts = [c for _, c in scan]
    assert counts[0] == 0 and counts[-1] == 2
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert max(counts) <= 2


def test_failed_bracket_is_reported(example1, phi):
    eps = 0.05
    low = eps - 3.0 * eps ** (4 / 3)
    with pytest.raises(CountNotMonotone):
        locate_mu_star(example1, phi, eps, window=MuWindow(low - 0.01, low), n=60)
    assert fixed_point_count(example1, phi, eps, low, n=60) == 0


def test_eps_guard(example1, phi):
    with pytest.raises(ValidationError):
        locate_mu_star(example1, phi, 0.5)
