"""Saddle-node of periodic orbits in the regularized family.

The saddle-node value ``mu*`` is located by bisection on the number of
fixed points of the composite section map, and compared with the asymptotic
law ``mu* = eps - delta0* eps^(4/3)`` (in fold normal-form units).

The bisection predicate is "at least one fixed point". In the example
family orbits that start outside the periodic orbit escape in finite time,
so close to ``mu = eps`` only the unstable fixed point survives and the count
in descending ``mu`` reads 1, 2, 0. The lower edge of the positive-count
region is the saddle-node either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .config import defaults
from .dynsys import normal_form_scales
from .errors import CountNotMonotone, ValidationError
from .riccati import RiccatiConfig, eta0_of_zero, solve_bif_constants
from .sections import SectionMaps, pi_prime_routes

__all__ = [
    "BifurcationResult",
    "MuWindow",
    "mu_window",
    "asymptotic_constants",
    "fixed_point_count",
    "count_scan",
    "locate_mu_star",
    "semistable_point",
]


@dataclass(frozen=True)
class BifurcationResult:
    eps: float
    mu_star_numeric: float
    mu_star_asymptotic: float
    delta_star_numeric: float
    fixed_point_at_star: float
    bisection_width: float
    pi_prime_0: float = math.nan
    delta0_star: float = math.nan
    eta_star: float = math.nan
    mu_bracket: tuple = ()
    count_log: list = field(default_factory=list)

    @property
    def c_numeric(self):
        """``(eps - mu*) / eps^(4/3)`` in the system's own units."""
        return self.delta_star_numeric / self.eps ** (4.0 / 3.0)

    def as_dict(self):
        return {
            "eps": self.eps,
            "mu_star_numeric": self.mu_star_numeric,
            "mu_star_asymptotic": self.mu_star_asymptotic,
            "delta_star_numeric": self.delta_star_numeric,
            "fixed_point_at_star": self.fixed_point_at_star,
            "bisection_width": self.bisection_width,
            "pi_prime_0": self.pi_prime_0,
            "delta0_star": self.delta0_star,
            "eta_star": self.eta_star,
        }


@dataclass(frozen=True)
class MuWindow:
    mu1: float
    mu2: float


def mu_window(system, phi, eps, K1=None, K2=None, eta0=None):
    """Parameter window outside which the fixed-point count is known.

    With ``d = eps - mu`` in normal-form units, no periodic orbit exists for
    ``d >= eps^(4/3) eta0^2 + K1 eps^(5/3)`` and two exist for
    ``d <= K2^2 eps^(4/3)``.
    """
    b = defaults()["bifurcation"]
    K1 = b["K1"] if K1 is None else K1
    K2 = b["K2"] if K2 is None else K2
    if eta0 is None:
        eta0 = eta0_of_zero(RiccatiConfig.for_phi(phi))
    sy = normal_form_scales(system).sy
    en = sy * eps
    d1 = en ** (4 / 3) * eta0 ** 2 + K1 * en ** (5 / 3)
    d2 = K2 ** 2 * en ** (4 / 3)
    return MuWindow(eps - d1 / sy, eps - d2 / sy)


def asymptotic_constants(system, phi, pi_prime_0=None):
    """``(pi'(0), BifConstants)`` for a system and transition function."""
    if pi_prime_0 is None:
        pi_prime_0 = pi_prime_routes(system)[0]
    return pi_prime_0, solve_bif_constants(pi_prime_0, RiccatiConfig.for_phi(phi))


def fixed_point_count(system, phi, eps, mu, n=None):
    return len(SectionMaps(system, phi, eps, mu).fixed_points(n=n))


def count_scan(system, phi, eps, mus, n=None):
    """``[(mu, count)]`` over the given parameter values."""
    return [(float(m), fixed_point_count(system, phi, eps, m, n)) for m in mus]


def locate_mu_star(system, phi, eps, n=None, window=None, pi_prime_0=None, width=None):
    """Bisect on the fixed-point count down to ``1e-4 eps^(4/3)``.

    Raises
    ------
    CountNotMonotone
        The window ends do not show "none" below and "some" above.
    """
    if not (0 < eps <= 0.1):
        raise ValidationError("eps must lie in (0, 0.1]", field="eps")
    P, consts = asymptotic_constants(system, phi, pi_prime_0)
    sc = normal_form_scales(system)
    mu_asym = eps - consts.delta0_star * sc.sy ** (1 / 3) * eps ** (4 / 3)
    win = window if window is not None else mu_window(system, phi, eps, eta0=consts.eta0_at_0)
    lo, hi = win.mu1, win.mu2
    log = []
    c_lo = fixed_point_count(system, phi, eps, lo, n)
    c_hi = fixed_point_count(system, phi, eps, hi, n)
    log += [(lo, c_lo), (hi, c_hi)]
    if c_lo != 0 or c_hi == 0:
        raise CountNotMonotone(f"counts {c_lo} at mu={lo} and {c_hi} at mu={hi}; grid: {log}")
    width = defaults()["bifurcation"]["width_factor"] * eps ** (4 / 3) if width is None else width
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        c = fixed_point_count(system, phi, eps, mid, n)
        log.append((mid, c))
        if c > 0:
            hi = mid
        else:
            lo = mid
    mu_star = 0.5 * (lo + hi)
    x_star = semistable_point(system, phi, eps, hi, n)
    return BifurcationResult(
        eps=eps,
        mu_star_numeric=mu_star,
        mu_star_asymptotic=mu_asym,
        delta_star_numeric=eps - mu_star,
        fixed_point_at_star=x_star,
        bisection_width=hi - lo,
        pi_prime_0=P,
        delta0_star=consts.delta0_star,
        eta_star=consts.eta_star,
        mu_bracket=(lo, hi),
        count_log=log,
    )


def semistable_point(system, phi, eps, mu_star, n=None):
    """Near-tangent fixed point: the shallowest local minimum of ``composite(x) - x``.

    Just above the saddle-node this minimum lies between the two colliding
    fixed points; just below it, it is where they are about to appear.
    """
    maps = SectionMaps(system, phi, eps, mu_star)
    n = defaults()["scan_points"] if n is None else n
    a, b = maps.scan_interval()
    xs = np.linspace(a, b, n)
    gs = np.array([maps._g(x) for x in xs])
    best = None
    for i in range(1, n - 1):
        g0, g1, g2 = gs[i - 1], gs[i], gs[i + 1]
        if not all(math.isfinite(v) for v in (g0, g1, g2)):
            continue
        if g1 <= g0 and g1 <= g2 and (best is None or abs(g1) < abs(gs[best])):
            best = i
    if best is None:
        return math.nan
    res = minimize_scalar(maps._g, bounds=(xs[best - 1], xs[best + 1]), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)
