"""Poincare map of the hysteretic regularization on ``y = alpha``.

A point ``(x, alpha)`` left of the upper-field tangency on that line follows
the upper field until it crosses ``y = -alpha`` downwards; the lower field
``(0, 1)`` then lifts it straight back, so the map returns the abscissa of
the crossing. Orbits that never reach ``y = -alpha`` are trapped by the focus;
the map sends them to a sentinel (exported as the number 0).

In the example family the tangencies of the upper field with horizontal
lines are not all on ``x = 0``, they drift by ``O(alpha)``. Two reference
abscissae replace the origin of the fold-aligned picture:
``graze`` (the tangency on ``y = -alpha``, where an orbit that just touches
the lower line lands) and ``domain_end`` (the tangency on ``y = alpha``, the
right end of the section).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .config import defaults
from .dynsys import normal_form_scales, validate_visible_fold
from .errors import Diverged, MarkerNotFound, NumericalError, ValidationError, WindowEmpty
from .integrate import EventSpec, IntegratorOptions, integrate_to_event
from .sections import SectionMapSample, fd_derivatives, pi_prime_routes

__all__ = [
    "HystMarkers",
    "DiscontinuitySequence",
    "HorseshoeCertificate",
    "HystMap",
    "poincare_P",
    "compute_markers",
    "marker_asymptotics",
    "discontinuity_points",
    "sample_map",
    "basin_fractions",
    "basin_measure",
    "idealized_measure",
    "idealized_simulation",
    "effective_sigma",
    "horseshoe_window",
    "horseshoe_check",
    "fixed_points_gamma",
]


@dataclass(frozen=True)
class HystMarkers:
    """Distinguished abscissae on ``y = alpha``; ``nan`` where a marker does not exist."""

    E_mu: float
    D_mu: float
    A_prime_mu: float
    A_mu: float
    B_mu: float
    graze: float = math.nan
    domain_end: float = math.nan

    def require(self, name):
        v = getattr(self, name)
        if not math.isfinite(v):
            raise MarkerNotFound(f"marker {name} does not exist for these parameters")
        return v

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("E_mu", "D_mu", "A_prime_mu", "A_mu", "B_mu", "graze", "domain_end")}


@dataclass(frozen=True)
class DiscontinuitySequence:
    """Cuts ``E_0 = E_mu < E_1 < ...`` and their spacing ratios.

    ``ratios[j]`` is ``(E_{n+1} - E_n) / (E_n - E_{n-1})`` with ``n = j + 1``.
    """

    E_n: list
    accumulation: float | None
    ratios: list


@dataclass(frozen=True)
class HorseshoeCertificate:
    n: int
    intervals: tuple
    inequalities: tuple
    passed: bool
    margins: tuple = ()
    window: tuple = ()
    pi_prime_0: float = math.nan

    def as_dict(self):
        return {
            "n": self.n,
            "intervals": [list(i) for i in self.intervals],
            "inequalities": list(self.inequalities),
            "margins": list(self.margins),
            "window": list(self.window),
            "pi_prime_0": self.pi_prime_0,
            "passed": self.passed,
        }


class HystMap:
    """Hysteretic section map of one system at fixed ``(alpha, mu)``."""

    def __init__(self, system, alpha, mu=None, opts=None, search=(-0.5, 0.5)):
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValidationError("alpha must be positive", field="alpha")
        self.system = system if mu is None else system.with_mu(mu)
        self.mu = self.system.mu
        self.alpha = float(alpha)
        self.opts = opts if opts is not None else IntegratorOptions.from_defaults()
        self.search = search
        self.t_max = defaults()["max_flight_time"]
        self.trap_turns = defaults()["trap_turns"]
        self.up = self.system.upper

    # geometry ------------------------------------------------------------

    def fold(self, level):
        return validate_visible_fold(self.system, level, self.search).x

    @cached_property
    def graze(self):
        return self.fold(-self.alpha)

    @cached_property
    def domain_end(self):
        return self.fold(self.alpha)

    @cached_property
    def column(self):
        """Abscissa of the periodic orbit's tangency with ``y = mu``."""
        return self.fold(self.mu)

    @cached_property
    def orbit_top(self):
        """Height at which the periodic orbit crosses the column leftwards."""
        ev = EventSpec("cross_x", self.column, "left", window=(self.mu, math.inf))
        tr = integrate_to_event(self.up, (self.column, self.mu), (0.0, self.t_max), [ev], self.opts,
                                keep=False)
        if tr.terminal_event is None:
            raise MarkerNotFound("the periodic orbit did not close")
        return tr.terminal_event.y

    def _cut(self):
        return EventSpec("cross_y", self.alpha, "down", window=(-math.inf, self.domain_end), name="cut")

    def _trap_events(self):
        g = 1e-9 * max(1.0, abs(self.orbit_top))
        return [
            EventSpec("cross_x", self.column, "left", window=(-math.inf, self.orbit_top - g), name="vault"),
            EventSpec("cross_x", self.column, "left", window=(self.orbit_top - g, math.inf),
                      count=self.trap_turns, name="turn"),
        ]

    def _forward(self, start, target):
        """Follow the upper field to ``target`` or until trapped."""
        evs = [target] + self._trap_events()
        try:
            tr = integrate_to_event(self.up, start, (0.0, self.t_max), evs, self.opts, keep=False)
        except Diverged as exc:
            t = exc.trajectory.t_final if exc.trajectory is not None else math.nan
            return None, 0, t, True
        turns = len(tr.hits(2))
        hit = tr.terminal_event
        if hit is None or hit.event != 0:
            return None, turns, tr.t_final, False
        return hit, turns, hit.t, False

    # maps ----------------------------------------------------------------

    def P(self, x):
        """One application of the hysteretic map to ``(x, alpha)``."""
        x = float(x)
        if x > self.domain_end:
            raise ValidationError(f"x={x} is right of the section end {self.domain_end}", field="x")
        if abs(x - self._E_or_nan) <= 1e-13 * max(1.0, abs(x)):
            return SectionMapSample(x, self.graze, 0, False, 0.0)   # the tangent orbit lands on the graze
        target = EventSpec("cross_y", -self.alpha, "down", name="switch")
        hit, turns, t, escaped = self._forward((x, self.alpha), target)
        if escaped:
            return SectionMapSample(x, -math.inf, turns, False, t, escaped=True)
        if hit is None:
            return SectionMapSample(x, 0.0, turns, True, t)
        return SectionMapSample(x, hit.x, turns, False, t)

    def value(self, x):
        s = self.P(x)
        return math.nan if s.trapped else s.x_out

    def exterior(self, x):
        """Upper-field return to the section from ``(x, alpha)``; ``nan`` if trapped."""
        hit, _, _, _ = self._forward((float(x), self.alpha), self._cut())
        return math.nan if hit is None else hit.x

    def hysteretic_inverse(self, z):
        """Point of the section whose descent lands at ``(z, -alpha)``."""
        try:
            tr = integrate_to_event(self.up, (float(z), -self.alpha), (0.0, -self.t_max), [self._cut()],
                                    self.opts, keep=False)
        except Diverged as exc:
            raise MarkerNotFound(f"backward orbit from ({z}, -alpha) diverged") from exc
        if tr.terminal_event is None:
            raise MarkerNotFound(f"backward orbit from ({z}, -alpha) never reached the section")
        return tr.terminal_event.x

    def backward_zero(self, n):
        """``P^{-n}(0)`` along the left branch: ``n = 1`` gives ``E_mu``."""
        if n < 0:
            raise ValidationError("n must be non-negative", field="n")
        z = self.graze
        for _ in range(n):
            z = self.hysteretic_inverse(z)
        return z

    # markers -------------------------------------------------------------

    @cached_property
    def E(self):
        return self.hysteretic_inverse(self.graze)

    @cached_property
    def _E_or_nan(self):
        try:
            return self.E
        except MarkerNotFound:
            return math.nan

    @cached_property
    def D(self):
        a, m = self.alpha, self.mu
        if abs(m - a) <= 1e-12 * max(1.0, a):
            return self.column
        if m > a:
            return math.nan
        tr = integrate_to_event(self.up, (self.column, m), (0.0, self.t_max), [self._cut()], self.opts,
                                keep=False)
        return math.nan if tr.terminal_event is None else tr.terminal_event.x

    @cached_property
    def A_prime(self):
        hit, _, _, _ = self._forward((self.graze, -self.alpha), self._cut())
        return math.nan if hit is None else hit.x

    @cached_property
    def A(self):
        if not math.isfinite(self.A_prime):
            return math.nan
        return self.value(self.A_prime)

    @cached_property
    def B(self):
        return self.exterior(self.domain_end)

    def markers(self):
        return HystMarkers(self.E, self.D, self.A_prime, self.A, self.B, self.graze, self.domain_end)

    def discontinuities(self, n_max=30, min_spacing=1e-10):
        """Backward cuts of the orbit that grazes ``y = -alpha``, starting with ``E_mu``."""
        cut = EventSpec("cross_y", self.alpha, "down", terminal=False,
                        window=(-math.inf, self.domain_end), name="cut")
        stop = EventSpec("cross_x", self.column, "left", window=(-math.inf, math.inf),
                         count=n_max + 3, name="turns")
        try:
            tr = integrate_to_event(self.up, (self.graze, -self.alpha), (0.0, -self.t_max), [cut, stop],
                                    self.opts, keep=False)
            hits = tr.hits(0)
        except Diverged as exc:
            hits = [h for h in (exc.trajectory.events if exc.trajectory else []) if h.event == 0]
        es = []
        for h in hits:
            if es and abs(h.x - es[-1]) < min_spacing:
                break
            es.append(h.x)
            if len(es) >= n_max:
                break
        ratios = [abs(es[i + 1] - es[i]) / abs(es[i] - es[i - 1]) for i in range(1, len(es) - 1)]
        acc = self.D if math.isfinite(self.D) else None
        return DiscontinuitySequence(es, acc, ratios)


def poincare_P(system, alpha, mu, x, opts=None):
    """Hysteretic Poincare map at one point; trapped orbits come back flagged."""
    return HystMap(system, alpha, mu, opts).P(x)


def compute_markers(system, alpha, mu, opts=None):
    return HystMap(system, alpha, mu, opts).markers()


def marker_asymptotics(system, alpha, mu, pi_prime_0):
    """Leading-order marker positions in the system's own coordinates.

    Computed in fold normal form and mapped back. ``A`` uses
    ``A^2 = A'^2 - 2 alpha`` with ``A'^2 = alpha (sigma (P - 1) + P + 1)``,
    ``sigma = mu / alpha`` and ``P = pi'(0)``.
    """
    s = normal_form_scales(system)
    a = s.sy * alpha
    sig = mu / alpha
    P = pi_prime_0
    back = s.x_back

    def neg_root(v):
        return -math.sqrt(v) if v >= 0 else math.nan

    ap2 = a * (sig * (P - 1) + P + 1)
    a2 = ap2 - 2 * a
    b2 = a * (sig - 1) * (P - 1)
    return {
        "E_mu": back(-math.sqrt(2 * a)),
        "A_prime_mu": back(neg_root(ap2)),
        "A_mu": back(neg_root(a2)),
        "B_mu": back(neg_root(b2)),
        "P_of_end": back(neg_root(b2 - 2 * a)),
        "P_of_A": back(neg_root(a2 - 2 * a)),
    }


def discontinuity_points(system, alpha, mu, n_max=30, opts=None):
    return HystMap(system, alpha, mu, opts).discontinuities(n_max)


def sample_map(system, alpha, mu, grid_n, x_min=None, opts=None):
    """``P`` on ``grid_n`` cell midpoints of ``[x_min, end]``; ``x_min`` defaults as in :func:`basin_fractions`."""
    if grid_n < 1:
        raise ValidationError("grid_n must be positive", field="grid_n")
    hm = HystMap(system, alpha, mu, opts)
    if x_min is None:
        x_min = hm.A if math.isfinite(hm.A) else 2.0 * hm.E
    xs = np.linspace(x_min, hm.domain_end, grid_n + 2)[1:-1]
    return [hm.P(float(x)) for x in xs]


def basin_fractions(system, alpha, mu, grid_n, k_max, a=None, opts=None, seed=None):
    """Fraction of a uniform grid on ``[a, end]`` trapped within ``k`` iterates, ``k = 1..k_max``.

    ``a`` defaults to ``A_mu`` when it exists and to ``2 E_mu`` otherwise.
    With a ``seed`` the cell midpoints are replaced by uniform random points.
    """
    if grid_n < 2 or k_max < 1:
        raise ValidationError("need grid_n >= 2 and k_max >= 1")
    hm = HystMap(system, alpha, mu, opts)
    if a is None:
        a = hm.A if math.isfinite(hm.A) else 2.0 * hm.E
    if seed is None:
        xs = np.linspace(a, hm.domain_end, grid_n + 2)[1:-1]
    else:
        xs = np.sort(np.random.default_rng(seed).uniform(a, hm.domain_end, grid_n))
    first_hit = np.full(grid_n, k_max + 1)
    for i, x in enumerate(xs):
        z = float(x)
        for k in range(1, k_max + 1):
            if z > hm.domain_end:
                break   # left the section: counted as not trapped
            s = hm.P(z)
            if s.trapped:
                first_hit[i] = k
                break
            if s.escaped:
                break
            z = s.x_out
    return [float(np.mean(first_hit <= k)) for k in range(1, k_max + 1)]


def basin_measure(system, alpha, mu, grid_n, k_iters, a=None, opts=None, seed=None):
    """Fraction of grid points whose orbit is trapped within ``k_iters`` iterates."""
    return basin_fractions(system, alpha, mu, grid_n, k_iters, a, opts, seed)[-1]


def idealized_measure(sigma, k):
    """``1 - (1 - sigma)^(k + 1)``: mass reaching the flat part within ``k`` steps."""
    if not (0 < sigma <= 1):
        raise ValidationError("sigma must lie in (0, 1]", field="sigma")
    if k < 0 or int(k) != k:
        raise ValidationError("k must be a non-negative integer", field="k")
    return 1.0 - (1.0 - sigma) ** (int(k) + 1)


def _ideal_breaks(sigma, ratio, min_width):
    s = 1.0 - sigma
    pts = [0.0]
    w = s * (1.0 - ratio)
    while w > min_width:
        pts.append(pts[-1] + w)
        w *= ratio
    pts.append(s)
    return np.array(pts)


def effective_sigma(system, alpha, mu, a=None, opts=None):
    """Share of ``[a, end]`` trapped at once, ``(end - D) / (end - a)``: the idealized model's ``sigma``."""
    hm = HystMap(system, alpha, mu, opts)
    if a is None:
        a = hm.A if math.isfinite(hm.A) else 2.0 * hm.E
    d = hm.D
    if not math.isfinite(d):
        raise MarkerNotFound("D_mu does not exist, so the trapped share is undefined")
    return (hm.domain_end - d) / (hm.domain_end - a)


def idealized_simulation(sigma, k, grid_n=100_000, ratio=0.5, min_width=1e-12):
    """Direct iteration of the model map on ``[0, 1]``.

    Laps ``[b_i, b_{i+1})`` with geometrically shrinking widths accumulate at
    ``1 - sigma``; each is mapped linearly onto ``[0, 1)`` and the flat part
    ``[1 - sigma, 1]`` goes to 1. Returns the fraction of cell midpoints that
    reach the flat part within ``k`` applications.
    """
    if not (0 < sigma < 1):
        raise ValidationError("sigma must lie in (0, 1)", field="sigma")
    br = _ideal_breaks(sigma, ratio, min_width)
    s = br[-1]
    x = (np.arange(grid_n) + 0.5) / grid_n
    done = x >= s
    for _ in range(k):
        live = ~done
        xl = x[live]
        j = np.clip(np.searchsorted(br, xl, side="right") - 1, 0, len(br) - 2)
        xl = (xl - br[j]) / (br[j + 1] - br[j])
        x[live] = xl
        done = done | (x >= s)
    return float(np.mean(done))


def horseshoe_window(sigma1, pi_prime_0):
    """Open interval for ``n - 1`` and the integers ``n`` inside it."""
    P = pi_prime_0
    lo = 0.5 * (sigma1 - 1.0) * (P - 1.0)
    hi = 0.5 * (sigma1 + 1.0) * (P + 1.0)
    ns = [m + 1 for m in range(max(1, math.floor(lo) + 1), math.ceil(hi)) if lo < m < hi]
    return lo, hi, ns


def horseshoe_check(system, alpha, sigma1, opts=None, pi_prime_0=None, n=None):
    """Covering certificate ``I_n -> I_{n-1} -> I_n`` for ``P^n`` at ``mu = sigma1 alpha``.

    Candidates ``n`` come from the admissible window and are tried in order
    of distance of ``n - 1`` from the window midpoint; the first one whose four endpoint
    inequalities hold numerically with margin ``1e-6 sqrt(alpha)`` is
    returned. If none passes, the best candidate is returned with
    ``passed = False``.

    Raises
    ------
    ValidationError
        ``sigma1`` is below ``2 (P + 1) / (P - 1)``.
    WindowEmpty
        No integer fits the window.
    """
    P = pi_prime_routes(system)[0] if pi_prime_0 is None else pi_prime_0
    if not sigma1 > 2 * (P + 1) / (P - 1):
        raise ValidationError(f"sigma1={sigma1} must exceed 2(P+1)/(P-1)={2 * (P + 1) / (P - 1):.6g}",
                              field="sigma1")
    lo, hi, ns = horseshoe_window(sigma1, P)
    if n is not None:
        ns = [n] if n in ns else []
    if not ns:
        raise WindowEmpty(f"no integer n with {lo:.6g} < n-1 < {hi:.6g}")
    hm = HystMap(system, alpha, sigma1 * alpha, opts)
    A = hm.A
    if not math.isfinite(A):
        raise MarkerNotFound("A_mu does not exist")
    p0 = hm.value(hm.domain_end)
    p2 = hm.value(p0)
    pa = hm.value(A)
    mid = 0.5 * (lo + hi)
    order = sorted(ns, key=lambda m: (abs(m - 1 - mid), m))
    tol = 1e-6 * math.sqrt(alpha)
    back = {}

    def bz(k):
        if k not in back:
            back[k] = hm.backward_zero(k)
        return back[k]

    best = None
    for m in order:
        margins = (bz(m - 1) - A, p0 - bz(m - 2), bz(m) - pa, p2 - bz(m - 1))
        ok = tuple(bool(v > tol) for v in margins)
        cert = HorseshoeCertificate(
            n=m,
            intervals=((bz(m), bz(m - 1)), (bz(m - 1), bz(m - 2))),
            inequalities=ok,
            passed=all(ok),
            margins=tuple(float(v) for v in margins),
            window=(lo, hi),
            pi_prime_0=P,
        )
        if cert.passed:
            return cert
        if best is None:
            best = cert
    return best


def fixed_points_gamma(system, alpha, mu, n_max=10, opts=None):
    """Fixed points ``gamma_n`` of the map inside the laps ``[E_n, E_{n+1}]``.

    Returns ``[(gamma, n, slope)]``; laps without a sign change are skipped.
    """
    hm = HystMap(system, alpha, mu, opts)
    es = hm.discontinuities(n_max + 1).E_n
    out = []
    for i in range(len(es) - 1):
        a, b = es[i], es[i + 1]
        h = 1e-6 * (b - a)   # closer in, the shallow crossing is below event resolution

        def g(x):
            return hm.value(x) - x

        try:
            ga, gb = g(a + h), g(b - h)
        except NumericalError:   # an end that escapes counts as no bracket
            continue
        if not (math.isfinite(ga) and math.isfinite(gb) and ga * gb < 0):
            continue
        r = brentq(g, a + h, b - h, xtol=1e-14, rtol=1e-14)
        step = 1e-3 * min(r - a, b - r)
        slope = fd_derivatives(hm.value, r, step).first
        out.append((float(r), i, float(slope)))
    return out
