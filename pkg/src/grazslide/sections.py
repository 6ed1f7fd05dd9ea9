"""Section-to-section maps near a grazing periodic orbit.

Notation on the line ``y = eps`` (the upper edge of the regularization
strip): ``x_mu`` is the tangency of the upper field with the line, points
left of it are hit from above and points right of it are left upwards.

* ``inner_map_Q`` follows the regularized field from the left half of the
  line, through the strip, to its first upward crossing on the right half.
* ``exterior_map`` follows the upper field from the right half back to the
  left half, once around the focus. Points whose orbit stays inside the orbit
  tangent to the line never come back; there the map is extended by the
  constant ``x_mu``.
* ``return_map_pi`` is the first return of the upper field at ``mu = 0`` to
  the vertical line through the tangency, in the coordinate ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .config import defaults
from .dynsys import validate_visible_fold
from .errors import Diverged, EvaluationFailed, NoReturn, OutOfDomain, UnattainableTolerance, ValidationError
from .integrate import EventSpec, IntegratorOptions, integrate_to_event, integrate_variational
from .regularize import st_field

__all__ = [
    "SectionMapSample",
    "MapDerivatives",
    "FixedPointBranch",
    "SectionMaps",
    "return_map_pi",
    "pi_prime_routes",
    "exterior_map",
    "inner_map_Q",
    "one_sided_return",
    "composite_map",
    "composite_fixed_points",
    "fd_derivatives",
]


@dataclass(frozen=True)
class SectionMapSample:
    """One evaluation of a section map.

    ``trapped`` marks the constant extension (the orbit never returns) and
    ``escaped`` an orbit that left every bounded region; the latter carries
    ``x_out = -inf``.
    """

    x_in: float
    x_out: float
    turns: int = 0
    trapped: bool = False
    flight_time: float = 0.0
    escaped: bool = False


@dataclass(frozen=True)
class MapDerivatives:
    first: float
    second: float
    step: float
    richardson_error: float

    def acceptable(self, ratio=None):
        ratio = defaults()["fd"]["accept_ratio"] if ratio is None else ratio
        return self.richardson_error <= ratio * max(1.0, abs(self.second))


@dataclass
class FixedPointBranch:
    """Fixed points found at one or more parameter values.

    ``points`` holds ``(mu, x, stability)`` with stability ``"stable"`` or
    ``"unstable"``.
    """

    points: list = field(default_factory=list)
    method: str = "scan_bisect"

    def __len__(self):
        return len(self.points)

    @property
    def xs(self):
        return [p[1] for p in self.points]

    def count(self, stability=None):
        return sum(1 for p in self.points if stability is None or p[2] == stability)


def fd_derivatives(fun, x, base_step=None):
    """Central differences of ``fun`` at ``x`` with one Richardson level.

    ``base_step`` defaults to ``max(1e-6, 1e-3 |x|)``. The reported
    ``richardson_error`` is the change in the second derivative between the
    plain and the extrapolated estimate.
    """
    fd = defaults()["fd"]
    h = max(fd["min_step"], fd["rel_step"] * abs(x)) if base_step is None else float(base_step)
    if not h > 0:
        raise ValidationError("step must be positive", field="base_step")
    vals = {}
    for k in (-2, -1, 0, 1, 2):
        v = fun(x + k * h)
        if not math.isfinite(v):
            raise EvaluationFailed(f"map is not finite at x={x + k * h}")
        vals[k] = v
    d1h = (vals[1] - vals[-1]) / (2 * h)
    d1H = (vals[2] - vals[-2]) / (4 * h)
    d2h = (vals[1] - 2 * vals[0] + vals[-1]) / (h * h)
    d2H = (vals[2] - 2 * vals[0] + vals[-2]) / (4 * h * h)
    first = (4 * d1h - d1H) / 3
    second = (4 * d2h - d2H) / 3
    return MapDerivatives(first, second, h, abs(second - d2h))


def _opts(opts):
    return opts if opts is not None else IntegratorOptions.from_defaults()


class SectionMaps:
    """All section maps of one system at fixed ``(mu, eps)``.

    Geometric data (the tangency ``x_mu`` and the end ``x_tilde`` of the
    constant extension) are computed once and cached.
    """

    def __init__(self, system, phi, eps, mu=None, opts=None, search=(-0.5, 0.5)):
        if not (eps > 0 and math.isfinite(eps)):
            raise ValidationError("eps must be positive", field="eps")
        self.system = system if mu is None else system.with_mu(mu)
        self.mu = self.system.mu
        self.phi = phi
        self.eps = float(eps)
        self.opts = _opts(opts)
        self.search = search
        self.t_max = defaults()["max_flight_time"]
        self.trap_turns = defaults()["trap_turns"]

    @cached_property
    def x_mu(self):
        return validate_visible_fold(self.system, self.eps, self.search).x

    @cached_property
    def st(self):
        return st_field(self.system, self.phi, self.eps)

    @cached_property
    def x_tilde(self):
        """Last upward cut of the tangent orbit, integrating backwards.

        Equals ``x_mu`` when the tangent orbit never comes back to the line
        (the periodic orbit then lies above it).
        """
        ev = EventSpec("cross_y", self.eps, "up", window=(self.x_mu, math.inf))
        turn = EventSpec("cross_x", self.x_mu, "left", window=(self.eps, math.inf),
                         count=self.trap_turns)
        try:
            tr = integrate_to_event(self.system.upper, (self.x_mu, self.eps), (0.0, -self.t_max),
                                    [ev, turn], self.opts, keep=False)
        except Diverged:
            return self.x_mu
        hit = tr.terminal_event
        if hit is None or hit.event != 0:
            return self.x_mu
        return hit.x

    # maps ---------------------------------------------------------------

    def exterior(self, x):
        """Upper-field return from the right half of the line to the left half."""
        x = float(x)
        xm = self.x_mu
        if x < xm:
            raise OutOfDomain(f"exterior map needs x >= x_mu = {xm}, got {x}")
        if x <= self.x_tilde:
            return SectionMapSample(x, xm, 0, True, 0.0)
        evs = [
            EventSpec("cross_y", self.eps, "down", window=(-math.inf, xm), name="return"),
            EventSpec("cross_x", xm, "right", window=(self.eps, math.inf), name="vault"),
            EventSpec("cross_x", xm, "left", terminal=False, window=(self.eps, math.inf), name="turn"),
        ]
        try:
            tr = integrate_to_event(self.system.upper, (x, self.eps), (0.0, self.t_max), evs,
                                    self.opts, keep=False)
        except Diverged as exc:
            t = exc.trajectory.t_final if exc.trajectory is not None else math.nan
            return SectionMapSample(x, -math.inf, 0, False, t, escaped=True)
        turns = len(tr.hits(2))
        hit = tr.terminal_event
        if hit is None:
            if tr.status == "max_time":
                return SectionMapSample(x, xm, turns, True, tr.t_final)
            raise NoReturn(f"orbit from x={x} did not return")
        if hit.event == 1:
            return SectionMapSample(x, xm, turns, True, hit.t)
        return SectionMapSample(x, hit.x, turns, False, hit.t)

    def inner(self, x):
        """Regularized passage from the left half of the line to the right half."""
        x = float(x)
        if x >= self.x_mu:
            raise OutOfDomain(f"inner map needs x < x_mu = {self.x_mu}, got {x}")
        ev = EventSpec("cross_y", self.eps, "up")
        try:
            tr = integrate_to_event(self.st, (x, self.eps), (0.0, self.t_max), [ev], self.opts, keep=False)
        except Diverged as exc:
            raise NoReturn(f"regularized orbit from x={x} diverged") from exc
        hit = tr.terminal_event
        if hit is None:
            raise NoReturn(f"regularized orbit from x={x} never left the strip")
        return SectionMapSample(x, hit.x, 0, False, hit.t)

    def one_sided(self, x):
        """Return of the upper field alone (continued below the line)."""
        x = float(x)
        if x >= self.x_mu:
            raise OutOfDomain(f"one-sided return needs x < x_mu = {self.x_mu}, got {x}")
        ev = EventSpec("cross_y", self.eps, "up", window=(self.x_mu, math.inf))
        tr = integrate_to_event(self.system.upper, (x, self.eps), (0.0, self.t_max), [ev], self.opts,
                                keep=False)
        hit = tr.terminal_event
        if hit is None:
            raise NoReturn(f"upper orbit from x={x} did not return")
        return SectionMapSample(x, hit.x, 0, False, hit.t)

    def composite(self, x):
        q = self.inner(x)
        e = self.exterior(q.x_out)
        return SectionMapSample(x, e.x_out, e.turns, e.trapped, q.flight_time + e.flight_time, e.escaped)

    def composite_value(self, x):
        return self.composite(x).x_out

    # fixed points ---------------------------------------------------------

    def scan_interval(self, L=None):
        L = defaults()["regions"]["L"] if L is None else L
        xm = self.x_mu
        # x_mu itself is a trivial fixed point of the extended map
        return -L, xm - 1e-6 * (L + abs(xm))

    def fixed_points(self, n=None, L=None, refine=True):
        """Fixed points of the composite map on the scan interval.

        Sign changes of ``composite(x) - x`` are bracketed on a uniform grid
        and polished. Grid minima (maxima) that stay positive (negative) are
        refined with a bounded minimization so that a close pair of roots
        falling between two grid nodes is not missed.
        """
        n = defaults()["scan_points"] if n is None else n
        a, b = self.scan_interval(L)
        xs = np.linspace(a, b, n)
        gs = np.array([self._g(x) for x in xs])
        brackets = []
        for i in range(n - 1):
            g0, g1 = gs[i], gs[i + 1]
            if g0 == 0.0:
                brackets.append((xs[i], xs[i]))
            elif g0 * g1 < 0.0:
                brackets.append((xs[i], xs[i + 1]))
        if refine:
            for i in range(1, n - 1):
                g0, g1, g2 = gs[i - 1], gs[i], gs[i + 1]
                if not all(math.isfinite(v) for v in (g0, g1, g2)):
                    continue
                if g1 > 0 and g1 <= g0 and g1 <= g2:
                    sgn = 1.0
                elif g1 < 0 and g1 >= g0 and g1 >= g2:
                    sgn = -1.0
                else:
                    continue
                res = minimize_scalar(lambda x: sgn * self._g(x), bounds=(xs[i - 1], xs[i + 1]),
                                      method="bounded", options={"xatol": 1e-12 * max(1.0, abs(xs[i]))})
                if sgn * res.fun < 0.0:
                    xm = float(res.x)
                    brackets.append((xs[i - 1], xm))
                    brackets.append((xm, xs[i + 1]))
        roots = []
        for lo, hi in brackets:
            r = self._polish(lo, hi)
            if r is not None and not any(abs(r - s) <= 1e-10 * max(1.0, abs(r)) for s in roots):
                roots.append(r)
        roots.sort()
        branch = FixedPointBranch(method="scan_bisect")
        for r in roots:
            branch.points.append((self.mu, r, self.stability(r)))
        return branch

    def _g(self, x):
        try:
            return self.composite_value(x) - x
        except NoReturn:
            return math.nan

    def _polish(self, lo, hi):
        if lo == hi:
            return lo
        glo, ghi = self._g(lo), self._g(hi)
        if not (glo * ghi < 0.0):
            return None
        if math.isfinite(glo) and math.isfinite(ghi):
            try:
                r = brentq(self._g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
            except ValueError:
                r = None
        else:
            # one side escapes: plain bisection on the sign
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                gm = self._g(mid)
                if gm == 0.0 or hi - lo <= 1e-14 * max(1.0, abs(mid)):
                    break
                if (gm > 0) == (glo > 0):
                    lo, glo = mid, gm
                else:
                    hi = mid
            r = 0.5 * (lo + hi)
        if r is None:
            return None
        g = self._g(r)
        # a bracket that closed on a jump is not a fixed point
        if not (math.isfinite(g) and abs(g) <= 1e-9 * max(1.0, abs(r))):
            return None
        return float(r)

    def stability(self, x):
        try:
            d = fd_derivatives(self.composite_value, x)
        except EvaluationFailed:
            return "unstable"
        return "stable" if abs(d.first) < 1.0 else "unstable"


def exterior_map(system, eps, x, opts=None):
    """First return of the upper field from the right half of ``y = eps``."""
    return SectionMaps(system, None, eps, opts=opts).exterior(x)


def inner_map_Q(system, phi, eps, mu, x, opts=None):
    """Regularized passage map across the strip at parameter ``mu``."""
    return SectionMaps(system, phi, eps, mu, opts).inner(x)


def one_sided_return(system, eps, mu, x, opts=None):
    """Return of the upper field alone from the left to the right half of ``y = eps``."""
    return SectionMaps(system, None, eps, mu, opts).one_sided(x)


def composite_map(system, phi, eps, mu, x, opts=None):
    return SectionMaps(system, phi, eps, mu, opts).composite(x)


def composite_fixed_points(system, phi, eps, mu, opts=None, n=None, L=None):
    """Fixed points of exterior-after-inner at one parameter value.

    An empty branch is a valid answer.
    """
    return SectionMaps(system, phi, eps, mu, opts).fixed_points(n=n, L=L)


# return map on the vertical section -----------------------------------------

def _pi_setup(system):
    s0 = system.with_mu(0.0)
    rep = validate_visible_fold(s0, 0.0)
    return s0, rep.x


def _pi_events(xf):
    return [
        EventSpec("cross_x", xf, "right", window=(-0.5, 0.5), name="return"),
    ]


def _pi_value(s0, xf, y0, opts):
    try:
        tr = integrate_to_event(s0.upper, (xf, y0), (0.0, defaults()["max_flight_time"]),
                                _pi_events(xf), opts, keep=False)
    except Diverged as exc:
        raise NoReturn(f"orbit from y0={y0} escaped") from exc
    hit = tr.terminal_event
    if hit is None:
        raise NoReturn(f"orbit from y0={y0} did not return to the section")
    return hit.y


def pi_prime_routes(system, opts=None, h=1e-6):
    """Multiplier of the grazing orbit by two independent routes.

    Returns ``(monodromy, finite_difference)``. The first comes from the
    variational equations integrated once around the orbit; the second from
    one-sided differences of the return map at ``y0 = h, h/2`` combined by a
    Richardson step.
    """
    opts = opts if opts is not None else IntegratorOptions.from_defaults(rel_tol=1e-12, abs_tol=1e-14)
    s0, xf = _pi_setup(system)
    tr, var = integrate_variational(s0.upper, (xf, 0.0), (0.0, defaults()["max_flight_time"]),
                                    _pi_events(xf), opts, direction=(0.0, 1.0), keep=False,
                                    second=False)
    if tr.terminal_event is None:
        raise NoReturn("the grazing orbit did not close")
    M = var.first
    fx, fy = s0.upper.eval(*var.base)
    mono = M[1, 1] - fy * M[0, 1] / fx
    d1 = _pi_value(s0, xf, h, opts) / h
    d2 = _pi_value(s0, xf, h / 2, opts) / (h / 2)
    return float(mono), float(2 * d2 - d1)


def return_map_pi(system, y0, opts=None, rtol=1e-5):
    """Return map of the upper field on the vertical through the tangency.

    The field is taken at ``mu = 0``, where the periodic orbit grazes the
    switching line at ``y = 0``. Returns ``(pi(y0), pi'(0))``.

    Raises
    ------
    NoReturn
        The orbit from ``y0`` escapes.
    UnattainableTolerance
        The two routes to ``pi'(0)`` disagree by more than ``rtol``.
    """
    opts_v = opts if opts is not None else IntegratorOptions.from_defaults(rel_tol=1e-12, abs_tol=1e-14)
    mono, fd = pi_prime_routes(system, opts_v)
    if abs(mono - fd) > rtol * abs(mono):
        raise UnattainableTolerance(f"multiplier routes disagree: {mono} vs {fd}")
    s0, xf = _pi_setup(system)
    val = 0.0 if y0 == 0.0 else _pi_value(s0, xf, float(y0), opts_v)
    return val, mono
