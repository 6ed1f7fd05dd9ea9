"""Planar piecewise-smooth systems with a switching line.

A :class:`PiecewiseSystem` carries an upper field (active for ``y > 0``), a
lower field (active for ``y < 0``) and a parameter ``mu`` that shifts the upper
field vertically, ``X+_mu(x, y) = X+_0(x, y - mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .config import defaults
from .errors import MultipleRoots, NoSignChange, ValidationError

__all__ = [
    "SmoothField",
    "TransitionFunction",
    "PiecewiseSystem",
    "FoldReport",
    "NormalFormScales",
    "default_phi",
    "polynomial_phi",
    "make_example_family",
    "make_relay_system",
    "normal_form_scales",
    "rescale_system",
    "to_normal_form",
    "validate_visible_fold",
    "from_json",
]

Pair = tuple[float, float]


@dataclass(frozen=True, eq=False)
class SmoothField:
    """Planar vector field.

    Parameters
    ----------
    func : callable
        ``func(x, y) -> (dx, dy)``.
    jac : callable, optional
        Analytic Jacobian ``jac(x, y) -> ((fxx, fxy), (fyx, fyy))``. A central
        difference is used when omitted.
    second : callable, optional
        Directional second derivative ``second(x, y, dx, dy) -> (., .)``.
    """

    func: Callable[[float, float], Pair]
    jac: Callable | None = None
    second: Callable | None = None
    name: str = ""

    def eval(self, x, y):
        return self.func(x, y)

    __call__ = eval

    def jacobian(self, x, y):
        if self.jac is not None:
            return self.jac(x, y)
        h = 1e-6 * (1.0 + abs(x) + abs(y))
        fxp, fxm = self.func(x + h, y), self.func(x - h, y)
        fyp, fym = self.func(x, y + h), self.func(x, y - h)
        return (
            ((fxp[0] - fxm[0]) / (2 * h), (fyp[0] - fym[0]) / (2 * h)),
            ((fxp[1] - fxm[1]) / (2 * h), (fyp[1] - fym[1]) / (2 * h)),
        )

    def second_variation(self, x, y, dx, dy):
        """Second derivative of the field along ``(dx, dy)``."""
        if self.second is not None:
            return self.second(x, y, dx, dy)
        nrm = math.hypot(dx, dy)
        if nrm == 0.0:
            return (0.0, 0.0)
        h = 1e-4 * (1.0 + abs(x) + abs(y)) / nrm
        fp = self.func(x + h * dx, y + h * dy)
        f0 = self.func(x, y)
        fm = self.func(x - h * dx, y - h * dy)
        return (
            (fp[0] - 2 * f0[0] + fm[0]) / (h * h),
            (fp[1] - 2 * f0[1] + fm[1]) / (h * h),
        )


@dataclass(frozen=True, eq=False)
class TransitionFunction:
    """Monotone transition ``phi`` with ``phi(v) = sign(v)`` for ``|v| >= 1``.

    ``d2_at_one`` is the one-sided second derivative at ``v = 1`` taken from
    inside the strip. It fixes the constants of the inner blow-up problem.
    """

    func: Callable[[float], float]
    deriv: Callable[[float], float]
    d2_at_one: float
    name: str = ""

    def __call__(self, v):
        if v >= 1.0:
            return 1.0
        if v <= -1.0:
            return -1.0
        return self.func(v)

    def derivative(self, v):
        if v >= 1.0 or v <= -1.0:
            return 0.0
        return self.deriv(v)

    def validate(self, n=2001):
        vs = np.linspace(-1.0, 1.0, n)
        vals = np.array([self.func(float(v)) for v in vs])
        if abs(vals[0] + 1.0) > 1e-12 or abs(vals[-1] - 1.0) > 1e-12:
            raise ValidationError(f"transition {self.name!r} must satisfy phi(-1)=-1, phi(1)=1")
        if np.any(np.diff(vals) <= 0.0):
            raise ValidationError(f"transition {self.name!r} is not strictly increasing on (-1, 1)")
        if not self.d2_at_one < 0.0:
            raise ValidationError("the one-sided second derivative at v=1 must be negative")
        return self


def default_phi():
    """``phi(v) = sin(pi v / 2)`` clamped to ``[-1, 1]``."""
    half_pi = 0.5 * math.pi
    return TransitionFunction(
        func=lambda v: math.sin(half_pi * v),
        deriv=lambda v: half_pi * math.cos(half_pi * v),
        d2_at_one=-(math.pi ** 2) / 4.0,
        name="sine",
    )


def polynomial_phi():
    """``phi(v) = (3v - v^3) / 2`` clamped to ``[-1, 1]``."""
    return TransitionFunction(
        func=lambda v: 0.5 * v * (3.0 - v * v),
        deriv=lambda v: 1.5 * (1.0 - v * v),
        d2_at_one=-3.0,
        name="cubic",
    )


@dataclass(frozen=True, eq=False)
class PiecewiseSystem:
    """Upper/lower pair separated by ``y = 0``.

    ``upper_family(mu)`` builds the upper field at a given parameter value so
    that the system can be re-parameterized with :meth:`with_mu`.
    """

    upper_family: Callable[[float], SmoothField]
    lower: SmoothField
    mu: float = 0.0
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValidationError("mu must be finite", field="mu")
        object.__setattr__(self, "upper", self.upper_family(self.mu))

    def with_mu(self, mu):
        return replace(self, mu=float(mu))

    def field_at(self, x, y):
        """Discontinuous field: upper above the line, lower below."""
        return self.upper.eval(x, y) if y > 0.0 else self.lower.eval(x, y)


def _example_upper(kappa, mu):
    k = float(kappa)
    c = mu + 1.0

    def f(x, y):
        Y = y - c
        r = math.sqrt(x * x + Y * Y)
        g = k * (r - 1.0)
        return (-Y + x * g, x + Y * g)

    def jac(x, y):
        Y = y - c
        r = math.sqrt(x * x + Y * Y)
        g = k * (r - 1.0)
        if r == 0.0:
            return ((g, -1.0), (1.0, g))
        return (
            (g + k * x * x / r, -1.0 + k * x * Y / r),
            (1.0 + k * Y * x / r, g + k * Y * Y / r),
        )

    return SmoothField(f, jac=jac, name=f"example(kappa={k}, mu={mu})")


def make_example_family(kappa, mu=0.0):
    """Rotating field with a repelling unit circle centered at ``(0, mu + 1)``.

    In polar coordinates about the center the upper field reads
    ``r' = kappa r (r - 1)``, ``theta' = 1``; the circle touches ``y = mu`` at
    ``(0, mu)``. The lower field is ``(0, 1)``.
    """
    kappa = float(kappa)
    if not (math.isfinite(kappa) and kappa > 0.0):
        raise ValidationError("kappa must be positive so the periodic orbit repels", field="kappa")
    lower = SmoothField(lambda x, y: (0.0, 1.0), jac=lambda x, y: ((0.0, 0.0), (0.0, 0.0)),
                        second=lambda x, y, dx, dy: (0.0, 0.0), name="vertical")
    return PiecewiseSystem(
        upper_family=lambda m: _example_upper(kappa, m),
        lower=lower,
        mu=float(mu),
        name="example",
        params={"kappa": kappa},
    )


def make_relay_system(a=0.3, b=-0.5):
    """Relay system ``x' = a + u^3, y' = b - u`` with ``u = sign(y)``.

    Both fields are constant; with the defaults the switching line is an
    attracting sliding line. ``mu`` is unused.
    """
    up = (a + 1.0, b - 1.0)
    lo = (a - 1.0, b + 1.0)
    zero = lambda x, y: ((0.0, 0.0), (0.0, 0.0))
    nil = lambda x, y, dx, dy: (0.0, 0.0)
    upper = SmoothField(lambda x, y: up, jac=zero, second=nil, name="relay+")
    lower = SmoothField(lambda x, y: lo, jac=zero, second=nil, name="relay-")
    return PiecewiseSystem(lambda m: upper, lower, 0.0, name="relay", params={"a": a, "b": b})


@dataclass(frozen=True)
class FoldReport:
    """Tangency of the upper field with a horizontal line ``y = level``."""

    x: float
    level: float
    slope: float          # d(X2+)/dx at the tangency
    x_speed: float        # X1+ at the tangency
    lower_speed: float    # X2- at the tangency
    visible: bool
    lower_transversal: bool

    @property
    def curvature(self):
        """Second derivative of the upper orbit ``y(x)`` at the tangency."""
        return self.slope / self.x_speed


def validate_visible_fold(system, level=0.0, search=(-0.5, 0.5), n_scan=201, tol=None):
    """Locate the unique zero of ``X2+(x, level)`` on ``search``.

    Raises
    ------
    NoSignChange
        ``X2+`` keeps its sign on the search interval.
    MultipleRoots
        More than one sign change was found.
    """
    tol = defaults()["fold_root_tol"] if tol is None else tol
    up = system.upper
    g = lambda x: up.eval(x, level)[1]
    xs = np.linspace(search[0], search[1], n_scan)
    gs = np.array([g(float(x)) for x in xs])
    sg = np.sign(gs)
    brackets = []
    for i in range(n_scan):
        if sg[i] == 0.0:
            brackets.append((i, i))
        elif i + 1 < n_scan and sg[i] * sg[i + 1] < 0.0:
            brackets.append((i, i + 1))
    if not brackets:
        raise NoSignChange(f"X2+ has no zero on y={level} within {search}")
    if len(brackets) > 1:
        raise MultipleRoots(f"X2+ has {len(brackets)} zeros on y={level} within {search}")
    i, j = brackets[0]
    if i == j:
        x0 = float(xs[i])
    else:
        x0 = brentq(g, xs[i], xs[j], xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps)
    jac = up.jacobian(x0, level)
    slope = jac[1][0]
    speed = up.eval(x0, level)[0]
    low = system.lower.eval(x0, level)[1]
    return FoldReport(
        x=x0,
        level=level,
        slope=slope,
        x_speed=speed,
        lower_speed=low,
        visible=slope * speed > 0.0,
        lower_transversal=low != 0.0,
    )


@dataclass(frozen=True)
class NormalFormScales:
    """Linear change ``(x, y, t) -> (sx x, sy y, st t)`` to the fold normal form.

    In the new variables the upper field reads ``(1, 2x) + ...`` at the fold and
    the lower field has vertical speed one. Quantities derived in normal-form
    coordinates map back through :meth:`x_back` and :meth:`y_back`.
    """

    sx: float
    sy: float
    st: float

    def x_back(self, xn):
        return xn / self.sx

    def y_back(self, yn):
        return yn / self.sy


def normal_form_scales(system, level=0.0):
    rep = validate_visible_fold(system.with_mu(0.0), level)
    a, c1, d = rep.slope, rep.x_speed, rep.lower_speed
    if not (a > 0 and c1 > 0 and d > 0):
        raise ValidationError("normal form needs a visible fold with upward lower field")
    sx = a / (2.0 * d)
    sy = a * c1 / (2.0 * d * d)
    return NormalFormScales(sx=sx, sy=sy, st=sx * c1)


def _scale_field(f, sx, sy, st):
    def g(x, y):
        u = f.eval(x / sx, y / sy)
        return (sx / st * u[0], sy / st * u[1])

    jac = None
    if f.jac is not None:
        def jac(x, y):
            j = f.jac(x / sx, y / sy)
            return (
                (j[0][0] / st, sx / sy * j[0][1] / st),
                (sy / sx * j[1][0] / st, j[1][1] / st),
            )

    return SmoothField(g, jac=jac, name=f"scaled({f.name})")


def rescale_system(system, sx, sy, st):
    """Express ``system`` in the variables ``(sx x, sy y, st t)``.

    The parameter transforms as ``mu -> sy mu`` so the vertical-shift
    convention is preserved.
    """
    fam = system.upper_family
    lower = _scale_field(system.lower, sx, sy, st)
    params = dict(system.params, scales=(sx, sy, st))
    return PiecewiseSystem(
        upper_family=lambda m: _scale_field(fam(m / sy), sx, sy, st),
        lower=lower,
        mu=system.mu * sy,
        name=f"{system.name}-scaled",
        params=params,
    )


def to_normal_form(system):
    s = normal_form_scales(system)
    return rescale_system(system, s.sx, s.sy, s.st)


_FAMILIES = {"example", "normal_form_example", "relay"}


def from_json(desc):
    """Build a system from a descriptor such as ``{"family": "example", ...}``.

    Accepts a mapping or a JSON string.
    """
    import json

    if isinstance(desc, (str, bytes)):
        try:
            desc = json.loads(desc)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"descriptor is not valid JSON: {exc}") from exc
    if not isinstance(desc, dict):
        raise ValidationError("descriptor must be a JSON object")
    fam = desc.get("family")
    if fam not in _FAMILIES:
        raise ValidationError(f"unknown family {fam!r}; expected one of {sorted(_FAMILIES)}", field="family")

    def num(key, default=None):
        if key not in desc:
            if default is None:
                raise ValidationError(f"missing field {key!r}", field=key)
            return default
        val = desc[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ValidationError(f"field {key!r} must be a finite number", field=key)
        return float(val)

    if fam == "relay":
        return make_relay_system(num("a", 0.3), num("b", -0.5))
    sys_ = make_example_family(num("kappa"), num("mu", 0.0))
    if fam == "normal_form_example":
        return to_normal_form(sys_.with_mu(0.0)).with_mu(num("mu", 0.0))
    return sys_
