"""Adaptive Dormand-Prince 5(4) integration with located events.

Events are found without dense output: once an accepted step brackets a sign
change, the root is refined by re-integrating single steps of shorter length
from the start of the bracketing step. The state reported at an event is
therefore an actual integrator state, not an interpolant.

A step that shows no sign change but whose event derivative flips sign is
inspected for an interior extremum, so that an orbit dipping through a line
and back within one step is still caught. A pure touch (extremum on the
line to within the event tolerance) is not a crossing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import defaults
from .errors import Diverged, MaxEvents, NoSignChange, ValidationError

__all__ = [
    "IntegratorOptions",
    "EventSpec",
    "EventHit",
    "Trajectory",
    "VariationalState",
    "integrate_ode",
    "integrate_to_event",
    "integrate_variational",
    "locate_event_time",
    "write_trajectory_csv",
]

_EPS = np.finfo(float).eps

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def _dp_step(f, t, y, h, k1):
    r = range(len(y))
    k2 = f(t + _C2 * h, [y[i] + h * _A21 * k1[i] for i in r])
    k3 = f(t + _C3 * h, [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in r])
    k4 = f(t + _C4 * h, [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in r])
    k5 = f(t + _C5 * h, [y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]) for i in r])
    k6 = f(t + h, [y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]) for i in r])
    yn = [y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]) for i in r]
    k7 = f(t + h, yn)
    err = [h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]) for i in r]
    return yn, k7, err


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    event_tol: float = 1e-13
    max_step: float = math.inf
    first_step: float | None = None
    max_events: int = 10_000
    max_steps: int = 5_000_000
    divergence_bound: float = 1e6

    @classmethod
    def from_defaults(cls, **overrides):
        d = dict(defaults()["integrator"])
        d.update(overrides)
        return cls(**d)

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "event_tol", "max_step", "divergence_bound"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValidationError(f"{name} must be positive", field=name)


_KINDS = {"cross_y": (1, 0), "cross_x": (0, 1), "tangency_y": (1, 0), "cross": (None, None)}
_DIRS = {"up": 1, "right": 1, "down": -1, "left": -1, "any": 0}


@dataclass(frozen=True)
class EventSpec:
    """Event on a coordinate of the state.

    ``kind`` is ``cross_y`` (``y = level``), ``cross_x`` (``x = level``),
    ``tangency_y`` (``y' = 0`` within ``guard`` of ``level``) or ``cross``
    with an explicit ``index``. ``direction`` refers to forward time whatever
    the sign of the integration step. ``window`` restricts hits to states
    whose other coordinate (``x`` for ``cross_y``, ``y`` for ``cross_x``, or
    ``window_index``) lies in the closed interval. A terminal event stops
    the run at its ``count``-th accepted hit.
    """

    kind: str
    level: float
    direction: str = "any"
    terminal: bool = True
    window: tuple[float, float] | None = None
    count: int = 1
    guard: float = 1e-6
    index: int | None = None
    window_index: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}", field="kind")
        if self.direction not in _DIRS:
            raise ValidationError(f"unknown direction {self.direction!r}", field="direction")
        if self.kind == "cross" and self.index is None:
            raise ValidationError("a generic crossing needs an index", field="index")
        if self.count < 1:
            raise ValidationError("count must be at least one", field="count")

    @property
    def coord(self):
        return self.index if self.index is not None else _KINDS[self.kind][0]

    @property
    def wcoord(self):
        return self.window_index if self.window_index is not None else _KINDS[self.kind][1]


@dataclass(frozen=True)
class EventHit:
    t: float
    state: tuple
    event: int
    kind: str
    direction: int   # forward-time sign of the crossing velocity
    name: str = ""

    @property
    def x(self):
        return self.state[0]

    @property
    def y(self):
        return self.state[1]


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    events: list = field(default_factory=list)
    status: str = "completed"
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final(self):
        return tuple(self.states[-1])

    @property
    def t_final(self):
        return float(self.t[-1])

    @property
    def terminal_event(self):
        if self.status == "event_terminated" and self.events:
            return self.events[-1]
        return None

    def hits(self, event):
        return [e for e in self.events if e.event == event]


@dataclass(frozen=True)
class VariationalState:
    """Fixed-time derivatives of the flow at the end of a run.

    ``first`` is the 2x2 fundamental matrix. ``direction`` is the seed
    ``d``; ``first_dir = first @ d`` and ``second`` is the second derivative of
    the flow along ``d``.
    """

    base: tuple
    first: np.ndarray
    direction: tuple
    first_dir: tuple
    second: tuple


def locate_event_time(fn, a, b, tol=1e-13):
    """Root of the scalar ``fn`` on ``[a, b]`` (bisection/secant hybrid)."""
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise NoSignChange(f"no sign change on [{a}, {b}]")
    lo, hi = (a, b) if a < b else (b, a)
    return brentq(fn, lo, hi, xtol=tol, rtol=4 * _EPS, maxiter=200)


def _sign(v):
    return 1 if v > 0 else (-1 if v < 0 else 0)


class _Step:
    """Accepted step, kept so roots can be refined by re-integration."""

    __slots__ = ("f", "t0", "y0", "k0", "h", "y1", "k1", "_cache")

    def __init__(self, f, t0, y0, k0, h, y1, k1):
        self.f, self.t0, self.y0, self.k0, self.h = f, t0, y0, k0, h
        self.y1, self.k1 = y1, k1
        self._cache = {}

    def at(self, s):
        if s == 0.0:
            return self.y0, self.k0
        if s == self.h:
            return self.y1, self.k1
        hit = self._cache.get(s)
        if hit is None:
            y, k, _ = _dp_step(self.f, self.t0, self.y0, s, self.k0)
            hit = (y, k)
            self._cache[s] = hit
        return hit


def _root(step, fn, a, b, tol):
    return locate_event_time(lambda s: fn(*step.at(s)), a, b, tol)


def _scan_crossing(step, ev, tol, first_step):
    """Crossing times (step offsets) of ``ev`` in ``step``, in order.

    Values within a roundoff band of the level count as on it; an extremum
    inside the band is a touch, not a crossing.
    """
    i, c = ev.coord, ev.level
    h = step.h
    band = 16.0 * _EPS * max(1.0, abs(c))
    g0, g1 = step.y0[i] - c, step.y1[i] - c
    d0, d1 = step.k0[i] * h, step.k1[i] * h     # rates along the run direction
    gfun = lambda y, k: y[i] - c
    dfun = lambda y, k: k[i]
    s1 = 0 if abs(g1) <= band else _sign(g1)
    if abs(g0) > band:
        s0 = _sign(g0)
        if s1 == -s0:
            if d0 * d1 < 0.0 and s0 * d0 < 0.0:
                te = _root(step, dfun, 0.0, h, tol)
                if abs(step.at(te)[0][i] - c) <= band:
                    return []
            return [_root(step, gfun, 0.0, h, tol)]
        if s1 == 0:
            # ends on the level: a hit only if it arrives transversally
            return [h] if s0 * d1 < 0.0 and abs(step.k1[i]) > math.sqrt(band) else []
        if not (d0 * d1 < 0.0 and s0 * d0 < 0.0):
            return []
        te = _root(step, dfun, 0.0, h, tol)
        ge = step.at(te)[0][i] - c
        if _sign(ge) == -s0 and abs(ge) > band:
            return [_root(step, gfun, 0.0, te, tol), _root(step, gfun, te, h, tol)]
        return []
    # the step starts on the level: only the first step of a run may do so
    if not first_step:
        return []
    s0 = _sign(d0)
    if s0 == 0 or not d0 * d1 < 0.0:
        return []
    te = _root(step, dfun, 0.0, h, tol)
    ge = step.at(te)[0][i] - c
    if _sign(ge) != s0 or abs(ge) <= max(tol, band):
        return []   # tangent start: no excursion away from the level
    if s1 == -s0:
        return [_root(step, gfun, te, h, tol)]
    if s1 == 0:
        return [h]
    return []


def _compile(events):
    evs = list(events)
    for ev in evs:
        if not isinstance(ev, EventSpec):
            raise ValidationError("events must be EventSpec instances")
    return evs


def integrate_ode(rhs, t0, y0, t_end, events=(), opts=None, keep=True):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` towards ``t_end``.

    ``rhs`` takes and returns sequences of floats. ``t_end < t0`` integrates
    backwards. Returns a :class:`Trajectory`; raises :class:`Diverged` or
    :class:`MaxEvents`.
    """
    opts = opts or IntegratorOptions()
    evs = _compile(events)
    y = [float(v) for v in y0]
    n = len(y)
    t = float(t0)
    t_end = float(t_end)
    span = t_end - t
    if span == 0.0:
        arr = np.array([y])
        return Trajectory(np.array([t]), arr, [], "completed")
    sgn = 1.0 if span > 0 else -1.0
    rtol, atol = opts.rel_tol, opts.abs_tol
    k = list(rhs(t, y))

    # starting step (Hairer-Norsett-Wanner heuristic)
    if opts.first_step is not None:
        h = abs(opts.first_step)
    else:
        sc = [atol + rtol * abs(v) for v in y]
        d0 = max(abs(y[j]) / sc[j] for j in range(n))
        d1 = max(abs(k[j]) / sc[j] for j in range(n))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        yt = [y[j] + sgn * h0 * k[j] for j in range(n)]
        kt = rhs(t + sgn * h0, yt)
        d2 = max(abs(kt[j] - k[j]) / sc[j] for j in range(n)) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100 * h0, h1)
    h = min(h, abs(span), opts.max_step)

    ts, ys = [t], [tuple(y)]
    hits = []
    counts = [0] * len(evs)
    n_nonterminal = 0
    err_prev = 1e-4
    n_steps = n_rej = 0
    status = "completed" if not any(e.terminal for e in evs) else "max_time"
    first = True
    bound = opts.divergence_bound

    while True:
        if n_steps >= opts.max_steps:
            raise Diverged(f"step budget of {opts.max_steps} exhausted at t={t}")
        remaining = (t_end - t) * sgn
        if remaining <= 1e-14 * max(1.0, abs(t)):
            break
        h = min(h, remaining)
        hs = sgn * h
        yn, kn, err = _dp_step(rhs, t, y, hs, k)
        en = 0.0
        for j in range(n):
            sc = atol + rtol * max(abs(y[j]), abs(yn[j]))
            q = abs(err[j]) / sc
            if q > en:
                en = q
        if not math.isfinite(en):
            en = 1e10
        if en > 1.0:
            n_rej += 1
            h *= max(0.2, 0.9 * en ** -0.2)
            if h < 1e-15 * max(1.0, abs(t)):
                raise Diverged(f"step size underflow at t={t}", _partial(ts, ys, hits))
            continue
        n_steps += 1
        step = _Step(rhs, t, y, k, hs, yn, kn)
        found = []
        for ei, ev in enumerate(evs):
            if ev.kind == "tangency_y":
                found.extend(_scan_tangency(step, ei, ev, opts.event_tol))
            else:
                for s in _scan_crossing(step, ev, opts.event_tol, first):
                    found.append((s, ei))
        first = False
        stop_at = None
        if found:
            found.sort(key=lambda p: p[0] * sgn)
            for s, ei in found:
                ev = evs[ei]
                ys_, ks_ = step.at(s)
                i = ev.coord
                if ev.kind == "tangency_y":
                    dirn = 0
                else:
                    dirn = _sign(ks_[i])
                    want = _DIRS[ev.direction]
                    if want and dirn != want:
                        continue
                if ev.window is not None:
                    w = ys_[ev.wcoord]
                    if not (ev.window[0] <= w <= ev.window[1]):
                        continue
                counts[ei] += 1
                hit = EventHit(t + s, tuple(ys_), ei, ev.kind, dirn, ev.name)
                hits.append(hit)
                if ev.terminal and counts[ei] >= ev.count:
                    stop_at = (s, ys_, ks_)
                    break
                n_nonterminal += 1
                if n_nonterminal > opts.max_events:
                    raise MaxEvents(f"more than {opts.max_events} events recorded")
        if stop_at is not None:
            s, ys_, ks_ = stop_at
            t = t + s
            y = list(ys_)
            ts.append(t)
            ys.append(tuple(y))
            status = "event_terminated"
            break
        t = t + hs
        y, k = yn, kn
        if keep:
            ts.append(t)
            ys.append(tuple(y))
        if max(abs(v) for v in y) > bound:
            if not keep:
                ts.append(t)
                ys.append(tuple(y))
            raise Diverged(f"|state| exceeded {bound} at t={t}", _partial(ts, ys, hits, "diverged"))
        # PI step-size control
        en = max(en, 1e-10)
        fac = 0.9 * en ** (-0.7 / 5) * err_prev ** (0.4 / 5)
        fac = min(5.0, max(0.2, fac))
        err_prev = en
        h = min(h * fac, opts.max_step)
    if not keep and (len(ts) == 1 or ts[-1] != t):
        ts.append(t)
        ys.append(tuple(y))
    traj = Trajectory(np.array(ts), np.array(ys), hits, status, n_steps, n_rej)
    return traj


def _partial(ts, ys, hits, status="diverged"):
    return Trajectory(np.array(ts), np.array(ys), list(hits), status)


def _scan_tangency(step, ei, ev, tol):
    i = ev.coord
    if not (step.k0[i] * step.k1[i] < 0):
        return []
    te = _root(step, lambda y, k: k[i], 0.0, step.h, tol)
    ye, _ = step.at(te)
    if abs(ye[i] - ev.level) <= ev.guard:
        return [(te, ei)]
    return []


def _field_rhs(fld):
    ev = fld.eval

    def rhs(t, s):
        return ev(s[0], s[1])

    return rhs


def integrate_to_event(fld, start, t_span, events=(), opts=None, keep=True):
    """Integrate a planar field from ``start`` over ``t_span = (t0, t1)``.

    ``fld`` is a :class:`~grazslide.dynsys.SmoothField` or any object with an
    ``eval(x, y)`` method.
    """
    x, y = start
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError("start must be finite", field="start")
    t0, t1 = t_span
    return integrate_ode(_field_rhs(fld), t0, (x, y), t1, events, opts, keep)


def integrate_variational(fld, start, t_span, events=(), opts=None, direction=(1.0, 0.0), keep=True,
                          second=True):
    """Integrate the flow together with its first and second variations.

    The augmented state is ``(x, y, P00, P01, P10, P11, z_x, z_y)`` where ``P`` is
    the fundamental matrix and ``z`` the second variation along ``direction``.
    Returns ``(trajectory, VariationalState)`` at the final time, fixed-time
    derivatives included.

    With ``second=False`` the second variation is frozen at zero. Worth doing
    for fields without an analytic second derivative, whose difference
    quotient is noisy enough to slow the step control down.
    """
    dx, dy = direction

    def rhs(t, s):
        x, y = s[0], s[1]
        f = fld.eval(x, y)
        (a, b), (c, d) = fld.jacobian(x, y)
        p00, p01, p10, p11 = s[2], s[3], s[4], s[5]
        wx = p00 * dx + p01 * dy
        wy = p10 * dx + p11 * dy
        q = fld.second_variation(x, y, wx, wy) if second else (0.0, 0.0)
        return (
            f[0], f[1],
            a * p00 + b * p10, a * p01 + b * p11,
            c * p00 + d * p10, c * p01 + d * p11,
            a * s[6] + b * s[7] + q[0],
            c * s[6] + d * s[7] + q[1],
        )

    x0, y0 = start
    t0, t1 = t_span
    traj = integrate_ode(rhs, t0, (x0, y0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0), t1, events, opts, keep)
    s = traj.final
    P = np.array([[s[2], s[3]], [s[4], s[5]]])
    w = P @ np.array([dx, dy])
    var = VariationalState(base=(s[0], s[1]), first=P, direction=(dx, dy),
                           first_dir=(float(w[0]), float(w[1])), second=(s[6], s[7]))
    return traj, var


def write_trajectory_csv(traj, path, columns=("t", "x", "y")):
    """Write ``t,x,y`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for t, s in zip(traj.t, traj.states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in s[: len(columns) - 1]])
