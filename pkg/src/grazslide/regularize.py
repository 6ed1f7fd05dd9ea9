"""Sotomayor-Teixeira regularization, Filippov sliding and hysteretic switching.

All three replace the discontinuous system by something that can be
integrated: a smooth field that blends the two sides inside a strip
``|y| <= eps``, a one-dimensional sliding vector field on the switching line,
or a two-branch flow whose branch flips when the orbit reaches ``y = -alpha``
(upper to lower) or ``y = +alpha`` (lower to upper).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dynsys import SmoothField
from .errors import NotSliding, Trapped, ValidationError
from .integrate import EventSpec, IntegratorOptions, Trajectory, integrate_ode, integrate_to_event

__all__ = [
    "st_field",
    "filippov_sliding",
    "sliding_trajectory",
    "HysteresisState",
    "HysteresisRun",
    "hysteretic_flow",
    "write_hysteresis_csv",
    "write_switch_csv",
]


def st_field(system, phi, eps):
    """Regularized field ``(X+ + X-)/2 + phi(y/eps) (X+ - X-)/2``.

    Outside the strip the transition is clamped, so the result equals the
    upper field above it and the lower field below it.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise ValidationError("eps must be positive", field="eps")
    up, lo = system.upper.eval, system.lower.eval
    ujac, ljac = system.upper.jacobian, system.lower.jacobian
    inv = 1.0 / eps

    def f(x, y):
        v = y * inv
        if v >= 1.0:
            return up(x, y)
        if v <= -1.0:
            return lo(x, y)
        p = phi.func(v)
        a = up(x, y)
        b = lo(x, y)
        wp, wm = 0.5 * (1.0 + p), 0.5 * (1.0 - p)
        return (wp * a[0] + wm * b[0], wp * a[1] + wm * b[1])

    def jac(x, y):
        v = y * inv
        if v >= 1.0:
            return ujac(x, y)
        if v <= -1.0:
            return ljac(x, y)
        p = phi.func(v)
        dp = phi.deriv(v) * inv
        a, b = up(x, y), lo(x, y)
        ja, jb = ujac(x, y), ljac(x, y)
        wp, wm = 0.5 * (1.0 + p), 0.5 * (1.0 - p)
        return (
            (wp * ja[0][0] + wm * jb[0][0], wp * ja[0][1] + wm * jb[0][1] + 0.5 * dp * (a[0] - b[0])),
            (wp * ja[1][0] + wm * jb[1][0], wp * ja[1][1] + wm * jb[1][1] + 0.5 * dp * (a[1] - b[1])),
        )

    return SmoothField(f, jac=jac, name=f"st(eps={eps})")


def filippov_sliding(system, x, y=0.0):
    """Sliding speed on the switching line.

    ``(X2- X1+ - X1- X2+) / (X2- - X2+)``: the horizontal component of the
    convex combination of the two fields that is tangent to the line.

    Raises
    ------
    NotSliding
        Unless ``X2+ <= 0 < X2-`` at the point (the fold end of the region
        is included).
    """
    a = system.upper.eval(x, y)
    b = system.lower.eval(x, y)
    if not (a[1] <= 0.0 < b[1]):
        raise NotSliding(f"no attracting sliding at x={x}: X2+={a[1]}, X2-={b[1]}")
    return (b[1] * a[0] - b[0] * a[1]) / (b[1] - a[1])


def sliding_trajectory(system, x0, t_end, opts=None, keep=True):
    """Solve ``x' = filippov_sliding(x)`` from ``x0``.

    The run stops early (status ``event_terminated``) if it reaches the
    boundary of the sliding region, where ``X2+`` vanishes.
    """
    filippov_sliding(system, x0)
    up = system.upper.eval

    def rhs(t, s):
        a = up(s[0], 0.0)
        b = system.lower.eval(s[0], 0.0)
        if not (a[1] < 0.0 < b[1]):
            return (0.0, 1.0)  # outside the region; only evaluated past the stopping event
        return ((b[1] * a[0] - b[0] * a[1]) / (b[1] - a[1]), a[1])

    # second slot tracks X2+ so the boundary of the region is a located event
    tr = integrate_ode(rhs, 0.0, (x0, up(x0, 0.0)[1]), t_end,
                       [EventSpec("cross", 0.0, "any", index=1)], opts, keep)
    return tr


@dataclass(frozen=True)
class HysteresisState:
    x: float
    y: float
    branch: int  # +1 upper field active, -1 lower field active

    def __post_init__(self):
        if self.branch not in (1, -1):
            raise ValidationError("branch must be +1 or -1", field="branch")


@dataclass
class HysteresisRun:
    t: np.ndarray
    states: np.ndarray
    branches: np.ndarray
    switches: list = field(default_factory=list)   # (t, x, y, from, to)

    @property
    def final(self):
        return HysteresisState(float(self.states[-1, 0]), float(self.states[-1, 1]), int(self.branches[-1]))


def hysteretic_flow(system, alpha, start, t_end, opts=None, max_switches=1_000_000,
                    max_turn_time=None):
    """Integrate the two-branch hysteretic system up to ``t_end``.

    The upper branch runs until a downward crossing of ``y = -alpha``; the
    lower branch runs until an upward crossing of ``y = +alpha``. Touching the
    line without crossing does not switch.

    ``max_turn_time`` bounds the time spent on one branch; exceeding it raises
    :class:`Trapped`.
    """
    if not (alpha > 0):
        raise ValidationError("alpha must be positive", field="alpha")
    if start.y > alpha and start.branch == -1 or start.y < -alpha and start.branch == 1:
        raise ValidationError("branch is inconsistent with the start height", field="branch")
    ts, xs, ys, bs, sw = [], [], [], [], []
    t = 0.0
    st = start
    first = True
    while t < t_end:
        fld = system.upper if st.branch == 1 else system.lower
        ev = EventSpec("cross_y", -alpha if st.branch == 1 else alpha,
                       "down" if st.branch == 1 else "up")
        stop = t_end if max_turn_time is None else min(t_end, t + max_turn_time)
        tr = integrate_to_event(fld, (st.x, st.y), (t, stop), [ev], opts)
        seg_t = tr.t if first else tr.t[1:]
        seg_s = tr.states if first else tr.states[1:]
        first = False
        ts.append(seg_t)
        xs.append(seg_s[:, 0])
        ys.append(seg_s[:, 1])
        bs.append(np.full(len(seg_t), st.branch))
        t = tr.t_final
        x, y = tr.final
        if tr.status != "event_terminated":
            if max_turn_time is not None and t < t_end:
                raise Trapped(f"no switch within {max_turn_time} time units")
            break
        nb = -st.branch
        sw.append((t, x, y, st.branch, nb))
        if len(sw) > max_switches:
            raise Trapped(f"more than {max_switches} switches")
        st = HysteresisState(x, y, nb)
    return HysteresisRun(np.concatenate(ts), np.column_stack([np.concatenate(xs), np.concatenate(ys)]),
                         np.concatenate(bs), sw)


def _b(v):
    return "+" if v == 1 else "-"


def write_hysteresis_csv(run, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "branch"])
        for t, (x, y), b in zip(run.t, run.states, run.branches):
            w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", _b(b)])


def write_switch_csv(run, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "from", "to"])
        for t, x, y, a, b in run.switches:
            w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", _b(a), _b(b)])
