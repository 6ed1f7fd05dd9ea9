"""Inner fold-passage problem in blown-up coordinates.

Two equivalent forms are used. The canonical one,

    x' = 1,  y' = x + y^2,

is integrated from ``(x0, 0)`` with ``x0 < 0`` to its first return to
``y = 0``; its return map ``Q0(x0) = x0 + t(x0)`` and derivatives follow from
the first and second variational equations. The form with the transition
curvature ``p = phi''(1)`` left in,

    eta' = 1,  u' = 2 eta - (p/4) u^2,

is related to it by ``x = k eta``, ``y = (k^2/2) u`` with ``k = (-p/2)^(1/3)``.
Its distinguished solution, the one that grows like ``eta ~ (p/8) u^2`` for
``u -> -inf``, fixes the exit point ``eta_0(0)`` of the slow manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import defaults
from .errors import MultipleRoots, NoReturn, NoRoot, NotConverged, ValidationError
from .integrate import EventSpec, IntegratorOptions, integrate_ode

__all__ = [
    "RiccatiConfig",
    "RiccatiReturn",
    "BifConstants",
    "canonical_return",
    "canonical_options",
    "scale_factor",
    "eta0_of_zero",
    "eta0_far_field_residuals",
    "q0_map",
    "solve_bif_constants",
]


def canonical_options():
    r = defaults()["riccati"]
    return IntegratorOptions(rel_tol=r["rel_tol"], abs_tol=r["abs_tol"], event_tol=1e-18)


@dataclass(frozen=True)
class RiccatiConfig:
    phi_second_at_one: float
    far_field_u: float = 50.0
    tol: IntegratorOptions | None = None

    def __post_init__(self):
        p = self.phi_second_at_one
        if not (math.isfinite(p) and p < 0):
            raise ValidationError("phi''(1) must be negative", field="phi_second_at_one")
        if not self.far_field_u >= 20:
            raise ValidationError("far_field_u must be at least 20", field="far_field_u")

    @classmethod
    def for_phi(cls, phi, **kw):
        kw.setdefault("far_field_u", defaults()["riccati"]["far_field_U"])
        return cls(phi.d2_at_one, **kw)

    @property
    def options(self):
        return self.tol if self.tol is not None else canonical_options()


@dataclass(frozen=True)
class RiccatiReturn:
    """Return of the canonical system from ``(x0, 0)`` to ``y = 0``.

    ``u_end``, ``v_end`` are the first and second derivatives of ``y`` with
    respect to ``x0`` at the return time. ``exp_int`` is ``exp(int 2y dt)``
    and ``int_u`` is ``int u dt``, both along the orbit.
    """

    x0: float
    t_return: float
    u_end: float
    v_end: float
    t_prime: float
    t_second: float
    f_value: float
    exp_int: float = math.nan
    int_u: float = math.nan

    @property
    def x_end(self):
        return self.x0 + self.t_return

    @property
    def q_prime(self):
        """``Q0'(x0) = 1 + t'(x0)``, written without cancellation."""
        return self.x0 * self.exp_int / self.x_end


def _canonical_rhs(t, s):
    x, y, u, v = s[0], s[1], s[2], s[3]
    return (1.0, x + y * y, 1.0 + 2.0 * y * u, 2.0 * u * u + 2.0 * y * v, 2.0 * y, u)


def canonical_return(x0, opts=None):
    """Integrate the canonical system and its variations from ``(x0, 0)``.

    Raises
    ------
    ValidationError
        Unless ``-10 <= x0 < 0``.
    NoReturn
        The orbit did not come back to ``y = 0`` (an integrator failure for
        this system).
    """
    x0 = float(x0)
    if not (-10.0 <= x0 < 0.0):
        raise ValidationError("x0 must lie in [-10, 0)", field="x0")
    opts = opts if opts is not None else canonical_options()
    ev = EventSpec("cross_y", 0.0, "up")
    tr = integrate_ode(_canonical_rhs, 0.0, (x0, 0.0, 0.0, 0.0, 0.0, 0.0), 4.0 * abs(x0) + 20.0,
                       [ev], opts, keep=False)
    hit = tr.terminal_event
    if hit is None:
        raise NoReturn(f"canonical orbit from x0={x0} did not return")
    x, _, u, v, s, iu = hit.state
    t = hit.t
    xe = x0 + t
    tp = -u / xe
    f = u * u - 2.0 * xe * u + xe * xe * v
    tpp = -f / xe ** 3
    return RiccatiReturn(x0, t, u, v, tp, tpp, f, math.exp(s), iu)


def scale_factor(p):
    """``k`` in ``x = k eta`` between the two forms of the inner problem."""
    return (-0.5 * p) ** (1.0 / 3.0)


def _far_field_eta(p, u):
    return p / 8.0 * u * u + (2.0 / p) / u + (16.0 / p ** 3) / u ** 4


def _eta_rhs(p):
    q = 0.25 * p

    def rhs(t, s):
        return (1.0, 2.0 * s[0] - q * s[1] * s[1])

    return rhs


def _eta0_at(p, U, opts, levels=()):
    u0 = -float(U)
    eta_start = _far_field_eta(p, u0)
    evs = [EventSpec("cross", 0.0, "up", index=1)]
    evs += [EventSpec("cross", lv, "up", terminal=False, index=1) for lv in levels]
    span = abs(eta_start) + 10.0
    tr = integrate_ode(_eta_rhs(p), 0.0, (eta_start, u0), span, evs, opts, keep=False)
    hit = tr.terminal_event
    if hit is None:
        raise NoReturn("the slow solution did not reach u = 0")
    return hit.state[0], [(h.state[1], h.state[0]) for h in tr.events if h.event > 0]


def eta0_of_zero(cfg):
    """Exit point ``eta_0(0)`` of the slow solution on ``u = 0``.

    The run starts on the far-field expansion at ``u = -U`` and is repeated
    from ``-2U``; the two answers must agree to the configured tolerance.

    Raises
    ------
    NotConverged
        Doubling ``U`` changed the answer by more than the tolerance.
    """
    p = cfg.phi_second_at_one
    opts = IntegratorOptions(rel_tol=1e-12, abs_tol=1e-14, event_tol=1e-14)
    a, _ = _eta0_at(p, cfg.far_field_u, opts)
    b, _ = _eta0_at(p, 2 * cfg.far_field_u, opts)
    tol = defaults()["riccati"]["richardson_tol"]
    if abs(a - b) > tol:
        raise NotConverged(f"eta_0(0) moved by {abs(a - b):.3e} when U doubled")
    return b


def eta0_far_field_residuals(cfg, depths=(25.0, 50.0, 100.0)):
    """``(|u|, eta - (p/8) u^2)`` along the slow solution at the given depths."""
    p = cfg.phi_second_at_one
    opts = IntegratorOptions(rel_tol=1e-12, abs_tol=1e-14, event_tol=1e-14)
    start = 2 * max(depths)
    _, pts = _eta0_at(p, start, opts, levels=[-d for d in depths])
    return [(abs(u), eta - p / 8.0 * u * u) for u, eta in sorted(pts, key=lambda q: -q[0])]


def q0_map(eta, cfg):
    """Scaled inner map ``eta -> (q, q')`` from ``u = 0, eta < 0`` to ``eta > 0``."""
    eta = float(eta)
    if not eta < 0:
        raise ValidationError("eta must be negative", field="eta")
    k = scale_factor(cfg.phi_second_at_one)
    r = canonical_return(k * eta, cfg.options)
    return r.x_end / k, r.q_prime


@dataclass(frozen=True)
class BifConstants:
    eta0_at_0: float
    eta_star: float
    delta0_star: float


def solve_bif_constants(pi_prime_0, cfg, bracket=None, n_check=60):
    """Semistable point ``eta*`` and offset ``delta0*`` of the saddle-node.

    ``eta*`` solves ``pi'(0) q(eta) q'(eta) = eta`` on the bracket and
    ``delta0* = (pi'(0) q(eta*)^2 - eta*^2) / (pi'(0) - 1)``.

    Raises
    ------
    ValidationError
        If ``pi'(0) <= 1 + 1e-6``.
    NoRoot, MultipleRoots
        The defining equation has no or several sign changes on the bracket.
    """
    P = float(pi_prime_0)
    if not (P > 1.0 + 1e-6):
        raise ValidationError("pi'(0) must exceed 1", field="pi_prime_0")
    lo, hi = bracket if bracket is not None else defaults()["riccati"]["eta_bracket"]

    def g(e):
        q, qp = q0_map(e, cfg)
        return P * q * qp - e

    grid = np.linspace(lo, hi, n_check)
    vals = np.array([g(float(e)) for e in grid])
    changes = int(np.sum(np.sign(vals[:-1]) != np.sign(vals[1:])))
    if changes == 0:
        raise NoRoot(f"no solution of the semistable condition on [{lo}, {hi}]")
    if changes > 1:
        raise MultipleRoots(f"{changes} sign changes of the semistable condition on [{lo}, {hi}]")
    i = int(np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0][0])
    es = brentq(g, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-14)
    q, _ = q0_map(es, cfg)
    d0 = (P * q * q - es * es) / (P - 1.0)
    return BifConstants(eta0_of_zero(cfg), float(es), float(d0))
