"""Command-line front end.

Every subcommand is a thin wrapper over a library call. Parameters are
given as ``key=value`` tokens; unknown keys are rejected before any
integration starts. A JSON summary goes to stdout (or ``--json PATH``) and
tabular data to ``--csv PATH``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. On failure a
one-line JSON error object is written to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from . import bifurcation, hyst, riccati, sections
from .dynsys import default_phi, from_json, polynomial_phi
from .errors import GrazslideError, NumericalError, ValidationError
from .regularize import HysteresisState, hysteretic_flow, st_field
from .integrate import integrate_to_event

# name -> (allowed keys, integer keys)
COMMANDS = {
    "simulate": ({"kappa", "mu", "eps", "alpha", "x0", "y0", "t_end"}, set()),
    "poincare": ({"kappa", "mu", "eps", "x_min", "grid"}, {"grid"}),
    "riccati": ({"kappa", "pi_prime"}, set()),
    "bifurcate": ({"kappa", "eps", "grid"}, {"grid"}),
    "hysteresis": ({"kappa", "alpha", "mu", "grid", "n_max", "x_min"}, {"grid", "n_max"}),
    "horseshoe": ({"kappa", "alpha", "mu", "sigma1"}, set()),
    "measure": ({"kappa", "alpha", "mu", "grid", "k", "sigma"}, {"grid", "k"}),
}

PHIS = {"sine": default_phi, "cubic": polynomial_phi}


def _clean(obj):
    """NaN and infinities become ``null`` so the output stays valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def parse_params(command, tokens):
    allowed, ints = COMMANDS[command]
    out = {}
    for tok in tokens:
        key, sep, raw = tok.partition("=")
        if not sep:
            raise ValidationError(f"expected key=value, got {tok!r}")
        if key not in allowed:
            raise ValidationError(f"unknown parameter {key!r} for {command}; allowed: {sorted(allowed)}",
                                  field=key)
        try:
            val = int(raw) if key in ints else float(raw)
        except ValueError:
            kind = "an integer" if key in ints else "a number"
            raise ValidationError(f"{key} must be {kind}, got {raw!r}", field=key) from None
        if isinstance(val, float) and not math.isfinite(val):
            raise ValidationError(f"{key} must be finite", field=key)
        out[key] = val
    return out


def _need(p, *keys):
    for k in keys:
        if k not in p:
            raise ValidationError(f"missing parameter {k}", field=k)


def _positive(p, *keys):
    for k in keys:
        if k in p and not p[k] > 0:
            raise ValidationError(f"{k} must be positive", field=k)


def validate(command, p, ideal=False):
    """Precondition checks that need no integration."""
    _positive(p, "eps", "alpha", "grid", "n_max", "t_end", "k")
    if "eps" in p and p["eps"] > 0.1 and command in ("bifurcate", "poincare"):
        raise ValidationError("eps must lie in (0, 0.1]", field="eps")
    if command == "measure" and ideal:
        _need(p, "sigma", "k")
        if not 0 < p["sigma"] <= 1:
            raise ValidationError("sigma must lie in (0, 1]", field="sigma")
        return
    if command == "measure" and "sigma" in p:
        raise ValidationError("sigma is only used with --ideal", field="sigma")
    if command != "riccati" or "pi_prime" not in p:
        _need(p, "kappa")
    if command == "simulate":
        if ("eps" in p) == ("alpha" in p):
            raise ValidationError("give exactly one of eps (smooth) or alpha (hysteretic)")
        _need(p, "x0", "y0", "t_end")
    elif command in ("poincare", "bifurcate"):
        _need(p, "eps")
    elif command in ("hysteresis", "measure"):
        _need(p, "alpha", "mu")
    elif command == "horseshoe":
        _need(p, "alpha")
        if ("mu" in p) == ("sigma1" in p):
            raise ValidationError("give exactly one of mu or sigma1")


def _system(desc, p):
    d = dict(json.loads(desc)) if desc else {"family": "example"}
    for k in ("kappa", "mu"):
        if k in p:
            d[k] = p[k]
    return from_json(d)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _simulate(system, phi, p, args):
    if "eps" in p:
        tr = integrate_to_event(st_field(system, phi, p["eps"]), (p["x0"], p["y0"]), (0.0, p["t_end"]))
        rows = [(t, s[0], s[1]) for t, s in zip(tr.t, tr.states)]
        header = ["t", "x", "y"]
        summary = {"points": len(rows), "final": list(tr.final), "status": tr.status}
    else:
        branch = 1 if p["y0"] >= 0 else -1
        run = hysteretic_flow(system, p["alpha"], HysteresisState(p["x0"], p["y0"], branch), p["t_end"])
        rows = [(t, s[0], s[1], "+" if b == 1 else "-") for t, s, b in zip(run.t, run.states, run.branches)]
        header = ["t", "x", "y", "branch"]
        summary = {"points": len(rows), "switches": len(run.switches),
                   "final": [run.final.x, run.final.y, run.final.branch]}
    return summary, header, rows


def _poincare(system, phi, p, args):
    maps = sections.SectionMaps(system, phi, p["eps"])
    a, b = maps.scan_interval(-p["x_min"] if "x_min" in p else None)
    n = p.get("grid", 41)
    rows = []
    for i in range(n):
        x = a + (b - a) * (i + 0.5) / n
        s = maps.composite(x)
        rows.append((x, s.x_out, s.trapped))
    fps = maps.fixed_points()
    mono, fd = sections.pi_prime_routes(system)
    summary = {"x_mu": maps.x_mu, "x_tilde": maps.x_tilde, "pi_prime_0": mono, "pi_prime_0_fd": fd,
               "fixed_points": [{"x": x, "stability": st} for _, x, st in fps.points]}
    return summary, ["x", "composite", "trapped"], rows


def _riccati(system, phi, p, args):
    cfg = riccati.RiccatiConfig.for_phi(phi)
    P = p["pi_prime"] if "pi_prime" in p else sections.pi_prime_routes(system)[0]
    c = riccati.solve_bif_constants(P, cfg)
    res = riccati.eta0_far_field_residuals(cfg)
    summary = {"phi": phi.name, "pi_prime_0": P, "eta0_at_0": c.eta0_at_0, "eta_star": c.eta_star,
               "delta0_star": c.delta0_star, "far_field_residuals": [list(r) for r in res]}
    return summary, ["depth", "residual"], res


def _bifurcate(system, phi, p, args):
    r = bifurcation.locate_mu_star(system, phi, p["eps"], n=p.get("grid"))
    d = r.as_dict()
    d["c_numeric"] = r.c_numeric
    return d, ["mu", "count"], r.count_log


def _hysteresis(system, phi, p, args):
    a, mu = p["alpha"], p["mu"]
    samples = hyst.sample_map(system, a, mu, p.get("grid", 200), p.get("x_min"))
    rows = [(s.x_in, 0.0 if s.trapped else s.x_out, s.trapped) for s in samples]
    seq = hyst.discontinuity_points(system, a, mu, p.get("n_max", 30))
    summary = {"markers": hyst.compute_markers(system, a, mu).as_dict(), "E_n": seq.E_n,
               "accumulation": seq.accumulation, "ratios": seq.ratios, "horseshoe": None}
    try:
        summary["horseshoe"] = hyst.horseshoe_check(system, a, mu / a).as_dict()
    except (ValidationError, NumericalError) as exc:
        summary["horseshoe_skipped"] = str(exc)
    return summary, ["x", "P", "trapped"], rows


def _horseshoe(system, phi, p, args):
    s1 = p["sigma1"] if "sigma1" in p else p["mu"] / p["alpha"]
    return hyst.horseshoe_check(system, p["alpha"], s1).as_dict(), None, None


def _measure(system, phi, p, args):
    k = p.get("k", 10)
    if args.ideal:
        v = hyst.idealized_measure(p["sigma"], k)
        sim = hyst.idealized_simulation(p["sigma"], k) if p["sigma"] < 1 else 1.0
        rows = [(j, hyst.idealized_measure(p["sigma"], j)) for j in range(1, k + 1)]
        return {"sigma": p["sigma"], "k": k, "closed_form": v, "simulated": sim}, ["k", "fraction"], rows
    fr = hyst.basin_fractions(system, p["alpha"], p["mu"], p.get("grid", 200), k, seed=args.seed)
    try:
        sig = hyst.effective_sigma(system, p["alpha"], p["mu"])
    except NumericalError:
        sig = math.nan
    ideal = [hyst.idealized_measure(sig, j) if 0 < sig <= 1 else math.nan for j in range(1, k + 1)]
    rows = [(j, f, q) for j, (f, q) in enumerate(zip(fr, ideal), start=1)]
    return {"fractions": fr, "effective_sigma": sig, "idealized": ideal}, ["k", "fraction", "idealized"], rows


HANDLERS = {
    "simulate": _simulate,
    "poincare": _poincare,
    "riccati": _riccati,
    "bifurcate": _bifurcate,
    "hysteresis": _hysteresis,
    "horseshoe": _horseshoe,
    "measure": _measure,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="grazslide", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("params", nargs="*", metavar="key=value")
    ap.add_argument("--system", help='JSON descriptor, e.g. \'{"family": "example", "kappa": 0.2}\'')
    ap.add_argument("--phi", choices=sorted(PHIS), default="sine", help="transition function")
    ap.add_argument("--csv", metavar="PATH", help="write the tabular dataset here")
    ap.add_argument("--json", metavar="PATH", help="write the summary here instead of stdout")
    ap.add_argument("--seed", type=int, help="random grid for measure (default: midpoint grid)")
    ap.add_argument("--ideal", action="store_true", help="measure: idealized model only")
    return ap


def run(argv=None):
    """Run one command and return its exit code."""
    ap = build_parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        p = parse_params(args.command, args.params)
        validate(args.command, p, args.ideal)
        if args.ideal and args.command != "measure":
            raise ValidationError("--ideal only applies to measure")
        needs_system = not (args.command == "measure" and args.ideal) and not (
            args.command == "riccati" and "pi_prime" in p)
        try:
            system = _system(args.system, p) if needs_system else None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--system is not valid JSON: {exc}") from None
        summary, header, rows = HANDLERS[args.command](system, PHIS[args.phi](), p, args)
    except ValidationError as exc:
        _error(exc, 2)
        return 2
    except GrazslideError as exc:
        _error(exc, 3)
        return 3
    if args.csv and header is not None:
        _write_csv(args.csv, header, rows)
    text = json.dumps(_clean(summary), indent=2)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _error(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "field", None):
        err["field"] = exc.field
    print(json.dumps(err), file=sys.stderr)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
