"""Batch front-end: ``ergolock <command> --config PATH --out DIR``.

Every output file starts with a metadata header (command, config hash,
seed, version): ``# key=value`` lines for CSV, a ``metadata`` object for
JSON.  Exit status is 0 on success, 1 on a computational failure and 2 on
a configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import extension as ext
from . import locking as lk
from .config import (ParseError, RunConfig, SchemaError, a_grid, build_map, fmt, parse_config,
                     theta_grid)
from .errors import DomainError, ErgolockError, InvalidInput
from .maxmean import build_transfer_graph, karp_max_mean_cycle, oracle_Q
from .orbits import enumerate_periodic, maximizing_orbit, orbit_averages
from .potentials import Cosine, DistanceToOrbit, GridSampled, Linear, Potential, Trig
from .subaction import compute_subaction


# ------------------------------------------------------------------ building

def build_potential(cfg: RunConfig, m: dyn.MapSpec, theta: float | None = None) -> Potential:
    """Potential from the potential section; ``theta`` overrides the scan parameter."""
    v = cfg.values
    fam, alpha = v["potential.family"], v["potential.alpha"]
    lo, hi, circ = m.lo, m.hi, m.circle
    if fam == "cosine":
        t = v["potential.theta"] if theta is None else theta
        return Cosine(t, v["potential.amp"], alpha, lo, hi, circ)
    if fam == "linear":
        s = v["potential.slope"] if theta is None else theta
        return Linear(s, v["potential.offset"], alpha, lo, hi, circ)
    if fam == "trig":
        return Trig(v["potential.cos"], v["potential.sin"], alpha, lo, hi, circ)
    if fam == "grid":
        data = np.loadtxt(v["potential.grid_file"], delimiter=",", ndmin=2, comments="#")
        return GridSampled.from_arrays(data[:, 0], data[:, 1], alpha, lo, hi, circ)
    if fam == "distance":
        if "potential.points" in v:
            pts = v["potential.points"]
        else:
            q = v["potential.orbit_period"]
            cands = [o for o in enumerate_periodic(m, q) if o.period == q]
            if not cands:
                raise InvalidInput(f"no orbit of period {q}")
            pts = min(cands, key=lambda o: (abs(o.multiplier), o.base_point)).points
        return DistanceToOrbit(tuple(float(x) for x in pts), alpha, v["potential.scale"], lo, hi, circ)
    raise SchemaError("potential.family")


# ------------------------------------------------------------------- output

def metadata(cfg: RunConfig) -> dict:
    return {"command": cfg.command, "config_sha256": cfg.digest(),
            "seed": cfg["numeric.seed"], "version": __version__}


def _csv_text(cfg: RunConfig, header: list, rows) -> str:
    buf = io.StringIO()
    for k, val in metadata(cfg).items():
        buf.write(f"# {k}={val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _json_value(x, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {_json_value(v, indent + 1)}"
                          for k, v in x.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json_value(v, indent + 1) for v in x) + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    return json.dumps(str(x))


def json_text(cfg: RunConfig, payload: dict) -> str:
    return _json_value({"metadata": metadata(cfg), **payload}) + "\n"


def _write(out: Path, cfg: RunConfig, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['output.prefix']}{name}"
    path.write_text(text, encoding="utf-8")
    return path


# ----------------------------------------------------------------- commands

def cmd_orbits(cfg: RunConfig, out: Path, threads: int) -> list:
    m = build_map(cfg)
    p = build_potential(cfg, m)
    orbits = enumerate_periodic(m, cfg["numeric.max_period"])
    orbits = sorted(orbits, key=lambda o: (o.period, o.itinerary, o.base_point))
    avg = orbit_averages(orbits, p)
    rows = [(o.itinerary, o.period, o.base_point, o.multiplier, float(a), o.gap,
             " ".join(fmt(float(x)) for x in o.points)) for o, a in zip(orbits, avg)]
    head = ["itinerary", "period", "base_point", "multiplier", "birkhoff_average", "gap", "points"]
    return [_write(out, cfg, "orbits.csv", _csv_text(cfg, head, rows))]


def cmd_oracle(cfg: RunConfig, out: Path, threads: int) -> list:
    m = build_map(cfg)
    p = build_potential(cfg, m)
    n = cfg["numeric.n"]
    value, bound = oracle_Q(m, p, n)
    res = karp_max_mean_cycle(build_transfer_graph(m, p, n))
    cells = " ".join(str(c) for c in res.cycle) if cfg["numeric.emit_cycle"] else ""
    rows = [(value, bound, len(res.cycle), cells)]
    head = ["value", "error_bound", "cycle_length", "cycle_cells"]
    return [_write(out, cfg, "oracle.csv", _csv_text(cfg, head, rows))]


def cmd_subaction(cfg: RunConfig, out: Path, threads: int) -> list:
    m = build_map(cfg)
    p = build_potential(cfg, m)
    s = compute_subaction(m, p, n=cfg["numeric.n"], tol=cfg["numeric.tol"],
                          max_iter=cfg["numeric.max_iter"], max_period=cfg["numeric.max_period"])
    d = s.node_defects(m, p)
    contact = np.zeros(len(s.grid), dtype=bool)
    contact[s.contact_set] = True
    rows = [(i, float(s.grid[i]), float(s.u[i]), float(d[i]), bool(contact[i]))
            for i in range(len(s.grid))]
    head = ["node", "x", "u", "defect_at_node", "in_contact_set"]
    summary = {"Q_used": s.Q_used, "Q_supplied": s.Q_supplied, "Q_adjusted": s.Q_adjusted,
               "defect": s.defect, "seminorm_ratio": s.seminorm_ratio, "C_pen": s.C_pen,
               "iterations": s.iterations, "last_change": s.last_change,
               "interp_bound": s.interp_bound, "contact_count": int(contact.sum())}
    return [_write(out, cfg, "subaction.csv", _csv_text(cfg, head, rows)),
            _write(out, cfg, "subaction.json", json_text(cfg, {"summary": summary}))]


def _certificate_inputs(cfg: RunConfig):
    v = cfg.values
    if not v["certify.auto"]:
        keys = ("K", "delta", "lambda", "L", "lip_f", "gap", "p0", "alpha")
        vals = {k: v[f"certify.{k}"] for k in keys}
        semi = v.get("certify.phi_seminorm", 1.0)
        return vals, semi, None
    m = build_map(cfg)
    p = build_potential(cfg, m)
    h = dyn.estimate_hyperbolic(m)
    orbit, _ = maximizing_orbit(m, p, v["numeric.max_period"])
    vals = {"K": h.K, "delta": h.delta, "lambda": h.lam, "L": v["certify.L"], "lip_f": h.lip,
            "gap": orbit.gap if orbit.period > 1 else v.get("certify.gap", 1.0),
            "p0": orbit.period, "alpha": p.alpha}
    semi = v.get("certify.phi_seminorm", p.seminorm().holder_seminorm)
    return vals, semi, orbit


def cmd_certify(cfg: RunConfig, out: Path, threads: int) -> list:
    vals, semi, orbit = _certificate_inputs(cfg)
    cert = lk.certificate(vals["K"], vals["delta"], vals["lambda"], vals["L"], vals["lip_f"],
                          vals["gap"], vals["p0"], vals["alpha"])
    bud = lk.budget(cert, semi, cfg["certify.d_g"], theta_lock=cfg.get("certify.theta_lock"))
    payload = {"inputs": cert.inputs, "derived": cert.derived, "budget": bud.as_dict(),
               "phi_seminorm": semi, "d_g": cfg["certify.d_g"]}
    if vals["alpha"] == 1.0:
        exact = lk.certificate_exact(*(Fraction(vals[k]) for k in ("K", "delta", "lambda", "L",
                                                                     "lip_f", "gap")), int(vals["p0"]))
        payload["derived_exact"] = {k: str(q) for k, q in exact.items()}
    if orbit is not None:
        payload["orbit"] = {"period": orbit.period, "itinerary": orbit.itinerary,
                            "points": list(orbit.points)}
    return [_write(out, cfg, "certificate.json", json_text(cfg, payload))]


def cmd_scan(cfg: RunConfig, out: Path, threads: int) -> list:
    A, T = a_grid(cfg), theta_grid(cfg)
    m0 = build_map(cfg, float(A[0]))  # the potential lives on the family's common domain
    table = lk.locking_scan(lambda a: build_map(cfg, a), lambda t: build_potential(cfg, m0, t),
                            A, T, cfg["numeric.max_period"], threads,
                            theta_periodic=cfg["potential.family"] == "cosine")
    head = ["a", "theta", "period", "itinerary", "birkhoff_avg", "locked_flag", "status"]
    summary = {"cells": int(table.status.size),
               "well_defined_fraction": table.well_defined_fraction(),
               "locked_cells": int(np.sum(table.locked)),
               "intervals": len(table.intervals())}
    return [_write(out, cfg, "scan.csv", _csv_text(cfg, head, table.rows())),
            _write(out, cfg, "scan.json", json_text(cfg, {"summary": summary}))]


def cmd_extend(cfg: RunConfig, out: Path, threads: int) -> list:
    f = build_map(cfg)
    res = ext.find_hyperbolic_extension(f)
    rep = ext.verify_extension(res, f, max_period=cfg["numeric.verify_period"])
    payload = {"extension": res.metadata(),
               "verification": {"items": rep.items, "kappa": rep.kappa, "eta_W": rep.eta_W,
                                "escape_bound": rep.escape_bound,
                                "max_entry_time": int(np.max(rep.entry_times)),
                                "min_outer_derivative": rep.min_outer_derivative,
                                "maximizer": list(rep.maximizer), "Q": rep.Q}}
    xs = np.linspace(res.a0, res.b0, cfg["numeric.plot_samples"])
    ys = res.F(xs)
    piece = np.where(xs < res.a, "left", np.where(xs > res.b, "right", "f"))
    rows = zip(xs.tolist(), ys.tolist(), piece.tolist())
    return [_write(out, cfg, "extension.json", json_text(cfg, payload)),
            _write(out, cfg, "extension.csv", _csv_text(cfg, ["x", "F", "piece"], rows))]


def cmd_lock_test(cfg: RunConfig, out: Path, threads: int) -> list:
    m = build_map(cfg)
    p = build_potential(cfg, m)
    orbits = enumerate_periodic(m, cfg["numeric.max_period"])
    expected, Q = maximizing_orbit(m, p, cfg["numeric.max_period"], orbits)
    mine, other, margin = lk.competitor_margin(orbits, p, expected)
    bud = lk.PerturbationBudget(math.inf, cfg["numeric.budget_fraction"] * margin, 0.0, math.inf)
    res = lk.empirical_lock_test(m, p, expected, cfg["numeric.max_period"], cfg["numeric.samples"],
                                 bud, cfg["numeric.seed"], orbits)
    payload = {"expected": {"period": expected.period, "itinerary": expected.itinerary,
                            "points": list(expected.points), "average": mine},
               "best_competitor_average": other, "margin": margin,
               "xi_sup_max": bud.xi_sup_max, "samples": res.samples,
               "lock_rate": res.lock_rate, "failures": len(res.failures)}
    return [_write(out, cfg, "lock_test.json", json_text(cfg, payload))]


COMMANDS = {"orbits": cmd_orbits, "oracle": cmd_oracle, "subaction": cmd_subaction,
            "certify": cmd_certify, "scan": cmd_scan, "extend": cmd_extend,
            "lock-test": cmd_lock_test}


def run(cfg: RunConfig, out: Path | str = ".", threads: int = 1) -> list:
    """Execute a validated config and return the written paths."""
    return COMMANDS[cfg.command](cfg, Path(out), threads)


# ---------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    ap = argparse.ArgumentParser(prog="ergolock", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "oracle":
            sp.add_argument("--n", type=int, default=None)
            sp.add_argument("--emit-cycle", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["numeric.seed"] = args.seed
    if getattr(args, "n", None) is not None:
        overrides["numeric.n"] = args.n
    if getattr(args, "emit_cycle", False):
        overrides["numeric.emit_cycle"] = True
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.command, overrides)
        out = args.out if args.out is not None else Path(cfg.get("output.dir", "."))
    except (ParseError, SchemaError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, InvalidInput, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run(cfg, out, max(1, args.threads))
    except (InvalidInput, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ErgolockError, ArithmeticError, ValueError) as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
