"""Line-oriented ``key = value`` run configurations with a strict schema."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import ErgolockError

COMMANDS = ("orbits", "oracle", "subaction", "certify", "scan", "extend", "lock-test")


class ParseError(ErgolockError, ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(ErgolockError, ValueError):
    def __init__(self, key: str, message: str = ""):
        super().__init__(f"{key}: {message}" if message else key)
        self.key = key


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _enum(*choices):
    def conv(text):
        if text not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}")
        return text
    return conv


def _alpha(text):
    v = float(text)
    if not 0 < v <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be nonnegative")
    return v


def _pos_float(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


SCHEMA = {
    "command": _enum(*COMMANDS),
    "map.family": _enum("doubling", "tent", "logistic", "quadratic", "markov", "sine", "polynomial"),
    "map.a": float, "map.s": float, "map.c": float, "map.r": _pos_int,
    "map.offset": float, "map.amp": float, "map.coeffs": _floats,
    "map.lo": float, "map.hi": float,
    "map.breakpoints": _floats, "map.left_values": _floats, "map.slopes": _floats,
    "potential.family": _enum("cosine", "linear", "distance", "grid", "trig"),
    "potential.theta": float, "potential.amp": float, "potential.alpha": _alpha,
    "potential.slope": float, "potential.offset": float, "potential.scale": _pos_float,
    "potential.points": _floats, "potential.orbit_period": _pos_int,
    "potential.grid_file": str, "potential.cos": _floats, "potential.sin": _floats,
    "numeric.tol": _pos_float, "numeric.max_period": _pos_int, "numeric.seed": _nonneg_int,
    "numeric.n": _pos_int, "numeric.max_iter": _pos_int, "numeric.samples": _pos_int,
    "numeric.budget_fraction": _pos_float, "numeric.emit_cycle": _bool,
    "numeric.verify_period": _pos_int, "numeric.plot_samples": _pos_int,
    "certify.auto": _bool, "certify.K": float, "certify.delta": float, "certify.lambda": float,
    "certify.L": float, "certify.lip_f": float, "certify.gap": float, "certify.p0": int,
    "certify.alpha": _alpha, "certify.phi_seminorm": float, "certify.d_g": float,
    "certify.theta_lock": _pos_float,
    "scan.a_min": float, "scan.a_max": float, "scan.a_steps": _nonneg_int,
    "scan.theta_min": float, "scan.theta_max": float, "scan.theta_steps": _nonneg_int,
    "scan.theta_endpoint": _bool,
    "output.prefix": str, "output.dir": str,
}

DEFAULTS = {"numeric.tol": 1e-9, "numeric.max_period": 12, "numeric.seed": 0, "numeric.n": 4096,
            "numeric.max_iter": 2000, "numeric.samples": 200, "numeric.budget_fraction": 0.49,
            "numeric.emit_cycle": False, "numeric.verify_period": 8, "numeric.plot_samples": 1001,
            "potential.alpha": 1.0, "potential.amp": 1.0, "potential.theta": 0.0,
            "potential.scale": 1.0, "potential.offset": 0.0, "map.r": 2,
            "certify.auto": False, "certify.d_g": 0.0, "scan.theta_endpoint": False,
            "output.prefix": ""}

MAP_REQUIRED = {"tent": ("map.s",), "logistic": ("map.a",), "quadratic": ("map.c",),
                "markov": ("map.breakpoints", "map.left_values", "map.slopes"),
                "sine": ("map.offset", "map.amp"), "polynomial": ("map.coeffs",)}
POTENTIAL_REQUIRED = {"linear": ("potential.slope",), "grid": ("potential.grid_file",),
                      "trig": ("potential.cos", "potential.sin")}
CERT_KEYS = ("certify.K", "certify.delta", "certify.lambda", "certify.L", "certify.lip_f",
             "certify.gap", "certify.p0", "certify.alpha")
SCAN_KEYS = ("scan.a_min", "scan.a_max", "scan.a_steps", "scan.theta_min", "scan.theta_max",
             "scan.theta_steps")

# keys that can change each command's output; the config hash covers exactly these
MAP_KEYS = {"doubling": (), "tent": ("map.s",), "logistic": ("map.a", "map.r"),
            "quadratic": ("map.c", "map.r"),
            "markov": ("map.breakpoints", "map.left_values", "map.slopes"),
            "sine": ("map.offset", "map.amp", "map.lo", "map.hi", "map.r"),
            "polynomial": ("map.coeffs", "map.lo", "map.hi", "map.r")}
POTENTIAL_KEYS = {"cosine": ("potential.theta", "potential.amp"),
                  "linear": ("potential.slope", "potential.offset"),
                  "distance": ("potential.points", "potential.orbit_period", "potential.scale"),
                  "grid": ("potential.grid_file",), "trig": ("potential.cos", "potential.sin")}
NUMERIC_KEYS = {"orbits": ("numeric.max_period",),
                "oracle": ("numeric.n", "numeric.emit_cycle", "numeric.max_period"),
                "subaction": ("numeric.n", "numeric.tol", "numeric.max_iter", "numeric.max_period"),
                "certify": ("numeric.max_period",),
                "scan": ("numeric.max_period",),
                "extend": ("numeric.verify_period", "numeric.plot_samples"),
                "lock-test": ("numeric.max_period", "numeric.samples", "numeric.budget_fraction",
                              "numeric.seed")}
USES_MAP = ("orbits", "oracle", "subaction", "scan", "extend", "lock-test")
USES_POTENTIAL = ("orbits", "oracle", "subaction", "scan", "lock-test")


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k: v for k, v in self.values.items() if k.startswith(pre)}

    def hashed_items(self) -> dict:
        cmd, v = self.command, self.values
        keys = list(NUMERIC_KEYS[cmd])
        auto = cmd == "certify" and v.get("certify.auto")
        if cmd in USES_MAP or auto:
            keys += ["map.family", *MAP_KEYS[v["map.family"]]]
        if cmd in USES_POTENTIAL or auto:
            keys += ["potential.family", "potential.alpha", *POTENTIAL_KEYS[v["potential.family"]]]
        if cmd == "certify":
            keys += [k for k in SCHEMA if k.startswith("certify.")]
        if cmd == "scan":
            keys += [k for k in SCHEMA if k.startswith("scan.")]
        out = {"command": cmd}
        out.update({k: v[k] for k in keys if k in v})
        return out

    def digest(self) -> str:
        items = self.hashed_items()
        text = json.dumps({k: _canon(v) for k, v in sorted(items.items())}, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _canon(v):
    if isinstance(v, float):
        return float.hex(v)
    if isinstance(v, tuple):
        return [_canon(x) for x in v]
    return v


def parse_config(text: str, command: str | None = None, overrides: dict | None = None) -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if key in raw:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if key not in SCHEMA:
            raise SchemaError(key, "unknown key")
        try:
            raw[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise SchemaError(key, str(exc)) from None
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise SchemaError(key, "unknown key")
        raw[key] = value
    cfg_cmd = raw.pop("command", None)
    if command is None:
        command = cfg_cmd
    elif cfg_cmd is not None and cfg_cmd != command:
        raise SchemaError("command", f"config says {cfg_cmd!r}, invoked as {command!r}")
    if command not in COMMANDS:
        raise SchemaError("command", "missing or unknown command")
    values = dict(DEFAULTS)
    values.update(raw)
    cfg = RunConfig(command, values)
    _check_required(cfg)
    return cfg


def _need(cfg: RunConfig, keys):
    for k in keys:
        if k not in cfg.values:
            raise SchemaError(k, "required")


def _check_required(cfg: RunConfig):
    cmd = cfg.command
    uses_map = cmd != "certify" or cfg["certify.auto"]
    uses_pot = cmd in ("orbits", "oracle", "subaction", "scan", "lock-test") or (
        cmd == "certify" and cfg["certify.auto"])
    if uses_map:
        _need(cfg, ("map.family",))
        _need(cfg, MAP_REQUIRED.get(cfg["map.family"], ()))
    if uses_pot:
        _need(cfg, ("potential.family",))
        _need(cfg, POTENTIAL_REQUIRED.get(cfg["potential.family"], ()))
        if cfg["potential.family"] == "distance" and not (
                "potential.points" in cfg.values or "potential.orbit_period" in cfg.values):
            raise SchemaError("potential.points", "distance potential needs points or orbit_period")
    if cmd == "certify":
        if cfg["certify.auto"]:
            _need(cfg, ("certify.L",))
        else:
            _need(cfg, CERT_KEYS)
    if cmd == "scan":
        if cfg["map.family"] not in ("logistic", "tent", "quadratic"):
            raise SchemaError("map.family", "scan varies a one-parameter family (logistic, tent, quadratic)")
        if cfg["potential.family"] not in ("cosine", "linear"):
            raise SchemaError("potential.family", "scan varies theta of a cosine or linear potential")
        _need(cfg, SCAN_KEYS)
        for k in ("scan.a_steps", "scan.theta_steps"):
            if cfg[k] == 0:
                raise SchemaError(k, "empty scan grid")
    if cmd == "extend" and cfg["map.family"] not in ("sine", "polynomial"):
        raise SchemaError("map.family", "extend needs a smooth map on an interval (sine, polynomial)")


# ------------------------------------------------------------- construction

def build_map(cfg: RunConfig, a: float | None = None) -> MapSpec:
    """MapSpec from the map section; ``a`` replaces the family parameter in scans."""
    fam, v = cfg["map.family"], cfg.values
    r = v["map.r"]
    if fam == "doubling":
        return dyn.doubling()
    if fam == "tent":
        return dyn.tent(v["map.s"] if a is None else a)
    if fam == "logistic":
        return dyn.logistic(v["map.a"] if a is None else a, r)
    if fam == "quadratic":
        return dyn.quadratic(v["map.c"] if a is None else a, r)
    if fam == "markov":
        return dyn.markov(v["map.breakpoints"], v["map.left_values"], v["map.slopes"])
    lo, hi = v.get("map.lo", 0.0), v.get("map.hi", 1.0)
    if fam == "sine":
        return dyn.sine(v["map.offset"], v["map.amp"], lo, hi, r)
    if fam == "polynomial":
        return dyn.polynomial(v["map.coeffs"], lo, hi, r)
    raise SchemaError("map.family")


def theta_grid(cfg: RunConfig):
    import numpy as np
    return np.linspace(cfg["scan.theta_min"], cfg["scan.theta_max"], cfg["scan.theta_steps"],
                       endpoint=cfg["scan.theta_endpoint"])


def a_grid(cfg: RunConfig):
    import numpy as np
    return np.linspace(cfg["scan.a_min"], cfg["scan.a_max"], cfg["scan.a_steps"])


def fmt(x) -> str:
    """17 significant digits, round-trip exact for binary64."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)
