"""JSON problem configs: schema check and construction of the problem."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import jsonschema

from . import expr as _expr
from .problem import ImpulseGenerator, ImpulseSchedule, MeasureDDEProblem
from .regulated import Piecewise, RegulatedFnError, from_expr
from .stieltjes import Integrator

__all__ = ["ConfigError", "RunConfig", "Config", "load_config", "parse_config", "CONFIG_SCHEMA"]

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_FUNC = {
    "oneOf": [
        {"type": "string"},
        {"type": "number"},
        {
            "type": "object",
            "required": ["breaks", "exprs"],
            "additionalProperties": False,
            "properties": {
                "breaks": {"type": "array", "minItems": 2,
                           "items": {"type": ["number", "null"]}},
                "exprs": {"type": "array", "minItems": 1,
                          "items": {"type": ["string", "number"]}},
            },
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "problem"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "problem": {
            "type": "object",
            "required": ["p", "g", "tau", "t0", "phi"],
            "additionalProperties": False,
            "properties": {
                "p": _FUNC,
                "g": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "identity": {"type": "boolean"},
                        "density": _FUNC,
                        "jumps": {"type": "array",
                                  "items": {"type": "array", "items": _NUM,
                                            "minItems": 2, "maxItems": 2}},
                        "base_point": _NUM,
                        "base_value": _NUM,
                    },
                },
                "tau": _NUM,
                "t0": _NUM,
                "phi": _FUNC,
                "impulses": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "points": {"type": "array", "items": _NUM},
                        "b": {"type": "array", "items": _NUM},
                        "generator": {
                            "type": "object",
                            "required": ["first", "period", "b"],
                            "additionalProperties": False,
                            "properties": {
                                "first": _NUM, "period": _NUM, "b": _NUM,
                                "count": {"type": ["integer", "null"], "minimum": 0},
                            },
                        },
                    },
                },
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": _NUM,
                "T": _NUM,
                "stride": {"type": "number", "exclusiveMinimum": 0},
                "kmax": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "samples_per_step": {"type": "integer", "minimum": 1},
                "cells_per_delay": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "probes": {"type": "integer", "minimum": 0},
                "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid config; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class RunConfig:
    horizon: float
    T: float
    stride: float
    kmax: int = 50
    tol: float = 1e-10
    samples_per_step: int = 512
    cells_per_delay: int = 512
    seed: int = 0
    probes: int = 100
    tail_fraction: float = 0.25


@dataclass
class Config:
    problem: MeasureDDEProblem
    run: RunConfig
    out_dir: str
    prefix: str
    raw: dict


def _build_fn(entry, start, end, path):
    try:
        if isinstance(entry, dict):
            breaks = [math.inf if b is None else float(b) for b in entry["breaks"]]
            if len(entry["exprs"]) != len(breaks) - 1:
                raise ConfigError("need one expression per segment", path)
            bodies = []
            for i, e in enumerate(entry["exprs"]):
                bodies.append(_parse(e, f"{path}.exprs[{i}]"))
            return Piecewise(breaks, bodies)
        return from_expr(_parse(entry, path), start, end)
    except RegulatedFnError as exc:
        raise ConfigError(str(exc), path) from None
    except _expr.ExprError as exc:
        raise ConfigError(str(exc), path) from None


def _parse(text, path):
    if isinstance(text, (int, float)):
        text = repr(float(text))
    try:
        return _expr.parse(text)
    except _expr.ExprError as exc:
        raise ConfigError(str(exc), path) from None


def parse_config(data: dict) -> Config:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, path) from None
    pr = data["problem"]
    tau, t0 = float(pr["tau"]), float(pr["t0"])
    if not tau > 0:
        raise ConfigError("tau must be positive", "problem.tau")
    p = _build_fn(pr["p"], t0, math.inf, "problem.p")
    phi = _build_fn(pr["phi"], t0 - tau, t0, "problem.phi")

    gs = pr["g"]
    if gs.get("identity"):
        if "density" in gs or gs.get("jumps"):
            raise ConfigError("identity excludes density and jumps", "problem.g")
        g = Integrator.identity()
    else:
        dens = None
        if "density" in gs:
            dens = _build_fn(gs["density"], t0, math.inf, "problem.g.density")
        jumps = [tuple(j) for j in gs.get("jumps", [])]
        if dens is None and not jumps:
            raise ConfigError("g needs identity, a density or jumps", "problem.g")
        try:
            g = Integrator(dens, tuple(jumps), float(gs.get("base_point", t0)),
                           float(gs.get("base_value", 0.0)))
        except ValueError as exc:
            raise ConfigError(str(exc), "problem.g.jumps") from None

    imp = pr.get("impulses", {})
    gen = None
    if "generator" in imp:
        gd = imp["generator"]
        gen = ImpulseGenerator(float(gd["first"]), float(gd["period"]), float(gd["b"]),
                               gd.get("count"))
    sched = ImpulseSchedule(tuple(imp.get("points", ())), tuple(imp.get("b", ())), gen)
    prob = MeasureDDEProblem(p, g, tau, t0, phi, sched)

    rd = dict(data.get("run", {}))
    horizon = float(rd.pop("horizon", t0 + 10 * tau))
    T = float(rd.pop("T", t0 + tau))
    stride = float(rd.pop("stride", tau / 8))
    run = RunConfig(horizon, T, stride, **rd)
    out = data.get("output", {})
    return Config(prob, run, out.get("dir", "mdde_out"), out.get("prefix", data.get("name", "mdde")),
                  data)


def load_config(path) -> Config:
    """Read and check a config file.  ``FileNotFoundError`` propagates."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
