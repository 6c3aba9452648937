"""Run configuration: YAML or JSON, validated against a JSON schema.

Unknown keys are rejected at every level.  Validation happens before any
computation; failures raise :class:`~ptwave.errors.ConfigError` with the
offending key path in the message.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigError

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": _NUM}
_NONEMPTY = {"type": "array", "items": _NUM, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    out = {"type": "object", "properties": props, "additionalProperties": False}
    if required:
        out["required"] = list(required)
    return out


SYSTEM = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["vdw_psystem", "constant_coefficient", "polynomial", "generic"]},
        "params": {"type": "object"},
    },
    "required": ["builtin"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"builtin": {"const": "vdw_psystem"}}},
         "then": {"required": ["params"], "properties": {"params": _obj({
             "pressure": {"type": "string"}, "d": {"type": "integer", "minimum": 1},
             "transverse": {"type": "object"}, "box": {"type": "array"}}, ["pressure"])}}},
        {"if": {"properties": {"builtin": {"const": "constant_coefficient"}}},
         "then": {"required": ["params"], "properties": {"params": _obj({
             "A": {"type": "array"}, "B": {"type": "array"}, "box": {"type": "array"}}, ["A"])}}},
        {"if": {"properties": {"builtin": {"const": "polynomial"}}},
         "then": {"required": ["params"], "properties": {"params": _obj({
             "flux": {"type": "array"}, "viscosity": {}, "box": {"type": "array"}}, ["flux"])}}},
    ],
}

PROFILE = _obj({
    "anchor": _NONEMPTY,
    "X": _POS,
    "s": _NUM,
    "delta": _VEC,
    "q": _VEC,
    "unknowns": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    "samples": {"type": "integer", "minimum": 16},
    "tol": _POS,
    "maxiter": {"type": "integer", "minimum": 1},
    "continuation": _obj({"center": _NONEMPTY, "amplitudes": _NONEMPTY,
                          "direction": _NONEMPTY}, ["center", "amplitudes"]),
    "constant": _obj({"state": _NONEMPTY, "X": _POS}, ["state"]),
})

ANALYSIS = _obj({
    "evans": _obj({"method": {"enum": ["magnus", "adaptive"]},
                   "steps": {"type": "integer", "minimum": 8}}),
    "grid": _obj({"lambda_re": _NONEMPTY, "lambda_im": _NONEMPTY,
                  "xi": {"type": "array", "items": _NONEMPTY, "minItems": 1}},
                 ["lambda_re", "lambda_im", "xi"]),
    "contour": _obj({"center": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                     "radius": _POS}),
    "theorem1": _obj({"directions": {"type": "integer", "minimum": 1}, "rho0": _POS,
                      "K": {"type": "integer", "minimum": 2}, "lam_min": _POS,
                      "levels": {"type": "integer", "minimum": 0}, "symmetric": {"type": "boolean"},
                      "spread_tol": _POS}),
    "jacobians": _obj({"h": _POS, "dependent": {"type": ["string", "null"]}, "max_error": _POS,
                       "file": {"type": "string"}}),
    "dispersion": _obj({"samples": {"type": "integer", "minimum": 1}, "tol": _POS}),
})

OUTPUT = _obj({"dir": {"type": "string"}, "svg": {"type": "boolean"}})

SCHEMA = _obj({"system": SYSTEM, "profile": PROFILE, "analysis": ANALYSIS, "output": OUTPUT},
              ["system"])


def validate(doc) -> dict:
    """Validate a configuration mapping; returns it unchanged."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {path}: {e.message}")
    return doc


def load_config(path) -> dict:
    """Read YAML or JSON (chosen by suffix, YAML otherwise) and validate."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse configuration {path}: {exc}") from exc
    return validate(doc)


def build_system(cfg: dict):
    """SystemSpec from the ``system`` section."""
    from .model import builtin_system
    from .profile import GENERIC_FLUX
    sec = cfg["system"]
    name = sec["builtin"]
    params = dict(sec.get("params", {}))
    if name == "generic":
        if params:
            raise ConfigError("the generic system takes no parameters")
        return builtin_system("polynomial", {"flux": [list(f) for f in GENERIC_FLUX]})
    if name == "vdw_psystem" and "transverse" in params:
        params["transverse"] = {int(k): v for k, v in params["transverse"].items()}
    return builtin_system(name, params)
