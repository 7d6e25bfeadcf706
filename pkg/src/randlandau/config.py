"""Experiment configuration: JSON schema, presets, validation and hashing.

Energies in task blocks are given in units of the field B (keys ending in
``_over_B``); lengths are in the magnetic unit where the unit cell has side 1.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math

import jsonschema

from .lattice import MagneticTorus, quantize_field

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_EPAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "model": _obj({
        "B": {**_POS, "description": "magnetic field (flux density)"},
        "L": {**_POS, "description": "torus side, must give integer flux B L^2 / 2pi"},
        "L_request": {**_POS, "description": "target torus side, quantized by flux_mode"},
        "N": {**_INT1, "description": "grid points per side"},
        "flux_mode": {"enum": ["round-up-flux", "adjust-field"]},
        "gauge": {"enum": ["landau_x", "landau_y"]},
        "flux_guard": {**_INT1, "description": "resolution guard N >= flux_guard * n_phi"},
    }, ["B", "N"]),
    "disorder": _obj({
        "lambda_over_B": {"type": "number", "minimum": 0, "description": "coupling lambda in units of B"},
        "law": _obj({
            "kind": {"enum": ["uniform", "rescaled"]},
            "M1": {"type": "number", "minimum": 0},
            "M2": {"type": "number", "minimum": 0},
            "base": {"enum": ["lorentzian"]},
            "family_lambda": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "cutoff_b": _POS,
        }, ["kind"]),
        "profile": _obj({
            "shape": {"enum": ["square_indicator", "disc_indicator", "cosine_bump"]},
            "inner": {**_POS, "description": "side of the inner square (length)"},
            "outer": {**_POS, "description": "side of the outer square (length)"},
        }),
    }),
    "run": _obj({
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "realizations": _INT1,
        "workers": _INT1,
    }),
    "spectrum": _obj({
        "n_levels": {"type": "integer", "minimum": 2, "maximum": 6},
        "dos_bins": _INT1,
    }),
    "hall": _obj({
        "E_over_B": {"type": "array", "items": _NUM, "minItems": 1},
        "lambda_sweep_over_B": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "window_radius": _POS,
        "switches": _EPAIR,
        "gate": _obj({"max_residual_ratio": _POS, "min_rate_L": _POS}),
    }),
    "wegner": _obj({
        "windows_over_B": {"type": "array", "items": _EPAIR, "minItems": 1},
        "scales": {"type": "array", "items": _INT1, "minItems": 1,
                   "description": "torus sides as multiples of the model side (N scaled alike)"},
    }),
    "moments": _obj({
        "centers_over_B": {"type": "array", "items": _NUM, "minItems": 1},
        "half_width_over_B": _POS,
        "p": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "T0": _POS,
        "K": {"type": "integer", "minimum": 4},
        "quadrature_check": {"type": "boolean"},
    }),
    "scan": _obj({
        "mode": {"enum": ["B", "lambda"]},
        "values": {"type": "array", "items": _POS, "minItems": 1},
        "band": _INT1,
        "points": {"type": "integer", "minimum": 3},
        "gate": _obj({"max_residual_ratio": _POS, "min_rate_L": _POS}),
    }),
    "output": _obj({
        "directory": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
    }),
}, ["model"])

DEFAULTS = {
    "model": {"flux_mode": "round-up-flux", "gauge": "landau_x", "flux_guard": 4},
    "disorder": {"lambda_over_B": 0.3,
                 "law": {"kind": "uniform", "M1": 1.0, "M2": 1.0, "base": "lorentzian",
                         "family_lambda": 1.0, "cutoff_b": 1.0},
                 "profile": {"shape": "square_indicator", "inner": 0.45, "outer": 0.45}},
    "run": {"seed": 0, "realizations": 20, "workers": 1},
    "spectrum": {"n_levels": 3, "dos_bins": 120},
    "hall": {"E_over_B": [0.5, 2.0, 4.0], "lambda_sweep_over_B": [],
             "gate": {"max_residual_ratio": 1 / 3, "min_rate_L": 8.0}},
    "wegner": {"windows_over_B": [[0.95, 1.05], [1.8, 2.2]], "scales": [1, 2]},
    "moments": {"centers_over_B": [1.0], "half_width_over_B": 0.05, "p": [1.0, 2.0],
                "T0": 1.0, "K": 10, "quadrature_check": False},
    "scan": {"mode": "lambda", "values": [0.4, 0.2, 0.1], "band": 1, "points": 9,
             "gate": {"max_residual_ratio": 1 / 3, "min_rate_L": 8.0}},
    "output": {"directory": "out", "formats": ["json", "csv"]},
}

PRESETS = {
    "desk": {"model": {"B": 2 * math.pi * 16 / 64, "L": 8.0, "N": 64}},
    "hall": {"model": {"B": math.pi / 2, "L": 16.0, "N": 64, "flux_guard": 1}},
}


class ConfigError(ValueError):
    pass


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw):
    """Raise :class:`ConfigError` unless ``raw`` matches :data:`SCHEMA`."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    m = raw["model"]
    if ("L" in m) == ("L_request" in m):
        raise ConfigError("model: give exactly one of L and L_request")


def resolve(raw):
    """Validate, then fill defaults.  Returns a new dict."""
    validate(raw)
    return _merge(DEFAULTS, raw)


def preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return resolve(PRESETS[name])


def load(path):
    """Read a config file, or the config embedded in a run manifest."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if isinstance(raw, dict) and "config" in raw and "config_hash" in raw:
        raw = raw["config"]
    return resolve(raw)


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    """Hash of the resolved config without the worker hint and output location."""
    c = copy.deepcopy(cfg)
    c.get("run", {}).pop("workers", None)
    c.pop("output", None)
    return hashlib.sha256(canonical(c).encode()).hexdigest()


def torus_from(model, scale=1):
    """Build the torus of a model block, scaled by an integer factor in L and N."""
    B = model["B"]
    N = model["N"] * scale
    guard = model.get("flux_guard", 4)
    gauge = model.get("gauge", "landau_x")
    if "L" in model:
        L = model["L"] * scale
        if model.get("flux_mode") == "adjust-field":
            B, _ = quantize_field(L, B)
        try:
            return MagneticTorus(L, B, N, gauge=gauge, flux_mode=model.get("flux_mode", "round-up-flux"),
                                 flux_guard=guard)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
    return MagneticTorus.from_request(B, model["L_request"] * scale, N, mode=model["flux_mode"],
                                      gauge=gauge, flux_guard=guard)
