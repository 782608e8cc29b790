"""JSON wire formats for functionals, words, Weyl elements and configs.

Piecewise profile::

    [{"interval": [lo, hi], "coeffs": [c0, c1, ...]}, ...]

``coeffs`` are ascending powers of absolute time; a piece may instead
give ``"local"`` coefficients in ``t - lo``, which is what dumps use so
that round trips are exact.

Functional::

    {"dim": 1,
     "density": [<profile per component>],
     "constant": {"mode": "auto_h"} | {"mode": "explicit", "value": 0.7},
     "potentials": [{"window": <profile>, "shape": "gaussian" | "polynomial",
                     "params": {...}, "shift": null | [<profile per component>]}]}

``auto_h`` resolves
the constant with the requested h convention when loaded; dumped
functionals always carry explicit constants.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigNotFound, SchemaViolation
from .functionals import (
    Functional,
    GaussianShape,
    LoopPath,
    PolynomialShape,
    PotentialTerm,
    h_constant,
)
from .interaction import InteractionSpec, chi_window
from .piecewise import Piece, PiecewisePoly
from .weyl_algebra import GroupWord, WeylElement

_NUM = {"type": "number"}
_PROFILE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["interval"],
        "oneOf": [{"required": ["coeffs"]}, {"required": ["local"]}],
        "properties": {
            "interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "coeffs": {"type": "array", "items": _NUM, "minItems": 1},
            "local": {"type": "array", "items": _NUM, "minItems": 1},
        },
        "additionalProperties": False,
    },
}
_SHAPE_PARAMS = {
    "shape": {"enum": ["gaussian", "polynomial"]},
    "params": {"type": "object"},
}
FUNCTIONAL_SCHEMA = {
    "type": "object",
    "required": ["dim"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "density": {"type": "array", "items": _PROFILE},
        "constant": {
            "type": "object",
            "required": ["mode"],
            "properties": {"mode": {"enum": ["auto_h", "explicit"]}, "value": _NUM},
        },
        "potentials": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["window", "shape", "params"],
                "properties": {
                    "window": _PROFILE,
                    **_SHAPE_PARAMS,
                    "shift": {"oneOf": [{"type": "null"}, {"type": "array", "items": _PROFILE}]},
                },
            },
        },
    },
}
WORD_SCHEMA = {
    "type": "object",
    "required": ["factors"],
    "properties": {
        "prefactor": _NUM,
        "dim": {"type": "integer", "minimum": 1},
        "factors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["functional", "exp"],
                "properties": {"functional": FUNCTIONAL_SCHEMA, "exp": {"enum": [1, -1]}},
            },
        },
    },
}
INTERACTION_SCHEMA = {
    "type": "object",
    "required": ["shape", "params", "chi"],
    "properties": {
        **_SHAPE_PARAMS,
        "chi": {
            "type": "object",
            "required": ["core"],
            "properties": {
                "core": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "ramp": {"type": "number", "minimum": 0},
                "kind": {"enum": ["smoothstep", "sharp"]},
            },
        },
    },
}
_GRID = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "x_min": _NUM,
        "length": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["suite"],
    "properties": {
        "suite": {"enum": ["weyl", "loop", "causal", "moment", "euler_lagrange", "interaction", "convergence"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "grid": _GRID,
        "propagator": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "scheme": {"enum": ["strang", "trotter1"]},
            },
            "additionalProperties": False,
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "h_convention": {"enum": ["consistent", "printed"]},
        "sign_convention": {"enum": ["s4", "s2"]},
    },
    "additionalProperties": False,
}
PROPAGATE_SCHEMA = {
    "type": "object",
    "required": ["functional"],
    "properties": {
        "functional": FUNCTIONAL_SCHEMA,
        "mode": {"enum": ["scattering", "evolve"]},
        "state": {
            "type": "object",
            "properties": {"x_mean": _NUM, "p_mean": _NUM, "width": {"type": "number", "exclusiveMinimum": 0}},
        },
        "grid": _GRID,
        "propagator": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_i": _NUM,
                "t_f": _NUM,
                "scheme": {"enum": ["strang", "trotter1"]},
                "sign": {"enum": ["s4", "s2"]},
            },
        },
    },
}


def validate(data: Any, schema: dict, what: str = "document") -> None:
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"{what}: {exc.message} (at {path})") from None


def load_json(path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFound(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from None


# -- profiles ---------------------------------------------------------------


def profile_to_json(pp: PiecewisePoly) -> list:
    return [{"interval": [pc.lo, pc.hi], "local": list(pc.local)} for pc in pp.pieces]


def profile_from_json(data: list) -> PiecewisePoly:
    pieces = []
    for d in data:
        lo, hi = d["interval"]
        if "local" in d:
            pieces.append(Piece(float(lo), float(hi), tuple(float(v) for v in d["local"])))
        else:
            pieces.append((lo, hi, d["coeffs"]))
    return PiecewisePoly(tuple(pieces))


def _shape_to_json(shape) -> tuple[str, dict]:
    return shape.kind, shape.params()


def _shape_from_json(kind: str, params: dict):
    try:
        if kind == "gaussian":
            return GaussianShape(params["amplitude"], tuple(params["center"]), params["width"])
        return PolynomialShape(tuple(params["coeffs"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad {kind} parameters: {exc}") from None


# -- functionals ------------------------------------------------------------


def functional_to_json(F: Functional) -> dict:
    return {
        "dim": F.dim,
        "density": [profile_to_json(c) for c in F.density],
        "constant": {"mode": "explicit", "value": F.constant},
        "potentials": [
            {
                "window": profile_to_json(t.window),
                "shape": t.shape.kind,
                "params": t.shape.params(),
                "shift": None if t.shift is None else [profile_to_json(c) for c in t.shift.components],
            }
            for t in F.potentials
        ],
    }


def functional_from_json(data: dict, convention: str = "consistent") -> Functional:
    validate(data, FUNCTIONAL_SCHEMA, "functional")
    dim = data["dim"]
    density = tuple(profile_from_json(c) for c in data.get("density", []))
    if density and len(density) != dim:
        raise SchemaViolation(f"functional: density has {len(density)} components, dim is {dim}")
    terms = []
    for t in data.get("potentials", []):
        shift = t.get("shift")
        loop = None if shift is None else LoopPath(tuple(profile_from_json(c) for c in shift))
        terms.append(PotentialTerm(profile_from_json(t["window"]), _shape_from_json(t["shape"], t["params"]), loop))
    const = data.get("constant", {"mode": "explicit", "value": 0.0})
    if const["mode"] == "auto_h":
        value = h_constant(density, convention) if density else 0.0
    else:
        value = const.get("value", 0.0)
    return Functional(dim, density, value, tuple(terms))


def word_to_json(word: GroupWord) -> dict:
    return {
        "prefactor": word.prefactor,
        "dim": word.dim,
        "factors": [{"functional": functional_to_json(F), "exp": e} for F, e in word.factors],
    }


def word_from_json(data: dict, convention: str = "consistent") -> GroupWord:
    validate(data, WORD_SCHEMA, "word")
    factors = tuple((functional_from_json(f["functional"], convention), f["exp"]) for f in data["factors"])
    return GroupWord(factors, data.get("prefactor", 0.0), data.get("dim"))


def weyl_to_json(w: WeylElement) -> dict:
    return w.to_json()


def weyl_from_json(data: dict) -> WeylElement:
    return WeylElement(data["theta"], tuple(data["a"]), tuple(data["b"]))


def interaction_from_json(data: dict) -> InteractionSpec:
    validate(data, INTERACTION_SCHEMA, "interaction")
    chi = data["chi"]
    core = tuple(chi["core"])
    shape = _shape_from_json(data["shape"], data["params"])
    return InteractionSpec(shape, chi_window(core, chi.get("ramp", 0.5), chi.get("kind", "smoothstep")), core)


def interaction_to_json(spec: InteractionSpec, ramp: float = 0.5, kind: str = "smoothstep") -> dict:
    return {
        "shape": spec.shape.kind,
        "params": spec.shape.params(),
        "chi": {"core": list(spec.core), "ramp": ramp, "kind": kind},
    }
