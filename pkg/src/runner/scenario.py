"""
场景文件解析（严格模式）
"""

import json
import logging
from pathlib import Path
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import jsonschema
from jsonschema.exceptions import best_match

from ..config import config
from ..errors import ConfigurationError, ScenarioError
from ..geometry import MANIFOLD_TYPES, CONNECTION_KINDS, make_manifold

logger = logging.getLogger(__name__)

# 依赖顺序：flow 最先，之后的分析都看到流动后的映射
ANALYSES = ("flow", "structure", "tension", "energy", "first_variation", "hessian_check",
            "spectrum", "stability", "refinement", "oracle")
# 随机流编号与执行顺序无关，调整顺序不改变已有种子
SEED_STREAMS = ("structure", "tension", "energy", "first_variation", "flow", "hessian_check",
                "spectrum", "stability", "refinement", "oracle")
SAMPLING_ANALYSES = ("structure", "first_variation", "hessian_check", "stability", "oracle")
SPECTRAL_ANALYSES = ("spectrum", "stability", "refinement", "oracle")
MAP_TYPES = ("constant", "identity", "circle_embed", "great_circle", "fourier", "file")
ORACLE_DOF_CAP = 600

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_vector = {"type": "array", "items": _number, "minItems": 1}

MANIFOLD_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "additionalProperties": False,
    "properties": {
        "type": {"enum": list(MANIFOLD_TYPES)},
        "dim": {"type": "integer", "minimum": 1, "maximum": 6},
        "lengths": {"type": "array", "items": _positive, "minItems": 1, "maxItems": 2},
        "metric": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"conformal_amplitude": _number, "scale": _positive},
        },
        "radius": _positive,
        "alpha": _number,
        "connection": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(CONNECTION_KINDS)},
                "alpha": _number,
                "constant": _number,
                "amplitude": _number,
                "wavenumber": _number,
            },
        },
        "curvature_source": {"enum": ["connection", "levi_civita"]},
    },
}

MAP_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "additionalProperties": False,
    "properties": {
        "type": {"enum": list(MAP_TYPES)},
        "point": _vector,
        "k": {"type": "integer"},
        "radius": _positive,
        "center": _vector,
        "base": _vector,
        "modes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k"],
                "additionalProperties": False,
                "properties": {"k": {"type": "integer", "minimum": 0}, "axis": {"type": "integer", "minimum": 0},
                               "cos": _vector, "sin": _vector},
            },
        },
        "perturbation": {
            "type": "object",
            "required": ["amplitude"],
            "additionalProperties": False,
            "properties": {"amplitude": {"type": "number", "minimum": 0},
                           "max_mode": {"type": "integer", "minimum": 0}},
        },
        "path": {"type": "string"},
        "slope": {"type": "array", "items": _vector},
    },
    "allOf": [
        {"if": {"properties": {"type": {"const": "constant"}}}, "then": {"required": ["point"]}},
        {"if": {"properties": {"type": {"const": "fourier"}}}, "then": {"required": ["base"]}},
        {"if": {"properties": {"type": {"const": "file"}}}, "then": {"required": ["path"]}},
    ],
}

EXPECT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "index_min": {"type": "integer", "minimum": 0},
        "nullity": {"type": "integer", "minimum": 0},
        "verdict": {"enum": ["weakly_stable", "unstable"]},
        "lowest_eigenvalue": {"$ref": "#/definitions/approx"},
        "smallest_positive_eigenvalue": {"$ref": "#/definitions/approx"},
        "energy": {"$ref": "#/definitions/approx"},
        "bienergy": {"$ref": "#/definitions/approx"},
        "certificate_nonpositive": {"type": "boolean"},
        "max_curvature_norm": _positive,
    },
}

SCENARIO_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["version", "domain", "target", "map", "n", "analyses"],
    "additionalProperties": False,
    "definitions": {
        "approx": {
            "type": "object",
            "required": ["value"],
            "additionalProperties": False,
            "properties": {"value": _number, "rel_tol": _positive, "abs_tol": _positive},
        },
    },
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "domain": MANIFOLD_SCHEMA,
        "target": MANIFOLD_SCHEMA,
        "map": MAP_SCHEMA,
        "n": {"type": "integer", "minimum": 8, "maximum": 4096},
        "seed": {"type": "integer", "minimum": 0},
        "analyses": {"type": "array", "items": {"enum": list(ANALYSES)}, "uniqueItems": True},
        "variation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["linear", "geodesic"]},
                "direction": {"oneOf": [{"const": "random"}, _vector]},
                "steps": {"type": "array", "items": _positive, "minItems": 2},
                "tolerance": _positive,
                "min_order": _positive,
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dt": _positive, "tol": _positive,
                           "max_steps": {"type": "integer", "minimum": 0}},
        },
        "spectral": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau_zero": _positive,
                "pairs": {"type": "integer", "minimum": 1},
                "step": _positive,
                "tolerance": _positive,
                "samples": {"type": "integer", "minimum": 1},
                "certificate_samples": {"type": "integer", "minimum": 1},
                "oracle_k": {"type": "integer", "minimum": 1},
                "oracle_tolerance": _positive,
                "asymmetry_tolerance": _positive,
            },
        },
        "expect": EXPECT_SCHEMA,
    },
}


@dataclass
class Scenario:
    name: str
    domain: Dict[str, Any]
    target: Dict[str, Any]
    map: Dict[str, Any]
    n: int
    analyses: List[str]
    seed: Optional[int] = None
    variation: Dict[str, Any] = field(default_factory=dict)
    flow: Dict[str, Any] = field(default_factory=dict)
    spectral: Dict[str, Any] = field(default_factory=dict)
    expect: Dict[str, Any] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def version(self) -> int:
        return self.raw.get("version", config.schema_version)


def json_pointer(path) -> str:
    parts = [str(p).replace('~', '~0').replace('/', '~1') for p in path]
    return "/" + "/".join(parts) if parts else ""


def _pointer_for(error: jsonschema.ValidationError) -> str:
    path = list(error.absolute_path)
    if error.validator == "required" and isinstance(error.instance, dict):
        missing = sorted(set(error.validator_value) - set(error.instance))
        if missing:
            path.append(missing[0])
    elif error.validator == "additionalProperties" and isinstance(error.instance, dict):
        allowed = set(error.schema.get("properties", {}))
        extra = sorted(set(error.instance) - allowed)
        if extra:
            path.append(extra[0])
    return json_pointer(path)


def validate_document(data: Any) -> None:
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    error = best_match(validator.iter_errors(data))
    if error is not None:
        raise ScenarioError(error.message, _pointer_for(error))


def parse_scenario(text: str, name: Optional[str] = None) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e}", "") from e
    validate_document(data)

    for key in ("domain", "target"):
        try:
            manifold = make_manifold(data[key])
        except ConfigurationError as e:
            raise ScenarioError(str(e), f"/{key}") from e
        if key == "domain":
            domain = manifold
        else:
            target = manifold
    if data["domain"]["type"] != "flat_torus":
        raise ScenarioError("domain must be a flat_torus", "/domain/type")
    if data["n"] % 2:
        raise ScenarioError("n must be even", "/n")

    map_type = data["map"]["type"]
    if map_type == "identity" and data["domain"] != data["target"]:
        raise ScenarioError("identity map requires the target descriptor to equal the domain descriptor", "/map")
    if map_type in ("circle_embed", "great_circle") and domain.dim != 1:
        raise ScenarioError(f"{map_type} requires a one-dimensional domain", "/map/type")
    if map_type == "circle_embed" and target.dim != 2:
        raise ScenarioError("circle_embed requires a two-dimensional target", "/target")
    if map_type == "great_circle" and data["target"]["type"] != "sphere":
        raise ScenarioError("great_circle requires a sphere target", "/target/type")

    analyses = [a for a in ANALYSES if a in data["analyses"]]
    needs_seed = any(a in SAMPLING_ANALYSES for a in analyses) or "perturbation" in data["map"]
    if needs_seed and "seed" not in data:
        raise ScenarioError("seed is required when an analysis or the map samples randomly", "/seed")

    dof = data["n"] ** domain.dim * target.dim
    cap = config.dof_cap
    if any(a in SPECTRAL_ANALYSES for a in analyses):
        largest = dof * (2 ** domain.dim if "refinement" in analyses else 1)
        if largest > cap:
            raise ScenarioError(f"N_dof={largest} exceeds the dense cap {cap}", "/n")
    if "oracle" in analyses and dof > ORACLE_DOF_CAP:
        raise ScenarioError(f"oracle comparison needs N_dof <= {ORACLE_DOF_CAP}, got {dof}", "/n")

    return Scenario(
        name=data.get("name") or name or "scenario",
        domain=data["domain"], target=data["target"], map=data["map"], n=data["n"],
        analyses=analyses, seed=data.get("seed"),
        variation=data.get("variation", {}), flow=data.get("flow", {}),
        spectral=data.get("spectral", {}), expect=data.get("expect", {}), raw=data,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except (IOError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot read scenario {path}: {e}") from e
    return parse_scenario(text, name=path.stem)
