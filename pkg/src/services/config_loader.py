# src/services/config_loader.py
"""RunConfig parsing: strict JSON schema, semantic checks, and ensemble construction."""
from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
from jsonschema import Draft202012Validator

from src.config import INTEGRATORS, LINDBLAD_CONVENTIONS, Config
from src.errors import ConfigError, GeometryError
from src.models import DipoleScheme, Ensemble, InitialState, PumpTemplate
from src.physics import geometry

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("couplings", "cascade", "lowest-rates", "evolve", "prepare", "sweep", "optimize", "pulse", "rate-map")
GEOMETRY_SUBCOMMANDS = ["cascade", "evolve", "prepare", "sweep", "optimize", "pulse"]
LOWEST_RATE_GEOMETRIES = ("pair", "chain3", "triangle", "chain4", "square")
OUTPUT_FORMATS = ("csv", "json")

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_ANGLE_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_SCAN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "points"],
    "properties": {
        "start": _POSITIVE,
        "stop": _POSITIVE,
        "points": {"type": "integer", "minimum": 1},
    },
}
_AMPLITUDE = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_TARGET = {"type": "string", "enum": [InitialState.DARK.value, InitialState.SUPERRADIANT.value]}


def _requires(subcommands: List[str], keys: List[str]) -> Dict[str, Any]:
    return {
        "if": {"properties": {"subcommand": {"enum": subcommands}}},
        "then": {"required": keys},
    }


RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["physics", "experiment"],
    "properties": {
        "name": {"type": "string"},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["builder"],
            "properties": {
                "builder": {"enum": list(geometry.BUILDERS)},
                "distance": _POSITIVE,
                "n_atoms": {"type": "integer", "minimum": 2},
                "n_transitions": {"type": "integer", "minimum": 1},
                "dipole_scheme": {"enum": [scheme.value for scheme in DipoleScheme]},
                "angles": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"oneOf": [_ANGLE_PAIR, {"type": "array", "items": _ANGLE_PAIR, "minItems": 1}]},
                },
                "c3_symmetric": {"type": "boolean"},
                "enforce_orthogonality": {"type": "boolean"},
                "spacings": {"type": "array", "items": _POSITIVE, "minItems": 1},
                "side_13": _POSITIVE,
            },
        },
        "physics": {
            "type": "object",
            "additionalProperties": False,
            "required": ["rate"],
            "properties": {
                "rate": _POSITIVE,
                "rates": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "frequencies": {"type": "array", "items": _POSITIVE, "minItems": 1},
                "convention": {"enum": list(LINDBLAD_CONVENTIONS)},
                "dimension_cap": {"type": "integer", "minimum": 1},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["subcommand"],
            "properties": {
                "subcommand": {"enum": list(SUBCOMMANDS)},
                "scan": _SCAN,
                "scan_b": _SCAN,
                "geometries": {
                    "type": "array",
                    "items": {"enum": list(LOWEST_RATE_GEOMETRIES)},
                    "minItems": 1,
                    "uniqueItems": True,
                },
                "configuration": {"enum": ["triangle", "chain"]},
                "n_exc": {"type": "integer", "minimum": 1},
                "initial": {"type": "string", "minLength": 1},
                "custom_state": {"type": "object", "additionalProperties": _AMPLITUDE, "minProperties": 1},
                "t_final": _POSITIVE,
                "dt": _POSITIVE,
                "integrator": {"enum": list(INTEGRATORS)},
                "samples": {"type": "integer", "minimum": 1},
                "template": {"enum": [template.value for template in PumpTemplate]},
                "eta": {"type": "number", "minimum": 0},
                "phases": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "reference_phase": {"type": "number"},
                "target": _TARGET,
                "resolution": {"type": "integer", "minimum": 2},
                "seed_resolution": {"type": "integer", "minimum": 2},
                "max_evaluations": {"type": "integer", "minimum": 1},
                "pulse_duration": _POSITIVE,
            },
            "allOf": [
                _requires(["couplings", "lowest-rates"], ["scan"]),
                _requires(["lowest-rates"], ["geometries"]),
                _requires(["rate-map"], ["configuration", "scan", "scan_b"]),
                _requires(["evolve"], ["initial", "t_final"]),
                _requires(["prepare"], ["t_final"]),
                _requires(["sweep", "optimize", "pulse"], ["template", "eta", "t_final", "target"]),
                _requires(["pulse"], ["phases", "pulse_duration"]),
            ],
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string", "minLength": 1},
                "format": {"enum": list(OUTPUT_FORMATS)},
                "prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
            },
        },
    },
    "allOf": [
        {
            "if": {"properties": {"experiment": {"properties": {"subcommand": {"enum": GEOMETRY_SUBCOMMANDS}}}}},
            "then": {"required": ["geometry"], "properties": {"geometry": {"required": ["builder", "distance"]}}},
        },
        {
            "if": {"properties": {"experiment": {"properties": {"subcommand": {"const": "couplings"}}}}},
            "then": {"required": ["geometry"], "properties": {"geometry": {"properties": {"builder": {"const": "pair"}}}}},
        },
    ],
}

_VALIDATOR = Draft202012Validator(RUN_CONFIG_SCHEMA)


@dataclass
class RunConfig:
    """Validated run document plus the effective numerics after overrides."""

    document: Dict[str, Any]
    source: Optional[Path] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    @property
    def subcommand(self) -> str:
        return self.document["experiment"]["subcommand"]

    @property
    def geometry(self) -> Dict[str, Any]:
        return self.document.get("geometry", {})

    @property
    def physics(self) -> Dict[str, Any]:
        return self.document["physics"]

    @property
    def experiment(self) -> Dict[str, Any]:
        return self.document["experiment"]

    @property
    def output(self) -> Dict[str, Any]:
        return self.document.get("output", {})

    @property
    def name(self) -> str:
        return self.document.get("name") or self.output.get("prefix") or self.subcommand

    @property
    def convention(self) -> str:
        return self.overrides.get("convention") or self.physics.get("convention") or Config.LINDBLAD_CONVENTION

    @property
    def dimension_cap(self) -> int:
        return int(self.physics.get("dimension_cap", Config.DIMENSION_CAP))

    @property
    def max_workers(self) -> int:
        return int(self.overrides.get("threads") or Config.MAX_WORKERS)

    @property
    def output_format(self) -> str:
        return self.overrides.get("format") or self.output.get("format", "csv")

    @property
    def output_dir(self) -> Path:
        override = self.overrides.get("out")
        if override:
            return Path(override)
        return Path(self.output["directory"]) if "directory" in self.output else Config.OUTPUT_DIR

    @property
    def dt(self) -> float:
        return float(self.experiment.get("dt", Config.DEFAULT_DT))

    @property
    def integrator(self) -> str:
        return self.overrides.get("integrator") or self.experiment.get("integrator") or Config.INTEGRATOR

    def effective(self) -> Dict[str, Any]:
        """The document with CLI overrides folded in; this is what gets hashed."""
        merged = copy.deepcopy(self.document)
        merged["physics"]["convention"] = self.convention
        if self.subcommand in GEOMETRY_SUBCOMMANDS:
            merged["experiment"]["integrator"] = self.integrator
        merged.setdefault("output", {})["format"] = self.output_format
        return merged

    @property
    def config_hash(self) -> str:
        return config_hash(self.effective())


def _json_path(error_path) -> str:
    parts = [str(part) for part in error_path]
    return "$" + "".join(f"[{part}]" if part.isdigit() else f".{part}" for part in parts)


def validate_document(document: Any) -> None:
    """Raise ConfigError naming the JSON path of the first schema violation."""
    errors = sorted(_VALIDATOR.iter_errors(document), key=lambda error: (len(error.path), list(map(str, error.path))))
    if errors:
        first = errors[0]
        raise ConfigError(first.message, key=_json_path(first.path))
    _check_semantics(document)


def _check_semantics(document: Mapping[str, Any]) -> None:
    experiment = document["experiment"]
    for key in ("scan", "scan_b"):
        scan = experiment.get(key)
        if scan and scan["points"] > 1 and scan["stop"] <= scan["start"]:
            raise ConfigError("stop must exceed start for a multi-point scan", key=f"$.experiment.{key}")
    if "pulse_duration" in experiment and experiment["pulse_duration"] > experiment.get("t_final", np.inf):
        raise ConfigError("pulse_duration must not exceed t_final", key="$.experiment.pulse_duration")
    if experiment.get("initial") == InitialState.CUSTOM.value and "custom_state" not in experiment:
        raise ConfigError("custom initial state needs custom_state amplitudes", key="$.experiment.custom_state")


def config_hash(document: Mapping[str, Any]) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_config(document: Any, source: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    validate_document(document)
    config = RunConfig(document=document, source=source, overrides={k: v for k, v in (overrides or {}).items() if v})
    if config.subcommand in GEOMETRY_SUBCOMMANDS:
        build_ensemble(config)
    logger.debug("Validated %s config %s", config.subcommand, config.config_hash[:12])
    return config


def load_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(document, source=path, overrides=overrides)


def scan_values(scan: Mapping[str, Any]) -> np.ndarray:
    return np.linspace(float(scan["start"]), float(scan["stop"]), int(scan["points"]))


def transition_rates(physics: Mapping[str, Any], n_transitions: int) -> List[float]:
    rates = physics.get("rates")
    if rates is None:
        return [float(physics["rate"])] * n_transitions
    if len(rates) != n_transitions:
        raise ConfigError(f"expected {n_transitions} rates, got {len(rates)}", key="$.physics.rates")
    return [float(rate) for rate in rates]


def custom_amplitudes(experiment: Mapping[str, Any]) -> Optional[Dict[str, complex]]:
    raw = experiment.get("custom_state")
    if raw is None:
        return None
    return {label: complex(*value) if isinstance(value, list) else complex(value) for label, value in raw.items()}


def build_ensemble(config: RunConfig, distance: Optional[float] = None) -> Ensemble:
    """Ensemble described by the geometry and physics sections; `distance` overrides the scan variable."""
    layout = config.geometry
    physics = config.physics
    builder = layout["builder"]
    distance = distance if distance is not None else layout.get("distance")
    if distance is None:
        raise ConfigError("distance is required", key="$.geometry.distance")

    angles = _angles(layout)
    frequencies = physics.get("frequencies")
    try:
        if builder == "pair":
            n_transitions = _angle_count(angles) or 1
            return geometry.make_pair(
                distance,
                layout.get("dipole_scheme", DipoleScheme.PARALLEL.value),
                angles=angles,
                rates=transition_rates(physics, n_transitions),
                frequencies=frequencies,
            )
        if builder == "chain":
            n_atoms = int(layout.get("n_atoms", 3))
            n_transitions = _angle_count(angles) or int(layout.get("n_transitions", n_atoms - 1))
            return geometry.make_chain(
                n_atoms,
                distance,
                layout.get("dipole_scheme", DipoleScheme.PERPENDICULAR.value),
                enforce_orthogonality=layout.get("enforce_orthogonality", True),
                spacings=layout.get("spacings"),
                n_transitions=n_transitions,
                angles=angles,
                rates=transition_rates(physics, n_transitions),
                frequencies=frequencies,
            )
        if builder == "triangle":
            return geometry.make_triangle(
                distance,
                layout.get("c3_symmetric", True),
                side_13=layout.get("side_13"),
                rates=transition_rates(physics, 2),
                frequencies=frequencies,
            )
        n_transitions = int(layout.get("n_transitions", 3))
        return geometry.make_square(
            distance,
            layout.get("dipole_scheme", DipoleScheme.CARTESIAN.value),
            n_transitions=n_transitions,
            enforce_orthogonality=layout.get("enforce_orthogonality", True),
            rates=transition_rates(physics, n_transitions),
            frequencies=frequencies,
        )
    except GeometryError as exc:
        raise ConfigError(str(exc), key="$.geometry") from exc


def _angles(layout: Mapping[str, Any]):
    angles = layout.get("angles")
    if angles is None:
        return None
    if isinstance(angles[0][0], list):
        return [[tuple(pair) for pair in atom] for atom in angles]
    return [tuple(pair) for pair in angles]


def _angle_count(angles) -> int:
    """Transitions per atom implied by an angle list (0 when none is given)."""
    if not angles:
        return 0
    return len(angles[0]) if isinstance(angles[0][0], tuple) else len(angles)


def lowest_rate_ensemble(name: str, distance: float, rate: float) -> Ensemble:
    """Named configurations of the lowest-rate comparison; each has N−1 transitions per atom."""
    if name == "pair":
        return geometry.make_pair(distance, rates=[rate])
    if name == "chain3":
        return geometry.make_chain(3, distance, rates=[rate] * 2)
    if name == "triangle":
        return geometry.make_triangle(distance, True, rates=[rate] * 2)
    if name == "chain4":
        return geometry.make_chain(4, distance, enforce_orthogonality=False, rates=[rate] * 3)
    if name == "square":
        return geometry.make_square(distance, rates=[rate] * 3)
    raise ConfigError(f"unknown geometry {name!r}", key="$.experiment.geometries")
