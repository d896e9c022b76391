"""System-definition files, orbit CSV and report serialisation."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Union

import numpy as np

from .core import DomainSpace, GeneratorSystem, OrbitRecord, SmoothMap1D, Word
from .errors import InvariantViolation
from .maps import family_map, spline_map, validate_map

__version__ = "0.1.0"


class SystemFileError(ValueError):
    """Malformed system file; carries line/column when JSON decoding failed."""

    def __init__(self, message, line=None, col=None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)
        self.line, self.col = line, col


def map_from_dict(domain: DomainSpace, spec: dict) -> SmoothMap1D:
    if "spline" in spec:
        s = spec["spline"]
        return spline_map(domain, s["knots"], s["values"], s["derivs"],
                          alpha=spec.get("alpha", 1.0), epsilon=spec.get("epsilon", 0.1),
                          holder_const=spec.get("holder_const"), name=spec.get("name", "spline"))
    if "family" in spec:
        # paper-example families register themselves on import
        from . import catalog  # noqa: F401
        return family_map(spec["family"], domain, spec.get("params", {}),
                          alpha=spec.get("alpha"), holder_const=spec.get("holder_const"),
                          epsilon=spec.get("epsilon"))
    raise InvariantViolation("generator_spec", "generator needs 'family' or 'spline'")


def map_to_dict(fmap: SmoothMap1D) -> dict:
    if "spline" in fmap.source:
        out = {"spline": fmap.source["spline"]}
    else:
        out = {"family": fmap.source["family"], "params": dict(fmap.source.get("params", {}))}
    out.update(alpha=fmap.alpha, holder_const=fmap.holder_const, epsilon=fmap.epsilon)
    return out


def system_from_dict(data: dict, validate: bool = True) -> GeneratorSystem:
    try:
        domain = DomainSpace(data["domain"])
        gens = [map_from_dict(domain, g) for g in data["generators"]]
        system = GeneratorSystem(domain, gens, data.get("mode", "semigroup"))
    except KeyError as exc:
        raise InvariantViolation("system_schema", f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvariantViolation):
            raise
        raise InvariantViolation("system_schema", str(exc)) from None
    if validate:
        for g in system.generators:
            validate_map(g)
    return system


def system_to_dict(system: GeneratorSystem) -> dict:
    return {"domain": system.domain.kind, "mode": system.mode,
            "generators": [map_to_dict(g) for g in system.generators]}


def load_system(path: Union[str, Path], validate: bool = True) -> GeneratorSystem:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    # output of `expansion-lab example` wraps the system in a report envelope
    if isinstance(data, dict) and "domain" not in data:
        data = data.get("report", {}).get("system", data)
    return system_from_dict(data, validate=validate)


def save_system(system: GeneratorSystem, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(system_to_dict(system)))


def read_orbit_csv(path: Union[str, Path]) -> OrbitRecord:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    points = np.array([float(r["x"]) for r in rows])
    logs = np.array([float(r["log_deriv"]) for r in rows if r.get("log_deriv") not in (None, "")])
    return OrbitRecord(float(points[0]), Word(()), points, logs)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses / numpy values into JSON-native types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Word):
        return list(obj.indices)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"
