"""JSON input and output for systems, witnesses and reports."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any

import numpy as np

from .exceptions import InvalidInputError
from .ifs import IfsSystem
from .regions import Region, region_from_dict

SCHEMA_VERSION = 1


def to_jsonable(obj: Any):
    """Convert numpy scalars/arrays and objects with ``to_dict`` to plain JSON types."""
    if hasattr(obj, "to_dict") and not isinstance(obj, type):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(report: Any) -> str:
    """Deterministic JSON text with a ``schema_version`` field."""
    data = to_jsonable(report)
    if isinstance(data, dict):
        data = {"schema_version": SCHEMA_VERSION, **data}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(report: Any, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))


def read_json(path: str | os.PathLike) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: top level must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidInputError(f"{path}: unsupported schema_version {version}")
    return data


@dataclass
class LoadedInput:
    system: IfsSystem
    witness: Region | None
    source: str
    registry_name: str | None = None


def parse_input(data: dict, source: str = "<dict>") -> LoadedInput:
    """Accept either a bare system object or ``{"system": ..., "witness": ...}``."""
    if "system" in data:
        sys_data = data["system"]
        wit = data.get("witness")
    else:
        sys_data, wit = data, None
    system = IfsSystem.from_dict(sys_data)
    witness = region_from_dict(wit, system) if wit is not None else None
    return LoadedInput(system, witness, source)


def load_input(spec: str) -> LoadedInput:
    """Load a system from a JSON file, or from the builtin registry by name."""
    if os.path.exists(spec):
        return parse_input(read_json(spec), source=str(spec))
    from .classify import get_entry

    try:
        entry = get_entry(spec)
    except KeyError:
        raise InvalidInputError(f"{spec!r} is neither a file nor a registry name") from None
    return LoadedInput(entry.system, entry.witness, f"registry:{entry.name}", entry.name)


# -- function values ---------------------------------------------------------


def _complex_pairs(values):
    v = np.asarray(values, dtype=complex)
    return np.stack([v.real, v.imag], axis=-1).tolist()


def _from_pairs(data):
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise InvalidInputError("values must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def function_to_dict(f) -> dict:
    """Values of a sampled, cograph or path function with its grid descriptor."""
    from .bimodule import CographFunction, PathFunction, SampledFunction

    if isinstance(f, SampledFunction):
        kind, extra = "sampled", {}
    elif isinstance(f, CographFunction):
        kind, extra = "cograph", {}
    elif isinstance(f, PathFunction):
        kind, extra = "path", {"depth": f.depth}
    else:
        raise InvalidInputError(f"cannot serialize {type(f).__name__}")
    return {"kind": kind, "grid": f.grid.descriptor(), **extra, "values": _complex_pairs(f.values)}


def function_from_dict(data: dict, system: IfsSystem):
    """Value-backed function on the grid named by the descriptor (system must match)."""
    from .bimodule import CographFunction, PathFunction, PathSpace, SampledFunction
    from .cograph import CographSample
    from .ifs import SampleGrid

    try:
        desc = data["grid"]
        kind = data["kind"]
        values = _from_pairs(data["values"])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed function record: {exc!r}") from exc
    grid = SampleGrid(system, int(desc["depth"]))
    if grid.descriptor()["system"] != desc["system"]:
        raise InvalidInputError("function was sampled on a different system")
    if kind == "sampled":
        return SampledFunction(grid, values=values)
    if kind == "cograph":
        return CographFunction.from_values(CographSample(system, grid), values)
    if kind == "path":
        return PathFunction.from_values(PathSpace(system, int(data["depth"]), grid), values)
    raise InvalidInputError(f"unknown function kind {kind!r}")
