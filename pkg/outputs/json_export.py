# outputs/json_export.py
"""
JSON persistence for states, controls, moment systems, families and reports.

Every file written by the toolkit is a dictionary with a ``metadata`` block
(application name, version, command, config hash, parameter echo, seed)
followed by its payload. Complex numbers are stored as ``[re, im]`` pairs.
Files are written with sorted keys and no timestamps, so identical runs
produce byte-identical output.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np

from errors import SchemaError

logger = logging.getLogger(__name__)

APP_NAME = "Moving-Control Null Controllability Toolkit"
VERSION = "1.0"


def complex_pairs(values: Iterable[complex]) -> List[List[float]]:
    return [[float(np.real(z)), float(np.imag(z))] for z in np.asarray(values, dtype=complex).ravel()]


def complex_pair(value: complex) -> List[float]:
    return [float(np.real(value)), float(np.imag(value))]


def complex_from_pair(pair: Any, context: str = "value") -> complex:
    try:
        re, im = pair
        return complex(float(re), float(im))
    except (TypeError, ValueError) as e:
        raise SchemaError(f"{context}: expected a [re, im] pair, got {pair!r}.") from e


def complex_array(pairs: Any, context: str = "values") -> np.ndarray:
    if not isinstance(pairs, list):
        raise SchemaError(f"{context}: expected a list of [re, im] pairs.")
    return np.array([complex_from_pair(p, f"{context}[{i}]") for i, p in enumerate(pairs)], dtype=complex)


def require(data: Mapping, field: str, context: str) -> Any:
    """Fetch a mandatory field, raising a SchemaError that names it."""
    if not isinstance(data, Mapping):
        raise SchemaError(f"{context}: expected an object, got {type(data).__name__}.")
    if field not in data:
        raise SchemaError(f"{context}: missing required field '{field}'.")
    return data[field]


def create_metadata(config) -> Dict[str, Any]:
    """Provenance header for a RunConfig-like object (``command``, ``parameters``, ``seed``)."""
    return {
        "app_name": APP_NAME,
        "version": VERSION,
        "command": config.command,
        "config_hash": config.config_hash(),
        "parameters": config.parameters,
        "seed": config.seed,
    }


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path, payload: Dict[str, Any], config=None) -> Path:
    """Write ``payload`` (with a metadata block when ``config`` is given)."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    data = dict(payload)
    if config is not None:
        data["metadata"] = create_metadata(config)
    path.write_text(dumps(data), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def load_json(path, context: Optional[str] = None) -> Dict[str, Any]:
    """Read a JSON object, converting syntax errors into line/column diagnostics."""
    path = Path(path)
    context = context or str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SchemaError(f"{context}: cannot read file ({e.strerror}).") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{context}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"{context}: top-level JSON value must be an object.")
    return data
