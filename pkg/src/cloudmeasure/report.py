"""Canonical JSON serialization for reports.

Reports carry a schema version and the fully resolved configuration, are
serialized with sorted keys and shortest round-trip floats, and contain no
set/dict-order ambiguity -- reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

SCHEMA_VERSION = 1


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to plain
    JSON-compatible python values."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_report(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(to_jsonable(payload))
    return json.dumps(body, sort_keys=True, indent=2) + "\n"
