"""Experiment reports as canonical JSON text.

Reports are plain dicts of JSON-native values.  ``emit`` sorts keys and writes
non-finite floats as the strings ``"inf"``, ``"-inf"`` and ``"nan"`` so that
``parse(emit(r)) == to_plain(r)`` holds exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .homotopy import HomotopyType

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def to_plain(obj):
    """Recursively convert numpy scalars/arrays, tuples, dataclasses and homotopy types."""
    if isinstance(obj, HomotopyType):
        return str(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def emit(report: dict) -> str:
    return json.dumps(to_plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def parse(text: str) -> dict:
    return json.loads(text)


def number(value) -> float:
    """Read back a float field that may have been written as ``"inf"`` or ``"nan"``."""
    if isinstance(value, str):
        return _NONFINITE[value]
    return float(value)
