"""JSON model files and result documents.

A model file looks like::

    {"states": ["g", "s"],
     "target": ["g"],
     "rows": {"g": {"vertices": [[1, 0]]},
              "s": {"intervals": {"lower": [0.25, 0.25], "upper": [0.75, 0.75]}}}}

JSON has no infinity literal, so ``+inf`` is written as the string ``"inf"``
everywhere in result documents.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import ImpreciseChain, validate_chain
from .errors import DimensionMismatch, ParseError, ValidationError


def model_from_dict(doc) -> tuple[ImpreciseChain, frozenset]:
    if not isinstance(doc, dict):
        raise ParseError("model must be a JSON object")
    missing = {"states", "target", "rows"} - set(doc)
    if missing:
        raise ParseError(f"model is missing keys: {sorted(missing)}")
    states, target, rows = doc["states"], doc["target"], doc["rows"]
    if not isinstance(states, list) or not isinstance(target, list) or not isinstance(rows, dict):
        raise ParseError("'states' and 'target' must be lists and 'rows' an object")
    labels = [str(s) for s in states]
    unknown = sorted(set(map(str, rows)) - set(labels))
    absent = [s for s in labels if s not in rows]
    if unknown or absent:
        raise ValidationError(f"rows do not match states (unknown: {unknown}, missing: {absent})")
    k = len(labels)
    problems = []
    for label in labels:
        spec = rows[label]
        for key, vec in _row_vectors(spec):
            if len(vec) != k:
                problems.append(DimensionMismatch(
                    f"row {label!r}: {key} has {len(vec)} entries, expected {k}"))
    if problems:
        raise type(problems[0])(str(problems[0]), problems)
    return validate_chain(labels, [str(t) for t in target], [rows[s] for s in labels])


def _row_vectors(spec):
    if not isinstance(spec, dict):
        return []
    if "vertices" in spec and isinstance(spec["vertices"], list):
        return [("vertex", v) for v in spec["vertices"] if isinstance(v, list)]
    iv = spec.get("intervals")
    if isinstance(iv, dict):
        return [(key, iv[key]) for key in ("lower", "upper") if isinstance(iv.get(key), list)]
    return []


def parse_model(path) -> tuple[ImpreciseChain, frozenset]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc)


def model_to_dict(chain: ImpreciseChain, target) -> dict:
    labels = chain.labels
    return {
        "states": list(labels),
        "target": [labels[i] for i in sorted(target)],
        "rows": {labels[x]: r.to_spec() for x, r in enumerate(chain.rows)},
    }


def write_model(path, chain: ImpreciseChain, target) -> None:
    Path(path).write_text(json.dumps(model_to_dict(chain, target), indent=2) + "\n",
                          encoding="utf-8")


def model_digest(chain: ImpreciseChain, target) -> str:
    canon = json.dumps(model_to_dict(chain, target), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def encode(obj):
    """Make ``obj`` JSON-safe: arrays to lists, ``+inf`` to ``"inf"``."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (frozenset, set)):
        return sorted(encode(v) for v in obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def decode_value(x):
    return math.inf if x == "inf" else float(x)


def labelled(labels, values) -> dict:
    return {labels[i]: encode(float(v)) for i, v in enumerate(values)}


def dump_document(doc: dict) -> str:
    return json.dumps(encode(doc), sort_keys=True, indent=2) + "\n"
