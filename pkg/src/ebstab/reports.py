"""Report envelopes and deterministic serialization (human, json, csv).

JSON output is byte-deterministic for a fixed (problem, seed, flags)
triple: keys are sorted, floats go through repr, infinities become the
string "inf", and no wall-clock data is included.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np

SCHEMA = "eb-report/1"

SWEEP_CSV_HEADER = "epsilon,u_star,beta_before,beta_after,tau_local,tau_global,verdict"


def make_envelope(command: str, problem: str, seed: int, results) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "problem": problem,
        "seed": seed,
        "results": results,
    }


def _encode(obj):
    """Recursively convert to json-safe values; infinities become strings."""
    if hasattr(obj, "payload"):
        return _encode(obj.payload())
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_encode(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def emit_report(result, format: str = "human") -> str:
    """Serialize a result object or envelope dict in the requested format."""
    payload = _encode(result)
    if format == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if format == "csv":
        return _to_csv(payload)
    if format == "human":
        buf = io.StringIO()
        _human(payload, buf, indent=0)
        return buf.getvalue()
    raise ValueError(f"unknown format '{format}'")


def _to_csv(payload) -> str:
    rows = _find_rows(payload)
    if rows is not None:
        lines = [SWEEP_CSV_HEADER]
        for r in rows:
            u = ";".join(str(v) for v in r.get("u_star", []))
            lines.append(
                f"{r.get('epsilon')},{u},{r.get('beta_before')},"
                f"{r.get('beta_after')},{r.get('tau_local')},"
                f"{r.get('tau_global')},{r.get('verdict')}"
            )
        return "\n".join(lines) + "\n"
    lines = ["key,value"]
    for key, value in _flatten(payload):
        text = str(value).replace(",", ";")
        lines.append(f"{key},{text}")
    return "\n".join(lines) + "\n"


def _find_rows(payload):
    if isinstance(payload, dict):
        if "rows" in payload and isinstance(payload["rows"], list):
            return payload["rows"]
        for v in payload.values():
            found = _find_rows(v)
            if found is not None:
                return found
    return None


def _flatten(payload, prefix=""):
    if isinstance(payload, dict):
        for k in sorted(payload):
            yield from _flatten(payload[k], f"{prefix}{k}." if prefix else f"{k}.")
    elif isinstance(payload, list):
        for i, v in enumerate(payload):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), payload


def _human(payload, buf, indent: int):
    pad = "  " * indent
    if isinstance(payload, dict):
        for k in sorted(payload):
            v = payload[k]
            if isinstance(v, (dict, list)):
                buf.write(f"{pad}{k}:\n")
                _human(v, buf, indent + 1)
            else:
                buf.write(f"{pad}{k}: {v}\n")
    elif isinstance(payload, list):
        for v in payload:
            if isinstance(v, (dict, list)):
                buf.write(f"{pad}-\n")
                _human(v, buf, indent + 1)
            else:
                buf.write(f"{pad}- {v}\n")
    else:
        buf.write(f"{pad}{payload}\n")
