"""Canonical document serialization.

Every artifact that gets hashed or compared byte-for-byte (traces,
configs, reports, manifests) goes through this module. The encoding is
JSON with sorted keys, no whitespace, and every float written as a
fixed-point decimal with exactly six fractional digits. Pipeline code
keeps full float64 precision internally; rounding happens only here, at
the serialization boundary.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

__all__ = ["canonical_json", "canonical_bytes", "digest", "digest_bytes"]


def _format_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"non-finite float not serializable: {value!r}")
    if value == 0.0:
        value = 0.0  # collapse -0.0
    return f"{value:.6f}"


def _encode(value: Any, out: list) -> None:
    if value is None or value is True or value is False:
        out.append(json.dumps(value))
    elif isinstance(value, float):
        out.append(_format_float(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        keys = sorted(value.keys())
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise ValueError(f"non-string key not serializable: {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(value[key], out)
        out.append("}")
    else:
        raise ValueError(f"unsupported type for canonical encoding: {type(value)!r}")


def canonical_json(value: Any) -> str:
    """Encode a document as canonical JSON text."""
    out: list = []
    _encode(value, out)
    return "".join(out)


def canonical_bytes(value: Any) -> bytes:
    return canonical_json(value).encode("utf-8")


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(value: Any) -> str:
    """SHA-256 hex digest of a document's canonical encoding."""
    return digest_bytes(canonical_bytes(value))
