"""Parameter envelopes: the constraint layer between analysis and sound.

An envelope is a closed interval per engine parameter (tempo, gain,
accent ratio). Whatever the pattern analysis requests, the envelope
clamps it before the engine sees it, and every clamp is recorded. Three
presets ship built in; operator-proposed configs are only accepted if
they nest inside the governing meta-envelope (the Relaxed preset).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .canonical import canonical_bytes, digest
from .errors import (
    MalformedDocument,
    NonFiniteParameter,
    OutOfMetaEnvelope,
    SchemaViolation,
)

__all__ = [
    "PARAM_NAMES",
    "ParamBounds",
    "EnvelopeConfig",
    "EngineParams",
    "ClampRecord",
    "preset",
    "preset_names",
    "config_hash",
    "config_to_doc",
    "config_from_doc",
    "load_config",
    "save_config",
    "resolve_config",
    "enforce",
    "validate_tuning",
    "ConfigStore",
]

PARAM_NAMES = ("tempo_bpm", "gain_db", "accent_ratio")

_UNITS = {"tempo_bpm": "BPM", "gain_db": "dB", "accent_ratio": "ratio"}


@dataclass(frozen=True)
class ParamBounds:
    lower: float
    upper: float
    unit: str

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise SchemaViolation("bounds must be finite")
        if self.lower > self.upper:
            raise SchemaViolation(f"lower {self.lower} > upper {self.upper}")

    def contains(self, other: "ParamBounds") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper


@dataclass(frozen=True)
class EnvelopeConfig:
    name: str
    tempo_bpm: ParamBounds
    gain_db: ParamBounds
    accent_ratio: ParamBounds
    meta: str | None = None

    def bounds(self, param: str) -> ParamBounds:
        if param not in PARAM_NAMES:
            raise KeyError(param)
        return getattr(self, param)


@dataclass(frozen=True)
class EngineParams:
    tempo_bpm: float
    gain_db: float
    accent_ratio: float

    def get(self, param: str) -> float:
        if param not in PARAM_NAMES:
            raise KeyError(param)
        return getattr(self, param)

    def to_doc(self) -> dict:
        return {
            "tempo_bpm": self.tempo_bpm,
            "gain_db": self.gain_db,
            "accent_ratio": self.accent_ratio,
        }

    @classmethod
    def from_doc(cls, doc) -> "EngineParams":
        return cls(*(float(doc[k]) for k in PARAM_NAMES))


@dataclass(frozen=True)
class ClampRecord:
    """Audit record for one parameter passing through the envelope."""

    parameter: str
    requested: float
    effective: float
    clamped: bool
    bound_hit: str  # "lower" | "upper" | "none"

    def to_doc(self) -> dict:
        return {
            "parameter": self.parameter,
            "requested": self.requested,
            "effective": self.effective,
            "clamped": self.clamped,
            "bound_hit": self.bound_hit,
        }

    @classmethod
    def from_doc(cls, doc) -> "ClampRecord":
        return cls(
            parameter=doc["parameter"],
            requested=float(doc["requested"]),
            effective=float(doc["effective"]),
            clamped=bool(doc["clamped"]),
            bound_hit=doc["bound_hit"],
        )


_PRESETS = {
    "relaxed": EnvelopeConfig(
        name="Relaxed",
        tempo_bpm=ParamBounds(60.0, 180.0, "BPM"),
        gain_db=ParamBounds(-60.0, 0.0, "dB"),
        accent_ratio=ParamBounds(0.0, 1.0, "ratio"),
        meta=None,
    ),
    "default": EnvelopeConfig(
        name="Default",
        tempo_bpm=ParamBounds(120.0, 130.0, "BPM"),
        gain_db=ParamBounds(-10.5, -1.9, "dB"),
        accent_ratio=ParamBounds(0.0, 0.5, "ratio"),
        meta="Relaxed",
    ),
    "tight": EnvelopeConfig(
        name="Tight",
        tempo_bpm=ParamBounds(124.0, 126.0, "BPM"),
        gain_db=ParamBounds(-6.9, -5.2, "dB"),
        accent_ratio=ParamBounds(0.0, 0.1, "ratio"),
        meta="Relaxed",
    ),
}


def preset_names() -> tuple[str, ...]:
    return tuple(_PRESETS[k].name for k in ("relaxed", "default", "tight"))


def preset(name: str) -> EnvelopeConfig:
    key = name.strip().lower()
    if key not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")
    return _PRESETS[key]


def config_to_doc(config: EnvelopeConfig) -> dict:
    doc = {"name": config.name, "meta": config.meta}
    for param in PARAM_NAMES:
        b = config.bounds(param)
        doc[param] = {"lower": b.lower, "upper": b.upper, "unit": b.unit}
    return doc


def config_from_doc(doc: Mapping) -> EnvelopeConfig:
    if not isinstance(doc, Mapping):
        raise SchemaViolation("config document must be an object")
    if not isinstance(doc.get("name"), str) or not doc["name"]:
        raise SchemaViolation("config name must be a non-empty string")
    bounds = {}
    for param in PARAM_NAMES:
        raw = doc.get(param)
        if not isinstance(raw, Mapping):
            raise SchemaViolation(f"missing bounds object for {param!r}")
        try:
            lower = float(raw["lower"])
            upper = float(raw["upper"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"{param}: bounds must have numeric lower/upper") from exc
        unit = raw.get("unit", _UNITS[param])
        if unit != _UNITS[param]:
            raise SchemaViolation(f"{param}: unit must be {_UNITS[param]!r}")
        bounds[param] = ParamBounds(lower, upper, unit)
    meta = doc.get("meta")
    if meta is not None and not isinstance(meta, str):
        raise SchemaViolation("meta must be a string when present")
    return EnvelopeConfig(name=doc["name"], meta=meta, **bounds)


def config_hash(config: EnvelopeConfig) -> str:
    """Digest over the canonical config document."""
    return digest(config_to_doc(config))


def load_config(path: str | Path) -> EnvelopeConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"config {path}: {exc}") from exc
    return config_from_doc(doc)


def save_config(config: EnvelopeConfig, path: str | Path) -> None:
    Path(path).write_bytes(canonical_bytes(config_to_doc(config)))


def resolve_config(name_or_path: str) -> EnvelopeConfig:
    """Interpret a CLI argument as a preset name or a config file path."""
    if name_or_path.strip().lower() in _PRESETS:
        return preset(name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        return load_config(path)
    raise KeyError(
        f"{name_or_path!r} is neither a preset ({', '.join(preset_names())}) "
        "nor a readable config file"
    )


def enforce(requested: EngineParams, config: EnvelopeConfig) -> tuple[EngineParams, tuple[ClampRecord, ...]]:
    """Clamp requested parameters into the envelope.

    Pure and total on finite inputs: effective values always land inside
    the closed intervals, untouched values pass through bit-identical,
    and one ClampRecord per parameter says what happened.
    """
    values = {}
    records = []
    for param in PARAM_NAMES:
        req = requested.get(param)
        if not math.isfinite(req):
            raise NonFiniteParameter(f"{param} is not finite: {req!r}")
        b = config.bounds(param)
        if req < b.lower:
            eff, hit = b.lower, "lower"
        elif req > b.upper:
            eff, hit = b.upper, "upper"
        else:
            eff, hit = req, "none"
        values[param] = eff
        records.append(
            ClampRecord(
                parameter=param,
                requested=req,
                effective=eff,
                clamped=hit != "none",
                bound_hit=hit,
            )
        )
    return EngineParams(**values), tuple(records)


def validate_tuning(proposed: EnvelopeConfig, meta: EnvelopeConfig) -> EnvelopeConfig:
    """Accept a proposed config iff it nests inside the meta-envelope.

    Returns the accepted config with its meta field stamped; raises
    OutOfMetaEnvelope listing every offending bound and by how much.
    """
    violations = []
    for param in PARAM_NAMES:
        pb = proposed.bounds(param)
        mb = meta.bounds(param)
        if pb.lower < mb.lower:
            violations.append((param, "lower", mb.lower - pb.lower))
        if pb.upper > mb.upper:
            violations.append((param, "upper", pb.upper - mb.upper))
    if violations:
        raise OutOfMetaEnvelope(violations)
    return EnvelopeConfig(
        name=proposed.name,
        tempo_bpm=proposed.tempo_bpm,
        gain_db=proposed.gain_db,
        accent_ratio=proposed.accent_ratio,
        meta=meta.name,
    )


class ConfigStore:
    """Config lookup: presets plus any registered custom configs."""

    def __init__(self, extra: Mapping[str, EnvelopeConfig] | None = None):
        self._extra = dict(extra or {})

    def get(self, name: str) -> EnvelopeConfig | None:
        if name in self._extra:
            return self._extra[name]
        try:
            return preset(name)
        except KeyError:
            return None

    def add(self, config: EnvelopeConfig) -> None:
        self._extra[config.name] = config
