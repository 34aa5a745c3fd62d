"""Behavioral tap traces: the input domain.

A trace records one play session on a five-lane tap surface. Each entry
carries a millisecond timestamp, a lane index, a normalized intensity,
and a hit/miss outcome. Traces arrive either live (from the HTTP
service) or synthetic (from the corpus generator below, which drives
the evaluation harness).

Synthetic generation draws every random quantity from a child stream of
the corpus master seed, addressed by trace id, so the full corpus is a
pure function of its spec document.

The generator's intensity model is two-population: most traces draw
per-tap intensities around a moderate per-trace mean, while a small
fraction play consistently near the top of the scale. Accent propensity
(the chance a tap lands above the 0.7 accent threshold) is itself a
per-trace draw. The default constants were fitted with
``python -m tapreward.calibration``, which scans the model against the
clamp-rate targets baked into the acceptance suite; rerun it before
changing any of them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .canonical import canonical_bytes, digest
from .errors import EmptyTrace, InvalidSpec, MalformedDocument, SchemaViolation
from .rng import derive_seed, rng_for

__all__ = [
    "LANES",
    "ARCHETYPES",
    "TraceEntry",
    "ActionTrace",
    "IntensityModel",
    "CorpusSpec",
    "validate_trace",
    "trace_to_doc",
    "trace_digest",
    "generate_trace",
    "generate_corpus",
    "write_corpus",
    "load_corpus",
    "CorpusStore",
]

LANES = 5
ARCHETYPES = ("sequential", "repetitive", "exploratory")
OUTCOMES = ("hit", "miss")
PROVENANCES = ("live", "synthetic")

# Up-down lane walk used by the sequential archetype. Every adjacent
# pair differs by exactly one lane, including the wrap from index 7
# back to 0, so a noise-free sequential trace has stride coverage 1.0.
_ZIGZAG = (0, 1, 2, 3, 4, 3, 2, 1)

ACCENT_THRESHOLD = 0.7


@dataclass(frozen=True)
class TraceEntry:
    timestamp_ms: int
    lane: int
    intensity: float
    outcome: str
    note: str | None = None


@dataclass(frozen=True)
class ActionTrace:
    """One session's worth of taps, sorted by timestamp."""

    trace_id: str
    duration_ms: int
    entries: tuple[TraceEntry, ...]
    provenance: str
    archetype: str | None = None

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise SchemaViolation(f"duration_ms must be positive, got {self.duration_ms}")
        stamps = [e.timestamp_ms for e in self.entries]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise SchemaViolation("entries must be sorted by timestamp_ms")


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value) -> bool:
    return (_is_int(value) or isinstance(value, float)) and math.isfinite(value)


def _validate_entry(raw, index: int, duration_ms: int) -> TraceEntry:
    if not isinstance(raw, Mapping):
        raise SchemaViolation(f"entries[{index}] is not an object")

    def fail(msg: str):
        raise SchemaViolation(f"entries[{index}]: {msg}")

    allowed = {"timestamp_ms", "lane", "intensity", "outcome", "note"}
    extra = set(raw) - allowed
    if extra:
        fail(f"unknown fields {sorted(extra)}")
    for key in ("timestamp_ms", "lane", "intensity", "outcome"):
        if key not in raw:
            fail(f"missing field {key!r}")
    if not _is_int(raw["timestamp_ms"]) or not 0 <= raw["timestamp_ms"] <= duration_ms:
        fail(f"timestamp_ms must be an integer in [0, {duration_ms}]")
    if not _is_int(raw["lane"]) or not 0 <= raw["lane"] < LANES:
        fail(f"lane must be an integer in [0, {LANES - 1}]")
    if not _is_real(raw["intensity"]) or not 0.0 <= raw["intensity"] <= 1.0:
        fail("intensity must be a finite real in [0, 1]")
    if raw["outcome"] not in OUTCOMES:
        fail(f"outcome must be one of {OUTCOMES}")
    note = raw.get("note")
    if note is not None and not isinstance(note, str):
        fail("note must be a string when present")
    return TraceEntry(
        timestamp_ms=raw["timestamp_ms"],
        lane=raw["lane"],
        # quantize to canonical serialization precision, so a stored
        # trace and the in-memory trace it came from are the same value
        intensity=round(float(raw["intensity"]), 6),
        outcome=raw["outcome"],
        note=note,
    )


def validate_trace(doc) -> ActionTrace:
    """Parse and validate a trace document.

    Accepts JSON text/bytes or an already-parsed mapping. Entries are
    sorted by timestamp on the way in; every other defect is rejected,
    never repaired.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"trace is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise SchemaViolation("trace document must be an object")

    for key in ("trace_id", "duration_ms", "entries", "provenance"):
        if key not in doc:
            raise SchemaViolation(f"missing field {key!r}")
    if not isinstance(doc["trace_id"], str) or not doc["trace_id"]:
        raise SchemaViolation("trace_id must be a non-empty string")
    if not _is_int(doc["duration_ms"]) or doc["duration_ms"] <= 0:
        raise SchemaViolation("duration_ms must be a positive integer")
    if doc["provenance"] not in PROVENANCES:
        raise SchemaViolation(f"provenance must be one of {PROVENANCES}")
    archetype = doc.get("archetype")
    if archetype is not None:
        if archetype not in ARCHETYPES:
            raise SchemaViolation(f"archetype must be one of {ARCHETYPES}")
        if doc["provenance"] != "synthetic":
            raise SchemaViolation("archetype is only valid on synthetic traces")
    if not isinstance(doc["entries"], (list, tuple)):
        raise SchemaViolation("entries must be an array")
    if len(doc["entries"]) == 0:
        raise EmptyTrace(f"trace {doc['trace_id']!r} has no entries")

    entries = [
        _validate_entry(raw, i, doc["duration_ms"]) for i, raw in enumerate(doc["entries"])
    ]
    entries.sort(key=lambda e: e.timestamp_ms)
    return ActionTrace(
        trace_id=doc["trace_id"],
        duration_ms=doc["duration_ms"],
        entries=tuple(entries),
        provenance=doc["provenance"],
        archetype=archetype,
    )


def trace_to_doc(trace: ActionTrace) -> dict:
    return {
        "trace_id": trace.trace_id,
        "duration_ms": trace.duration_ms,
        "provenance": trace.provenance,
        "archetype": trace.archetype,
        "entries": [
            {
                "timestamp_ms": e.timestamp_ms,
                "lane": e.lane,
                "intensity": e.intensity,
                "outcome": e.outcome,
                "note": e.note,
            }
            for e in trace.entries
        ],
    }


def trace_digest(trace: ActionTrace) -> str:
    """Content digest over the trace's canonical serialization."""
    if not trace.entries:
        raise EmptyTrace(f"trace {trace.trace_id!r} has no entries")
    return digest(trace_to_doc(trace))


@dataclass(frozen=True)
class IntensityModel:
    """Knobs for the two-population per-tap intensity draw.

    accent_* shape the per-trace propensity to tap above the accent
    threshold; soft_mean_range bounds the per-trace mean of sub-threshold
    taps (in raw intensity units); strong_* shape how far above the
    threshold accented taps land. The loud_* variants apply to the
    loud_trace_fraction of traces that play near the top of the scale.
    """

    accent_alpha: float = 10.4
    accent_beta: float = 5.6
    soft_mean_range: tuple[float, float] = (0.42, 0.63)
    strong_alpha: float = 2.2
    strong_beta: float = 1.8
    loud_trace_fraction: float = 0.09
    loud_accent_alpha: float = 28.0
    loud_accent_beta: float = 1.5
    loud_soft_mean_range: tuple[float, float] = (0.55, 0.70)
    loud_strong_alpha: float = 4.0
    loud_strong_beta: float = 1.2
    soft_concentration: float = 9.0
    hit_probability: float = 0.96

    def to_doc(self) -> dict:
        return {
            "accent_alpha": self.accent_alpha,
            "accent_beta": self.accent_beta,
            "soft_mean_range": list(self.soft_mean_range),
            "strong_alpha": self.strong_alpha,
            "strong_beta": self.strong_beta,
            "loud_trace_fraction": self.loud_trace_fraction,
            "loud_accent_alpha": self.loud_accent_alpha,
            "loud_accent_beta": self.loud_accent_beta,
            "loud_soft_mean_range": list(self.loud_soft_mean_range),
            "loud_strong_alpha": self.loud_strong_alpha,
            "loud_strong_beta": self.loud_strong_beta,
            "soft_concentration": self.soft_concentration,
            "hit_probability": self.hit_probability,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "IntensityModel":
        return cls(
            accent_alpha=float(doc["accent_alpha"]),
            accent_beta=float(doc["accent_beta"]),
            soft_mean_range=(float(doc["soft_mean_range"][0]), float(doc["soft_mean_range"][1])),
            strong_alpha=float(doc["strong_alpha"]),
            strong_beta=float(doc["strong_beta"]),
            loud_trace_fraction=float(doc["loud_trace_fraction"]),
            loud_accent_alpha=float(doc["loud_accent_alpha"]),
            loud_accent_beta=float(doc["loud_accent_beta"]),
            loud_soft_mean_range=(
                float(doc["loud_soft_mean_range"][0]),
                float(doc["loud_soft_mean_range"][1]),
            ),
            loud_strong_alpha=float(doc["loud_strong_alpha"]),
            loud_strong_beta=float(doc["loud_strong_beta"]),
            soft_concentration=float(doc["soft_concentration"]),
            hit_probability=float(doc["hit_probability"]),
        )


DEFAULT_MASTER_SEED = 660660


@dataclass(frozen=True)
class CorpusSpec:
    """Everything needed to regenerate a synthetic corpus bit-for-bit."""

    total_count: int = 660
    per_archetype_count: int = 220
    master_seed: int = DEFAULT_MASTER_SEED
    duration_ms: int = 60000
    rate_range_taps_per_s: tuple[float, float] = (1.5, 5.0)
    noise_level_range: tuple[float, float] = (0.0, 0.15)
    intensity_model: IntensityModel = field(default_factory=IntensityModel)

    def __post_init__(self):
        if self.total_count != self.per_archetype_count * len(ARCHETYPES):
            raise InvalidSpec(
                f"total_count {self.total_count} != "
                f"{len(ARCHETYPES)} * per_archetype_count {self.per_archetype_count}"
            )
        if self.per_archetype_count < 1:
            raise InvalidSpec("per_archetype_count must be >= 1")
        if self.duration_ms <= 0:
            raise InvalidSpec("duration_ms must be positive")
        lo, hi = self.rate_range_taps_per_s
        if not (0 < lo <= hi):
            raise InvalidSpec(f"bad rate range {self.rate_range_taps_per_s}")
        nlo, nhi = self.noise_level_range
        if not (0.0 <= nlo <= nhi <= 1.0):
            raise InvalidSpec(f"bad noise range {self.noise_level_range}")

    def to_doc(self) -> dict:
        return {
            "total_count": self.total_count,
            "per_archetype_count": self.per_archetype_count,
            "master_seed": self.master_seed,
            "duration_ms": self.duration_ms,
            "rate_range_taps_per_s": list(self.rate_range_taps_per_s),
            "noise_level_range": list(self.noise_level_range),
            "intensity_model": self.intensity_model.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "CorpusSpec":
        return cls(
            total_count=int(doc["total_count"]),
            per_archetype_count=int(doc["per_archetype_count"]),
            master_seed=int(doc["master_seed"]),
            duration_ms=int(doc["duration_ms"]),
            rate_range_taps_per_s=(
                float(doc["rate_range_taps_per_s"][0]),
                float(doc["rate_range_taps_per_s"][1]),
            ),
            noise_level_range=(
                float(doc["noise_level_range"][0]),
                float(doc["noise_level_range"][1]),
            ),
            intensity_model=IntensityModel.from_doc(doc["intensity_model"]),
        )


def _archetype_lane(archetype: str, k: int, anchor: int, rng) -> int:
    if archetype == "sequential":
        return _ZIGZAG[k % len(_ZIGZAG)]
    if archetype == "repetitive":
        return anchor
    return rng.randrange(LANES)


def generate_trace(spec: CorpusSpec, archetype: str, trace_id: str) -> ActionTrace:
    """Generate one synthetic trace from its own child stream.

    The draw order below is load-bearing: the calibrated defaults in
    IntensityModel assume it. Do not reorder draws without refitting.
    """
    if archetype not in ARCHETYPES:
        raise InvalidSpec(f"unknown archetype {archetype!r}")
    rng = rng_for(spec.master_seed, "trace", trace_id)
    model = spec.intensity_model

    rate = rng.uniform(*spec.rate_range_taps_per_s)
    count = max(1, round(rate * spec.duration_ms / 1000.0))
    noise = rng.uniform(*spec.noise_level_range)
    loud = rng.random() < model.loud_trace_fraction
    if loud:
        propensity = rng.betavariate(model.loud_accent_alpha, model.loud_accent_beta)
        soft_mean = rng.uniform(*model.loud_soft_mean_range)
        strong_a, strong_b = model.loud_strong_alpha, model.loud_strong_beta
    else:
        propensity = rng.betavariate(model.accent_alpha, model.accent_beta)
        soft_mean = rng.uniform(*model.soft_mean_range)
        strong_a, strong_b = model.strong_alpha, model.strong_beta
    anchor = rng.randrange(LANES)
    stamps = sorted(rng.randrange(spec.duration_ms) for _ in range(count))

    span = ACCENT_THRESHOLD
    mu = min(max(soft_mean / span, 0.01), 0.99)
    conc = model.soft_concentration

    entries = []
    for k, stamp in enumerate(stamps):
        if rng.random() < noise:
            lane = rng.randrange(LANES)
        else:
            lane = _archetype_lane(archetype, k, anchor, rng)
        outcome = "hit" if rng.random() < model.hit_probability else "miss"
        if rng.random() < propensity:
            intensity = span + (1.0 - span) * rng.betavariate(strong_a, strong_b)
        else:
            intensity = span * rng.betavariate(conc * mu, conc * (1.0 - mu))
        intensity = round(min(1.0, max(0.0, intensity)), 6)
        entries.append(TraceEntry(stamp, lane, intensity, outcome))

    return ActionTrace(
        trace_id=trace_id,
        duration_ms=spec.duration_ms,
        entries=tuple(entries),
        provenance="synthetic",
        archetype=archetype,
    )


def _corpus_ids(spec: CorpusSpec) -> list[tuple[str, str]]:
    pairs = []
    for archetype in ARCHETYPES:
        for i in range(spec.per_archetype_count):
            pairs.append((f"{archetype}-{i:04d}", archetype))
    return pairs


def generate_corpus(spec: CorpusSpec) -> list[ActionTrace]:
    """Generate the full corpus: a balanced block per archetype."""
    return [generate_trace(spec, archetype, tid) for tid, archetype in _corpus_ids(spec)]


CORPUS_VERSION = "1"


def corpus_manifest(spec: CorpusSpec, traces: Iterable[ActionTrace]) -> dict:
    return {
        "corpus_version": CORPUS_VERSION,
        "spec": spec.to_doc(),
        "traces": [
            {
                "trace_id": t.trace_id,
                "archetype": t.archetype,
                "seed": derive_seed(spec.master_seed, "trace", t.trace_id),
                "digest": trace_digest(t),
            }
            for t in traces
        ],
    }


def write_corpus(spec: CorpusSpec, traces: list[ActionTrace], out_dir: str | Path) -> Path:
    """Write traces plus a manifest that pins spec, seeds and digests."""
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for trace in traces:
        path = out / "traces" / f"{trace.trace_id}.json"
        path.write_bytes(canonical_bytes(trace_to_doc(trace)))
    manifest = corpus_manifest(spec, traces)
    (out / "manifest.json").write_bytes(canonical_bytes(manifest))
    return out


def load_corpus(corpus_dir: str | Path, verify: bool = True) -> tuple[list[ActionTrace], dict]:
    """Load a corpus directory; optionally verify every trace digest."""
    root = Path(corpus_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MalformedDocument(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"manifest.json: {exc}") from exc
    if manifest.get("corpus_version") != CORPUS_VERSION:
        raise MalformedDocument(
            f"unsupported corpus_version {manifest.get('corpus_version')!r}"
        )
    traces = []
    for row in manifest["traces"]:
        path = root / "traces" / f"{row['trace_id']}.json"
        trace = validate_trace(path.read_bytes())
        if verify and trace_digest(trace) != row["digest"]:
            raise SchemaViolation(
                f"digest mismatch for trace {row['trace_id']!r}: corpus edited?"
            )
        traces.append(trace)
    return traces, manifest


class CorpusStore:
    """Read-only trace lookup over a corpus directory or a mapping."""

    def __init__(self, source):
        if isinstance(source, (str, Path)):
            traces, _ = load_corpus(source)
            self._by_id = {t.trace_id: t for t in traces}
        elif isinstance(source, Mapping):
            self._by_id = dict(source)
        else:
            self._by_id = {t.trace_id: t for t in source}

    def get(self, trace_id: str) -> ActionTrace | None:
        return self._by_id.get(trace_id)

    def __len__(self) -> int:
        return len(self._by_id)

    def add(self, trace: ActionTrace) -> None:
        self._by_id[trace.trace_id] = trace
