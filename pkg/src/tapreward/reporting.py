"""Auditable session reports.

A report is the complete record of one trace's trip through the
pipeline: inputs by digest, every derived quantity, every clamp, and
the metric sets for both the unconstrained baseline and the enforced
render. Reports serialize canonically (sorted keys, fixed six-digit
floats) so equal reports are equal bytes, and they can be replayed:
given the original trace and config, the pipeline is rerun and every
derived field compared at serialization precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .canonical import canonical_bytes, canonical_json
from .engine import TemplateInstance
from .envelope import ClampRecord, EngineParams, EnvelopeConfig, config_hash, enforce
from .errors import (
    InconsistentInputs,
    MalformedReport,
    UnresolvableReference,
    VersionMismatch,
)
from .metering import DeltaMetrics, SignalMetrics
from .patterns import PatternFeatures, PatternLabel
from .traces import ActionTrace, trace_digest

__all__ = [
    "REPORT_VERSION",
    "TuningEvent",
    "SessionReport",
    "build_report",
    "report_to_doc",
    "report_from_doc",
    "serialize_report",
    "deserialize_report",
    "ReplayResult",
    "replay_verify",
]

REPORT_VERSION = "1"


@dataclass(frozen=True)
class TuningEvent:
    """One operator tuning attempt, accepted or not."""

    status: str  # "accepted" | "rejected"
    config_name: str
    config_hash: str | None
    detail: str

    def to_doc(self) -> dict:
        return {
            "status": self.status,
            "config_name": self.config_name,
            "config_hash": self.config_hash,
            "detail": self.detail,
        }

    @classmethod
    def from_doc(cls, doc) -> "TuningEvent":
        return cls(
            status=doc["status"],
            config_name=doc["config_name"],
            config_hash=doc["config_hash"],
            detail=doc["detail"],
        )


@dataclass(frozen=True)
class SessionReport:
    report_version: str
    trace_id: str
    trace_digest: str
    seed: int
    config_name: str
    config_hash: str
    features: PatternFeatures
    label: PatternLabel
    requested: EngineParams
    effective: EngineParams
    clamp_records: tuple[ClampRecord, ...]
    template: TemplateInstance
    metrics_baseline: SignalMetrics | None
    metrics_constrained: SignalMetrics | None
    deltas: DeltaMetrics | None
    audio_digest_baseline: str | None
    audio_digest_constrained: str | None
    tuning_events: tuple[TuningEvent, ...] = ()

    @property
    def any_clamped(self) -> bool:
        return any(r.clamped for r in self.clamp_records)


def build_report(
    trace: ActionTrace,
    config: EnvelopeConfig,
    seed: int,
    features: PatternFeatures,
    label: PatternLabel,
    requested: EngineParams,
    effective: EngineParams,
    clamp_records: tuple[ClampRecord, ...],
    template: TemplateInstance,
    metrics_baseline: SignalMetrics | None = None,
    metrics_constrained: SignalMetrics | None = None,
    deltas: DeltaMetrics | None = None,
    audio_digest_baseline: str | None = None,
    audio_digest_constrained: str | None = None,
    tuning_events: tuple[TuningEvent, ...] = (),
) -> SessionReport:
    """Assemble a report, cross-checking the clamp story first.

    The effective parameters and clamp records must be exactly what
    enforce() produces for (requested, config); anything else means the
    caller's pipeline state is inconsistent and the report would attest
    to something that did not happen.
    """
    check_eff, check_records = enforce(requested, config)
    if check_eff != effective:
        raise InconsistentInputs(
            f"effective params {effective} do not match enforcement {check_eff}"
        )
    if tuple(check_records) != tuple(clamp_records):
        raise InconsistentInputs("clamp records do not match enforcement")
    return SessionReport(
        report_version=REPORT_VERSION,
        trace_id=trace.trace_id,
        trace_digest=trace_digest(trace),
        seed=seed,
        config_name=config.name,
        config_hash=config_hash(config),
        features=features,
        label=label,
        requested=requested,
        effective=effective,
        clamp_records=tuple(clamp_records),
        template=template,
        metrics_baseline=metrics_baseline,
        metrics_constrained=metrics_constrained,
        deltas=deltas,
        audio_digest_baseline=audio_digest_baseline,
        audio_digest_constrained=audio_digest_constrained,
        tuning_events=tuple(tuning_events),
    )


def report_to_doc(report: SessionReport) -> dict:
    return {
        "report_version": report.report_version,
        "trace_id": report.trace_id,
        "trace_digest": report.trace_digest,
        "seed": report.seed,
        "config_name": report.config_name,
        "config_hash": report.config_hash,
        "features": report.features.to_doc(),
        "label": report.label.to_doc(),
        "requested": report.requested.to_doc(),
        "effective": report.effective.to_doc(),
        "clamp_records": [r.to_doc() for r in report.clamp_records],
        "template": report.template.to_doc(),
        "metrics_baseline": (
            None if report.metrics_baseline is None else report.metrics_baseline.to_doc()
        ),
        "metrics_constrained": (
            None
            if report.metrics_constrained is None
            else report.metrics_constrained.to_doc()
        ),
        "deltas": None if report.deltas is None else report.deltas.to_doc(),
        "audio_digest_baseline": report.audio_digest_baseline,
        "audio_digest_constrained": report.audio_digest_constrained,
        "tuning_events": [e.to_doc() for e in report.tuning_events],
    }


_REQUIRED_FIELDS = (
    "report_version",
    "trace_id",
    "trace_digest",
    "seed",
    "config_name",
    "config_hash",
    "features",
    "label",
    "requested",
    "effective",
    "clamp_records",
    "template",
    "metrics_baseline",
    "metrics_constrained",
    "deltas",
    "audio_digest_baseline",
    "audio_digest_constrained",
    "tuning_events",
)


def report_from_doc(doc: Mapping) -> SessionReport:
    if not isinstance(doc, Mapping):
        raise MalformedReport("report document must be an object")
    missing = [k for k in _REQUIRED_FIELDS if k not in doc]
    if missing:
        raise MalformedReport(f"report missing fields: {missing}")
    if doc["report_version"] != REPORT_VERSION:
        raise VersionMismatch(
            f"report_version {doc['report_version']!r} is not supported "
            f"(this build reads {REPORT_VERSION!r})"
        )
    try:
        return SessionReport(
            report_version=doc["report_version"],
            trace_id=doc["trace_id"],
            trace_digest=doc["trace_digest"],
            seed=int(doc["seed"]),
            config_name=doc["config_name"],
            config_hash=doc["config_hash"],
            features=PatternFeatures.from_doc(doc["features"]),
            label=PatternLabel.from_doc(doc["label"]),
            requested=EngineParams.from_doc(doc["requested"]),
            effective=EngineParams.from_doc(doc["effective"]),
            clamp_records=tuple(ClampRecord.from_doc(r) for r in doc["clamp_records"]),
            template=TemplateInstance.from_doc(doc["template"]),
            metrics_baseline=(
                None
                if doc["metrics_baseline"] is None
                else SignalMetrics.from_doc(doc["metrics_baseline"])
            ),
            metrics_constrained=(
                None
                if doc["metrics_constrained"] is None
                else SignalMetrics.from_doc(doc["metrics_constrained"])
            ),
            deltas=None if doc["deltas"] is None else DeltaMetrics.from_doc(doc["deltas"]),
            audio_digest_baseline=doc["audio_digest_baseline"],
            audio_digest_constrained=doc["audio_digest_constrained"],
            tuning_events=tuple(TuningEvent.from_doc(e) for e in doc["tuning_events"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedReport(f"report field malformed: {exc}") from exc


def serialize_report(report: SessionReport) -> bytes:
    return canonical_bytes(report_to_doc(report))


def deserialize_report(data: bytes | str) -> SessionReport:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedReport(f"report is not valid JSON: {exc}") from exc
    return report_from_doc(doc)


@dataclass(frozen=True)
class ReplayResult:
    trace_id: str
    exact_match: bool
    mismatched_fields: tuple[str, ...]


def replay_verify(report: SessionReport, trace_store, config_store) -> ReplayResult:
    """Re-run the pipeline for a stored report and diff every field.

    The stores resolve trace and config by name; digests must match
    what the report pinned, otherwise the replay would silently verify
    against different inputs. Comparison happens on the canonical
    serialization, field by field, so six-digit rounding applies to
    both sides. Tuning events are operator history, not derived state,
    and are excluded from the diff.
    """
    from .harness import run_paired

    trace = trace_store.get(report.trace_id)
    if trace is None:
        raise UnresolvableReference(f"trace {report.trace_id!r} not found")
    if trace_digest(trace) != report.trace_digest:
        raise UnresolvableReference(
            f"trace {report.trace_id!r} digest mismatch: stored input differs"
        )
    config = config_store.get(report.config_name)
    if config is None:
        raise UnresolvableReference(f"config {report.config_name!r} not found")
    if config_hash(config) != report.config_hash:
        raise UnresolvableReference(
            f"config {report.config_name!r} hash mismatch: stored config differs"
        )

    include_audio = report.metrics_baseline is not None
    rerun = run_paired(trace, config, report.seed, include_audio=include_audio)
    doc_a = report_to_doc(report)
    doc_b = report_to_doc(rerun.report)
    doc_b["tuning_events"] = doc_a["tuning_events"]

    mismatched = tuple(
        key
        for key in _REQUIRED_FIELDS
        if canonical_json(doc_a[key]) != canonical_json(doc_b[key])
    )
    return ReplayResult(
        trace_id=report.trace_id,
        exact_match=not mismatched,
        mismatched_fields=mismatched,
    )
