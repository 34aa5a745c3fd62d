"""HTTP service for live sessions and expert tuning.

The browser console is a thin client: it records taps, and every
number it displays comes back from these endpoints. Wire formats are
the same canonical documents the batch tools write to disk.

State persists under one data directory:

    traces/   one JSON per finalized (or corpus) trace
    reports/  one canonical JSON per finalized session
    audio/    constrained render per finalized session
    configs/  every accepted tuning config, by hash
    config.json  the active envelope config

Session ids are sequential ("live-0001", ...) and per-session seeds
derive from the service seed plus the id, so a finalized session is
reproducible offline from its stored trace and config alone.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__ as version
from .canonical import canonical_bytes
from .engine import write_wav
from .envelope import (
    EnvelopeConfig,
    config_from_doc,
    config_hash,
    config_to_doc,
    preset,
    validate_tuning,
)
from .errors import (
    EmptyTrace,
    OutOfMetaEnvelope,
    SchemaViolation,
    TapRewardError,
    UnresolvableReference,
)
from .harness import loudness_series_for, run_paired
from .reporting import (
    SessionReport,
    TuningEvent,
    deserialize_report,
    report_to_doc,
    serialize_report,
)
from .rng import derive_seed
from .traces import ActionTrace, TraceEntry, _validate_entry, trace_to_doc, validate_trace

DEFAULT_SESSION_MS = 60000


class SessionCreateIn(BaseModel):
    duration_ms: int = Field(default=DEFAULT_SESSION_MS, gt=0)


class TapIn(BaseModel):
    timestamp_ms: int
    lane: int
    intensity: float
    outcome: str = "hit"
    note: str | None = None


class TapBatchIn(BaseModel):
    taps: list[TapIn]


@dataclass
class LiveSession:
    session_id: str
    duration_ms: int
    created_at: float
    tuning_log_start: int
    entries: list[TraceEntry] = field(default_factory=list)
    finalized: bool = False


class ServiceState:
    """All mutable service state behind one lock."""

    def __init__(self, data_dir: str | Path, service_seed: int):
        self.root = Path(data_dir)
        for sub in ("traces", "reports", "audio", "configs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.seed = service_seed
        self.lock = threading.Lock()
        self.sessions: dict[str, LiveSession] = {}
        self.counter = 0
        self.meta = preset("relaxed")
        self.tuning_log: list[TuningEvent] = []
        active_path = self.root / "config.json"
        if active_path.is_file():
            self.active = config_from_doc(json.loads(active_path.read_text()))
        else:
            self.active = preset("default")

    def next_session_id(self) -> str:
        self.counter += 1
        return f"live-{self.counter:04d}"

    def save_active(self) -> None:
        (self.root / "config.json").write_bytes(
            canonical_bytes(config_to_doc(self.active))
        )

    def resolve_config(self, name: str, expected_hash: str) -> EnvelopeConfig | None:
        for candidate in ("relaxed", "default", "tight"):
            cfg = preset(candidate)
            if cfg.name == name and config_hash(cfg) == expected_hash:
                return cfg
        stored = self.root / "configs" / f"{expected_hash}.json"
        if stored.is_file():
            cfg = config_from_doc(json.loads(stored.read_text()))
            if cfg.name == name and config_hash(cfg) == expected_hash:
                return cfg
        if config_hash(self.active) == expected_hash:
            return self.active
        return None

    def load_report(self, report_id: str) -> SessionReport | None:
        path = self.root / "reports" / f"{report_id}.json"
        if not path.is_file():
            return None
        return deserialize_report(path.read_bytes())

    def load_trace(self, trace_id: str) -> ActionTrace | None:
        path = self.root / "traces" / f"{trace_id}.json"
        if not path.is_file():
            return None
        return validate_trace(path.read_bytes())


def create_app(data_dir: str | Path, service_seed: int = 1001) -> FastAPI:
    state = ServiceState(data_dir, service_seed)
    app = FastAPI(title="tapreward service", version=version)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = state

    @app.exception_handler(TapRewardError)
    async def _domain_error(request: Request, exc: TapRewardError):
        status = 400
        if isinstance(exc, UnresolvableReference):
            status = 404
        elif isinstance(exc, OutOfMetaEnvelope):
            status = 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/")
    def info():
        return {
            "service": "tapreward",
            "version": version,
            "active_config": state.active.name,
            "config_hash": config_hash(state.active),
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreateIn | None = None):
        body = body or SessionCreateIn()
        with state.lock:
            session_id = state.next_session_id()
            state.sessions[session_id] = LiveSession(
                session_id=session_id,
                duration_ms=body.duration_ms,
                created_at=time.time(),
                tuning_log_start=len(state.tuning_log),
            )
            return {
                "session_id": session_id,
                "duration_ms": body.duration_ms,
                "config_name": state.active.name,
                "config_hash": config_hash(state.active),
            }

    def _session(session_id: str) -> LiveSession:
        session = state.sessions.get(session_id)
        if session is None:
            raise UnresolvableReference(f"no session {session_id!r}")
        return session

    @app.post("/sessions/{session_id}/taps")
    def append_taps(session_id: str, body: TapBatchIn):
        with state.lock:
            session = _session(session_id)
            if session.finalized:
                raise SchemaViolation(f"session {session_id!r} already finalized")
            for i, tap in enumerate(body.taps):
                entry = _validate_entry(
                    tap.model_dump(), len(session.entries) + i, session.duration_ms
                )
                session.entries.append(entry)
            return {"accepted": len(body.taps), "total": len(session.entries)}

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        with state.lock:
            session = _session(session_id)
            if session.finalized:
                raise SchemaViolation(f"session {session_id!r} already finalized")
            if not session.entries:
                raise EmptyTrace("cannot finalize a session with no taps")
            entries = tuple(sorted(session.entries, key=lambda e: e.timestamp_ms))
            trace = ActionTrace(
                trace_id=session_id,
                duration_ms=session.duration_ms,
                entries=entries,
                provenance="live",
            )
            config = state.active
            events = tuple(state.tuning_log[session.tuning_log_start :])
            seed = derive_seed(state.seed, "session", session_id)

            result = run_paired(trace, config, seed, include_audio=True)
            report = result.report
            if events:
                from dataclasses import replace

                report = replace(report, tuning_events=events)

            (state.root / "traces" / f"{session_id}.json").write_bytes(
                canonical_bytes(trace_to_doc(trace))
            )
            (state.root / "reports" / f"{session_id}.json").write_bytes(
                serialize_report(report)
            )
            from .engine import compose, render_audio, select_template
            from .patterns import dominant_lane

            seq = compose(
                report.template, report.effective, dominant_lane(trace), seed
            )
            buf = render_audio(seq, report.effective.gain_db)
            write_wav(buf, state.root / "audio" / f"{session_id}.wav")

            session.finalized = True
            return {
                "report": report_to_doc(report),
                "audio_url": f"/reports/{session_id}/audio",
            }

    @app.get("/config")
    def get_config():
        return {
            "config": config_to_doc(state.active),
            "config_hash": config_hash(state.active),
            "meta": config_to_doc(state.meta),
            "meta_hash": config_hash(state.meta),
        }

    @app.put("/config")
    def put_config(body: dict):
        with state.lock:
            proposed = config_from_doc(body)
            try:
                accepted = validate_tuning(proposed, state.meta)
            except OutOfMetaEnvelope as exc:
                state.tuning_log.append(
                    TuningEvent(
                        status="rejected",
                        config_name=proposed.name,
                        config_hash=None,
                        detail=str(exc),
                    )
                )
                return JSONResponse(
                    status_code=422,
                    content={
                        "accepted": False,
                        "detail": str(exc),
                        "violations": [
                            {"parameter": p, "side": s, "excess": round(e, 6)}
                            for p, s, e in exc.violations
                        ],
                    },
                )
            state.active = accepted
            digest = config_hash(accepted)
            state.save_active()
            (state.root / "configs" / f"{digest}.json").write_bytes(
                canonical_bytes(config_to_doc(accepted))
            )
            state.tuning_log.append(
                TuningEvent(
                    status="accepted",
                    config_name=accepted.name,
                    config_hash=digest,
                    detail="within meta-envelope",
                )
            )
            return {
                "accepted": True,
                "config": config_to_doc(accepted),
                "config_hash": digest,
            }

    @app.get("/reports")
    def list_reports():
        rows = []
        for path in sorted((state.root / "reports").glob("*.json")):
            report = deserialize_report(path.read_bytes())
            rows.append(
                {
                    "trace_id": report.trace_id,
                    "config_name": report.config_name,
                    "label": report.label.label,
                    "any_clamped": report.any_clamped,
                }
            )
        return {"reports": rows}

    @app.get("/reports/{report_id}")
    def get_report(report_id: str):
        report = state.load_report(report_id)
        if report is None:
            raise UnresolvableReference(f"no report {report_id!r}")
        return report_to_doc(report)

    @app.get("/reports/{report_id}/audio")
    def get_audio(report_id: str):
        path = state.root / "audio" / f"{report_id}.wav"
        if not path.is_file():
            raise UnresolvableReference(f"no audio for report {report_id!r}")
        return Response(content=path.read_bytes(), media_type="audio/wav")

    @app.get("/reports/{report_id}/loudness")
    def get_loudness(report_id: str):
        report = state.load_report(report_id)
        if report is None:
            raise UnresolvableReference(f"no report {report_id!r}")
        trace = state.load_trace(report.trace_id)
        if trace is None:
            raise UnresolvableReference(f"no stored trace {report.trace_id!r}")
        config = state.resolve_config(report.config_name, report.config_hash)
        if config is None:
            raise UnresolvableReference(
                f"config {report.config_name!r} with hash {report.config_hash} not found"
            )
        series = loudness_series_for(trace, config, report.seed)
        doc = {}
        for arm, kinds in series.items():
            doc[arm] = {
                kind: {"time_s": times, "lufs": levels}
                for kind, (times, levels) in kinds.items()
            }
        return doc

    return app
