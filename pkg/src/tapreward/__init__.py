"""tapreward: pattern-conditioned music rewards under enforced envelopes.

Pipeline: a behavioral tap trace is summarized into features, labeled
with a pattern family, and mapped to requested engine parameters; a
declarative envelope clamps those parameters with full audit records;
the engine renders the reward; broadcast-style loudness metrics are
measured on the result; and everything lands in a canonical, replayable
session report. The evaluation harness runs the whole pipeline paired
(baseline vs constrained) over a calibrated synthetic corpus.
"""

__version__ = "0.1.0"

from .canonical import canonical_bytes, canonical_json, digest
from .envelope import (
    ClampRecord,
    EngineParams,
    EnvelopeConfig,
    ParamBounds,
    config_hash,
    enforce,
    preset,
    validate_tuning,
)
from .engine import (
    AudioBuffer,
    NoteEvent,
    NoteSequence,
    TemplateInstance,
    compose,
    derive_requested_params,
    render_audio,
    select_template,
)
from .harness import (
    AggregateStats,
    PairedResult,
    discriminability_check,
    emit_artifacts,
    monotonicity_check,
    run_corpus,
    run_paired,
)
from .metering import (
    DeltaMetrics,
    SignalMetrics,
    delta_metrics,
    integrated_loudness,
    loudness_range,
    max_level_slope,
    onset_density,
)
from .patterns import (
    PatternFeatures,
    PatternLabel,
    extract_features,
    label_pattern,
)
from .reporting import (
    ReplayResult,
    SessionReport,
    build_report,
    deserialize_report,
    replay_verify,
    serialize_report,
)
from .traces import (
    ActionTrace,
    CorpusSpec,
    TraceEntry,
    generate_corpus,
    load_corpus,
    trace_digest,
    validate_trace,
    write_corpus,
)
