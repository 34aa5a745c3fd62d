"""Trace schema, synthetic corpus generation, and corpus persistence."""

import json

import pytest

from tapreward.errors import (
    EmptyTrace,
    InvalidSpec,
    MalformedDocument,
    SchemaViolation,
)
from tapreward.traces import (
    ARCHETYPES,
    CORPUS_VERSION,
    ActionTrace,
    CorpusSpec,
    CorpusStore,
    IntensityModel,
    TraceEntry,
    corpus_manifest,
    generate_corpus,
    generate_trace,
    load_corpus,
    trace_digest,
    trace_to_doc,
    validate_trace,
    write_corpus,
)

from conftest import make_trace


def good_doc():
    return {
        "trace_id": "t-0001",
        "duration_ms": 4000,
        "provenance": "synthetic",
        "archetype": "sequential",
        "entries": [
            {"timestamp_ms": 0, "lane": 0, "intensity": 0.5, "outcome": "hit", "note": None},
            {"timestamp_ms": 500, "lane": 1, "intensity": 0.9, "outcome": "hit", "note": None},
        ],
    }


def test_validate_accepts_good_doc():
    trace = validate_trace(good_doc())
    assert trace.trace_id == "t-0001"
    assert len(trace.entries) == 2
    assert trace.entries[0].lane == 0


def test_validate_accepts_json_text_and_bytes():
    text = json.dumps(good_doc())
    assert validate_trace(text) == validate_trace(text.encode("utf-8"))


def test_validate_sorts_entries_by_timestamp():
    doc = good_doc()
    doc["entries"] = list(reversed(doc["entries"]))
    trace = validate_trace(doc)
    assert [e.timestamp_ms for e in trace.entries] == [0, 500]


def test_round_trip_doc_identity():
    trace = validate_trace(good_doc())
    assert validate_trace(trace_to_doc(trace)) == trace


def test_digest_stable_and_content_sensitive():
    trace = validate_trace(good_doc())
    assert trace_digest(trace) == trace_digest(validate_trace(good_doc()))
    doc = good_doc()
    doc["entries"][0]["intensity"] = 0.6
    assert trace_digest(validate_trace(doc)) != trace_digest(trace)


@pytest.mark.parametrize("key", ["trace_id", "duration_ms", "entries", "provenance"])
def test_missing_field_rejected(key):
    doc = good_doc()
    del doc[key]
    with pytest.raises(SchemaViolation):
        validate_trace(doc)


def test_unknown_entry_field_rejected():
    doc = good_doc()
    doc["entries"][0]["velocity"] = 1.0
    with pytest.raises(SchemaViolation):
        validate_trace(doc)


@pytest.mark.parametrize(
    "patch",
    [
        {"lane": 5},
        {"lane": -1},
        {"lane": 1.0},
        {"lane": True},
        {"intensity": 1.5},
        {"intensity": -0.1},
        {"timestamp_ms": -1},
        {"timestamp_ms": 4001},
        {"outcome": "smash"},
    ],
)
def test_bad_entry_values_rejected(patch):
    doc = good_doc()
    doc["entries"][0].update(patch)
    with pytest.raises(SchemaViolation):
        validate_trace(doc)


def test_empty_entries_rejected():
    doc = good_doc()
    doc["entries"] = []
    with pytest.raises(EmptyTrace):
        validate_trace(doc)


def test_bad_duration_rejected():
    doc = good_doc()
    doc["duration_ms"] = 0
    with pytest.raises(SchemaViolation):
        validate_trace(doc)


def test_invalid_json_rejected():
    with pytest.raises(MalformedDocument):
        validate_trace(b"{not json")


def test_unsorted_construction_rejected():
    entries = (
        TraceEntry(timestamp_ms=500, lane=0, intensity=0.5, outcome="hit", note=None),
        TraceEntry(timestamp_ms=0, lane=1, intensity=0.5, outcome="hit", note=None),
    )
    with pytest.raises(SchemaViolation):
        ActionTrace(trace_id="x", duration_ms=1000, entries=entries, provenance="synthetic")


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        CorpusSpec(total_count=10, per_archetype_count=3)
    with pytest.raises(InvalidSpec):
        CorpusSpec(total_count=0, per_archetype_count=0)
    with pytest.raises(InvalidSpec):
        CorpusSpec(total_count=3, per_archetype_count=1, noise_level_range=(0.5, 0.2))


def test_spec_doc_round_trip(small_spec):
    assert CorpusSpec.from_doc(small_spec.to_doc()) == small_spec
    model = IntensityModel()
    assert IntensityModel.from_doc(model.to_doc()) == model


def test_generate_corpus_shape(small_corpus):
    assert len(small_corpus) == 9
    by_arch = {}
    for trace in small_corpus:
        by_arch.setdefault(trace.archetype, []).append(trace.trace_id)
    assert set(by_arch) == set(ARCHETYPES)
    assert by_arch["sequential"] == [f"sequential-{i:04d}" for i in range(3)]


def test_generate_corpus_deterministic(small_spec, small_corpus):
    again = generate_corpus(small_spec)
    assert [trace_to_doc(t) for t in again] == [trace_to_doc(t) for t in small_corpus]


def test_generate_corpus_seed_sensitivity(small_spec):
    import dataclasses

    other = dataclasses.replace(small_spec, master_seed=small_spec.master_seed + 1)
    a = [trace_digest(t) for t in generate_corpus(small_spec)]
    b = [trace_digest(t) for t in generate_corpus(other)]
    assert a != b


def test_generated_traces_valid(small_corpus):
    for trace in small_corpus:
        again = validate_trace(trace_to_doc(trace))
        assert again == trace
        for entry in trace.entries:
            assert 0.0 <= entry.intensity <= 1.0
            assert 0 <= entry.lane <= 4


def test_zero_noise_sequential_is_zigzag():
    spec = CorpusSpec(
        total_count=3, per_archetype_count=1, master_seed=99, noise_level_range=(0.0, 0.0)
    )
    trace = generate_trace(spec, "sequential", "sequential-0000")
    zigzag = (0, 1, 2, 3, 4, 3, 2, 1)
    hits = [e.lane for e in trace.entries]
    assert hits == [zigzag[i % len(zigzag)] for i in range(len(hits))]


def test_write_and_load_corpus(tmp_path, small_spec, small_corpus):
    root = write_corpus(small_spec, small_corpus, tmp_path / "corpus")
    traces, manifest = load_corpus(root)
    assert [t.trace_id for t in traces] == [t.trace_id for t in small_corpus]
    assert manifest["corpus_version"] == CORPUS_VERSION
    assert CorpusSpec.from_doc(manifest["spec"]) == small_spec
    assert all(trace_digest(a) == trace_digest(b) for a, b in zip(traces, small_corpus))


def test_load_corpus_detects_tampering(tmp_path, small_spec, small_corpus):
    root = write_corpus(small_spec, small_corpus, tmp_path / "corpus")
    victim = root / "traces" / f"{small_corpus[0].trace_id}.json"
    doc = json.loads(victim.read_text())
    doc["entries"][0]["intensity"] = 0.123456
    victim.write_text(json.dumps(doc))
    with pytest.raises(SchemaViolation):
        load_corpus(root)
    # verify=False loads anyway, for forensics
    traces, _ = load_corpus(root, verify=False)
    assert len(traces) == len(small_corpus)


def test_load_corpus_missing_manifest(tmp_path):
    with pytest.raises(MalformedDocument):
        load_corpus(tmp_path)


def test_manifest_lists_per_trace_seeds(small_spec, small_corpus):
    manifest = corpus_manifest(small_spec, small_corpus)
    rows = manifest["traces"]
    assert len(rows) == len(small_corpus)
    for row in rows:
        assert set(row) >= {"trace_id", "digest", "seed"}


def test_corpus_store_modes(tmp_path, small_spec, small_corpus):
    root = write_corpus(small_spec, small_corpus, tmp_path / "corpus")
    from_dir = CorpusStore(root)
    from_map = CorpusStore({t.trace_id: t for t in small_corpus})
    from_iter = CorpusStore(small_corpus)
    tid = small_corpus[0].trace_id
    assert from_dir.get(tid) == from_map.get(tid) == from_iter.get(tid)
    assert from_dir.get("nope") is None
    assert len(from_dir) == 9
    extra = make_trace([0, 1], trace_id="extra-0001")
    from_map.add(extra)
    assert from_map.get("extra-0001") is extra
