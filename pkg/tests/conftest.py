"""Shared fixtures: a small deterministic corpus and signal helpers."""

from __future__ import annotations

import numpy as np
import pytest

from tapreward.engine import SAMPLE_RATE, AudioBuffer
from tapreward.envelope import preset
from tapreward.traces import ActionTrace, CorpusSpec, TraceEntry, generate_corpus


@pytest.fixture(scope="session")
def small_spec() -> CorpusSpec:
    return CorpusSpec(total_count=9, per_archetype_count=3, master_seed=4242)


@pytest.fixture(scope="session")
def small_corpus(small_spec) -> list[ActionTrace]:
    return generate_corpus(small_spec)


@pytest.fixture(scope="session")
def relaxed_config():
    return preset("Relaxed")


@pytest.fixture(scope="session")
def default_config():
    return preset("Default")


@pytest.fixture(scope="session")
def tight_config():
    return preset("Tight")


def make_trace(
    lanes,
    trace_id: str = "hand-0001",
    duration_ms: int = 4000,
    intensity: float = 0.5,
    outcome: str = "hit",
    spacing_ms: int = 250,
) -> ActionTrace:
    """Hand-built trace with evenly spaced taps on the given lanes."""
    entries = tuple(
        TraceEntry(
            timestamp_ms=i * spacing_ms,
            lane=lane,
            intensity=intensity,
            outcome=outcome,
            note=None,
        )
        for i, lane in enumerate(lanes)
    )
    return ActionTrace(
        trace_id=trace_id,
        duration_ms=duration_ms,
        entries=entries,
        provenance="synthetic",
    )


def sine_buffer(
    freq_hz: float,
    duration_s: float,
    amplitude: float = 1.0,
    sample_rate_hz: int = SAMPLE_RATE,
) -> AudioBuffer:
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    samples = amplitude * np.sin(2.0 * np.pi * freq_hz * t)
    return AudioBuffer(
        sample_rate_hz=sample_rate_hz,
        samples=samples.astype(np.float64),
        duration_s=n / sample_rate_hz,
    )


def silence_buffer(duration_s: float, sample_rate_hz: int = SAMPLE_RATE) -> AudioBuffer:
    n = int(round(duration_s * sample_rate_hz))
    return AudioBuffer(
        sample_rate_hz=sample_rate_hz,
        samples=np.zeros(n, dtype=np.float64),
        duration_s=n / sample_rate_hz,
    )
