"""Pattern-conditioned reward engine: parameters, templates, synthesis.

The engine turns trace features into requested parameters, picks a
musical template for the session's pattern family, lays notes onto a
fixed 4-bar / 8-steps-per-bar grid, and renders the grid to audio.

Two properties are load-bearing for the evaluation harness:

 * Template selection and step layout draw from seed streams that do
   not depend on engine parameters, so the baseline and constrained
   renders of one session share the exact same notes and rests.
 * The per-step rest decision is fixed per template variant, so the
   number of sounding notes is constant across parameter changes and
   onset density scales exactly with tempo.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canonical import digest_bytes
from .envelope import EngineParams
from .errors import ClippingDetected, SchemaViolation
from .patterns import PATTERN_LABELS, PatternFeatures, PatternLabel
from .rng import rng_for
from .traces import LANES

__all__ = [
    "SAMPLE_RATE",
    "PENTATONIC_HZ",
    "TemplateInstance",
    "NoteEvent",
    "NoteSequence",
    "AudioBuffer",
    "derive_requested_params",
    "select_template",
    "compose",
    "render_audio",
    "audio_digest",
    "quantize_pcm16",
    "write_wav",
    "read_wav",
]

SAMPLE_RATE = 44100

# One voice per lane: C major pentatonic, C4..A4.
PENTATONIC_HZ = (261.63, 293.66, 329.63, 392.00, 440.00)

BAR_COUNT = 4
STEPS_PER_BAR = 8
VARIANTS_PER_FAMILY = 4

_BASE_AMPLITUDE = 0.25
_ACCENT_GAIN = 2.0  # +6 dB on accented notes
_DECAY = math.log(1000.0)  # -60 dB over one note
_ATTACK_S = 0.002


@dataclass(frozen=True)
class TemplateInstance:
    family: str
    variant_index: int
    bar_count: int = BAR_COUNT
    steps_per_bar: int = STEPS_PER_BAR

    def to_doc(self) -> dict:
        return {
            "family": self.family,
            "variant_index": self.variant_index,
            "bar_count": self.bar_count,
            "steps_per_bar": self.steps_per_bar,
        }

    @classmethod
    def from_doc(cls, doc) -> "TemplateInstance":
        return cls(
            family=doc["family"],
            variant_index=int(doc["variant_index"]),
            bar_count=int(doc["bar_count"]),
            steps_per_bar=int(doc["steps_per_bar"]),
        )


@dataclass(frozen=True)
class NoteEvent:
    onset_s: float
    lane: int
    accented: bool
    duration_s: float


@dataclass(frozen=True, eq=False)
class NoteSequence:
    events: tuple[NoteEvent, ...]
    total_duration_s: float
    tempo_bpm: float
    seed: int

    def to_doc(self) -> dict:
        return {
            "tempo_bpm": self.tempo_bpm,
            "total_duration_s": self.total_duration_s,
            "seed": self.seed,
            "events": [
                {
                    "onset_s": e.onset_s,
                    "lane": e.lane,
                    "accented": e.accented,
                    "duration_s": e.duration_s,
                }
                for e in self.events
            ],
        }


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    sample_rate_hz: int
    samples: np.ndarray
    duration_s: float


def derive_requested_params(features: PatternFeatures) -> EngineParams:
    """Map trace features to requested engine parameters.

    Affine in the driving feature: a tap rate of 2.5/s lands mid-range
    at 120 BPM, mean intensity 0.8 requests -2 dB, and the accent ratio
    passes straight through.
    """
    return EngineParams(
        tempo_bpm=60.0 + 24.0 * features.tap_rate,
        gain_db=-30.0 + 35.0 * features.mean_intensity,
        accent_ratio=features.accent_fraction,
    )


def select_template(label: PatternLabel, seed: int) -> TemplateInstance:
    """Pick one of the label's variants from the session seed."""
    if label.label not in PATTERN_LABELS:
        raise SchemaViolation(f"unknown pattern label {label.label!r}")
    rng = rng_for(seed, "template")
    return TemplateInstance(
        family=label.label, variant_index=rng.randrange(VARIANTS_PER_FAMILY)
    )


_REST = -1

_SEQUENTIAL_WALKS = (
    (0, 1, 2, 3, 4),
    (4, 3, 2, 1, 0),
    (0, 1, 2, 3, 4, 3, 2, 1),
    (4, 3, 2, 1, 0, 1, 2, 3),
)

# Repetitive bar motifs around the anchor lane a with its upper/lower
# neighbors u/n; exactly one rest per bar keeps sounding counts equal
# across variants.
def _repetitive_bar(variant: int, anchor: int) -> tuple[int, ...]:
    a = anchor
    u = min(LANES - 1, anchor + 1)
    n = max(0, anchor - 1)
    bars = (
        (a, a, a, u, a, a, n, _REST),
        (a, u, a, _REST, a, n, a, u),
        (a, a, u, a, _REST, a, n, a),
        (a, n, a, u, a, _REST, a, a),
    )
    return bars[variant]


_EXPLORATORY_REST_P = (0.20, 0.30, 0.40, 0.25)


def _step_lanes(template: TemplateInstance, dominant: int, seed: int) -> list[int]:
    """Lane (or rest) per grid step. Independent of engine parameters."""
    total = template.bar_count * template.steps_per_bar
    if template.family == "Sequential":
        walk = _SEQUENTIAL_WALKS[template.variant_index]
        return [walk[k % len(walk)] for k in range(total)]
    if template.family == "Repetitive":
        bar = _repetitive_bar(template.variant_index, dominant)
        return [bar[k % template.steps_per_bar] for k in range(total)]
    rng = rng_for(seed, "steps", template.family, template.variant_index)
    rest_p = _EXPLORATORY_REST_P[template.variant_index]
    lanes = []
    for _ in range(total):
        if rng.random() < rest_p:
            lanes.append(_REST)
        else:
            lanes.append(rng.randrange(LANES))
    if all(lane == _REST for lane in lanes):
        lanes[0] = rng.randrange(LANES)  # never render pure silence
    return lanes


def compose(
    template: TemplateInstance,
    params: EngineParams,
    dominant_lane: int,
    seed: int,
) -> NoteSequence:
    """Lay the template onto the grid at the given parameters.

    Step duration is 30/tempo seconds (eighth notes at the session
    tempo). Accents flag round(accent_ratio * sounding) notes, chosen
    from a dedicated seed stream so changing the accent ratio never
    reshuffles lanes or rests.
    """
    if not 0 <= dominant_lane < LANES:
        raise SchemaViolation(f"dominant lane out of range: {dominant_lane}")
    step_s = 30.0 / params.tempo_bpm
    lanes = _step_lanes(template, dominant_lane, seed)
    sounding = [k for k, lane in enumerate(lanes) if lane != _REST]

    accent_count = int(round(params.accent_ratio * len(sounding)))
    accent_rng = rng_for(seed, "accents")
    accented = set(accent_rng.sample(range(len(sounding)), accent_count))

    events = tuple(
        NoteEvent(
            onset_s=k * step_s,
            lane=lanes[k],
            accented=i in accented,
            duration_s=step_s,
        )
        for i, k in enumerate(sounding)
    )
    total = len(lanes) * step_s
    return NoteSequence(events=events, total_duration_s=total, tempo_bpm=params.tempo_bpm, seed=seed)


def render_audio(sequence: NoteSequence, gain_db: float, sample_rate_hz: int = SAMPLE_RATE) -> AudioBuffer:
    """Render a note sequence to mono float64 audio.

    Each note is a sine at its lane's pentatonic pitch under an
    exponential decay that reaches -60 dB at the note boundary, with a
    2 ms linear attack. Accents double the amplitude. Master gain is
    applied last; there is no normalization stage, so the level the
    meter sees is exactly the level the parameters imply.
    """
    n_total = int(round(sequence.total_duration_s * sample_rate_hz))
    buf = np.zeros(n_total, dtype=np.float64)
    for event in sequence.events:
        start = int(round(event.onset_s * sample_rate_hz))
        m = int(round(event.duration_s * sample_rate_hz))
        m = min(m, n_total - start)
        if m <= 0:
            continue
        t = np.arange(m, dtype=np.float64) / sample_rate_hz
        env = np.exp(-t * (_DECAY / event.duration_s))
        env *= np.minimum(1.0, t / _ATTACK_S)
        amp = _BASE_AMPLITUDE * (_ACCENT_GAIN if event.accented else 1.0)
        buf[start : start + m] += amp * env * np.sin(
            2.0 * math.pi * PENTATONIC_HZ[event.lane] * t
        )
    buf *= 10.0 ** (gain_db / 20.0)
    peak = float(np.max(np.abs(buf))) if n_total else 0.0
    if peak > 1.0:
        raise ClippingDetected(f"peak {peak:.6f} exceeds full scale")
    return AudioBuffer(
        sample_rate_hz=sample_rate_hz, samples=buf, duration_s=sequence.total_duration_s
    )


def quantize_pcm16(buffer: AudioBuffer) -> np.ndarray:
    return np.round(buffer.samples * 32767.0).astype("<i2")


def audio_digest(buffer: AudioBuffer) -> str:
    """Digest over the quantized PCM bytes, i.e. exactly what a WAV holds."""
    return digest_bytes(quantize_pcm16(buffer).tobytes())


def write_wav(buffer: AudioBuffer, path: str | Path) -> None:
    pcm = quantize_pcm16(buffer)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(buffer.sample_rate_hz)
        handle.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> AudioBuffer:
    with wave.open(str(path), "rb") as handle:
        if handle.getnchannels() != 1 or handle.getsampwidth() != 2:
            raise SchemaViolation("expected mono 16-bit PCM WAV")
        rate = handle.getframerate()
        frames = handle.readframes(handle.getnframes())
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32767.0
    return AudioBuffer(
        sample_rate_hz=rate, samples=samples, duration_s=len(samples) / rate
    )
