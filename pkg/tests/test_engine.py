"""Parameter derivation, template composition, and audio rendering."""

import math
import wave

import numpy as np
import pytest

from tapreward.engine import (
    BAR_COUNT,
    PENTATONIC_HZ,
    SAMPLE_RATE,
    STEPS_PER_BAR,
    VARIANTS_PER_FAMILY,
    AudioBuffer,
    NoteEvent,
    NoteSequence,
    audio_digest,
    compose,
    derive_requested_params,
    quantize_pcm16,
    read_wav,
    render_audio,
    select_template,
    write_wav,
)
from tapreward.envelope import EngineParams
from tapreward.errors import ClippingDetected, SchemaViolation
from tapreward.patterns import PatternFeatures, PatternLabel, label_pattern

TEMPLATE_STEPS = BAR_COUNT * STEPS_PER_BAR


def features_of(tap_rate: float, mean_intensity: float, accent_fraction: float):
    return PatternFeatures(
        lane_diversity=0.5,
        dominant_lane_ratio=0.4,
        sequential_coverage=0.6,
        tap_rate=tap_rate,
        mean_intensity=mean_intensity,
        accent_fraction=accent_fraction,
    )


def label_of(name: str) -> PatternLabel:
    scores = {
        "Sequential": (0.9, 0.1, 0.1),
        "Repetitive": (0.1, 0.9, 0.1),
        "Exploratory": (0.1, 0.1, 0.9),
    }[name]
    return PatternLabel(label=name, scores=scores, tie_break_applied=False)


def test_derive_examples():
    p = derive_requested_params(features_of(2.5, 0.6, 0.2))
    assert p == EngineParams(tempo_bpm=120.0, gain_db=-9.0, accent_ratio=0.2)
    assert derive_requested_params(features_of(0.0, 0.5, 0.0)).tempo_bpm == 60.0
    assert derive_requested_params(features_of(1.0, 1.0, 0.0)).gain_db == pytest.approx(5.0)
    assert derive_requested_params(features_of(1.0, 0.0, 0.0)).gain_db == pytest.approx(-30.0)


def test_derive_is_linear_in_each_feature():
    base = derive_requested_params(features_of(2.0, 0.4, 0.3))
    faster = derive_requested_params(features_of(3.0, 0.4, 0.3))
    louder = derive_requested_params(features_of(2.0, 0.9, 0.3))
    assert faster.tempo_bpm - base.tempo_bpm == pytest.approx(24.0)
    assert louder.gain_db - base.gain_db == pytest.approx(0.5 * 35.0)
    assert base.accent_ratio == 0.3


def test_select_template_family_and_range():
    for name in ("Sequential", "Repetitive", "Exploratory"):
        t = select_template(label_of(name), seed=7)
        assert t.family == name
        assert 0 <= t.variant_index < VARIANTS_PER_FAMILY
        assert (t.bar_count, t.steps_per_bar) == (BAR_COUNT, STEPS_PER_BAR)


def test_select_template_deterministic_and_seed_sensitive():
    lab = label_of("Sequential")
    assert select_template(lab, 99) == select_template(lab, 99)
    variants = {select_template(lab, s).variant_index for s in range(40)}
    assert variants == set(range(VARIANTS_PER_FAMILY))


def params(tempo=120.0, gain=-6.0, accent=0.25) -> EngineParams:
    return EngineParams(tempo_bpm=tempo, gain_db=gain, accent_ratio=accent)


def test_compose_grid_at_120_bpm():
    t = select_template(label_of("Sequential"), 3)
    seq = compose(t, params(tempo=120.0), dominant_lane=2, seed=3)
    assert seq.total_duration_s == pytest.approx(8.0)
    assert len(seq.events) == TEMPLATE_STEPS
    step = 30.0 / 120.0
    onsets = [e.onset_s for e in seq.events]
    assert onsets == [pytest.approx(k * step) for k in range(TEMPLATE_STEPS)]
    assert all(e.duration_s == pytest.approx(step) for e in seq.events)


def test_compose_sequential_fills_every_step():
    for seed in range(6):
        t = select_template(label_of("Sequential"), seed)
        seq = compose(t, params(), dominant_lane=1, seed=seed)
        assert len(seq.events) == 32


def test_compose_repetitive_one_rest_per_bar():
    for seed in range(6):
        t = select_template(label_of("Repetitive"), seed)
        seq = compose(t, params(), dominant_lane=3, seed=seed)
        assert len(seq.events) == 28
        step = 30.0 / 120.0
        for bar in range(BAR_COUNT):
            lo, hi = bar * STEPS_PER_BAR * step, (bar + 1) * STEPS_PER_BAR * step
            in_bar = [e for e in seq.events if lo - 1e-9 <= e.onset_s < hi - 1e-9]
            assert len(in_bar) == STEPS_PER_BAR - 1


def test_compose_repetitive_lanes_near_dominant():
    t = select_template(label_of("Repetitive"), 2)
    for lane in range(5):
        seq = compose(t, params(), dominant_lane=lane, seed=11)
        used = {e.lane for e in seq.events}
        assert all(max(0, lane - 1) <= u <= min(4, lane + 1) for u in used)
        assert lane in used


def test_compose_exploratory_sounding_bounds():
    for seed in range(12):
        t = select_template(label_of("Exploratory"), seed)
        seq = compose(t, params(), dominant_lane=2, seed=seed)
        assert 1 <= len(seq.events) <= 32


def test_compose_events_stay_inside_total_duration():
    for name in ("Sequential", "Repetitive", "Exploratory"):
        t = select_template(label_of(name), 5)
        seq = compose(t, params(tempo=97.3), dominant_lane=0, seed=5)
        for e in seq.events:
            assert e.onset_s + e.duration_s <= seq.total_duration_s + 1e-9


def test_compose_accent_count_follows_ratio():
    t = select_template(label_of("Sequential"), 4)
    for ratio in (0.0, 0.25, 0.5, 1.0):
        seq = compose(t, params(accent=ratio), dominant_lane=2, seed=4)
        want = round(ratio * len(seq.events))
        assert sum(e.accented for e in seq.events) == want


def test_compose_structure_independent_of_params():
    # same template and seed: gain and accent changes must not move a note
    t = select_template(label_of("Exploratory"), 9)
    a = compose(t, params(gain=-3.0, accent=0.1), dominant_lane=4, seed=9)
    b = compose(t, params(gain=-27.0, accent=0.9), dominant_lane=4, seed=9)
    assert [(e.onset_s, e.lane) for e in a.events] == [(e.onset_s, e.lane) for e in b.events]


def test_compose_density_scales_exactly_with_tempo():
    # tempo only rescales the grid; event count is tempo-invariant
    for name in ("Sequential", "Repetitive", "Exploratory"):
        t = select_template(label_of(name), 8)
        slow = compose(t, params(tempo=90.0), dominant_lane=2, seed=8)
        fast = compose(t, params(tempo=180.0), dominant_lane=2, seed=8)
        assert len(slow.events) == len(fast.events)
        assert slow.total_duration_s == pytest.approx(2.0 * fast.total_duration_s)
        d_slow = len(slow.events) / slow.total_duration_s
        d_fast = len(fast.events) / fast.total_duration_s
        assert d_fast == pytest.approx(2.0 * d_slow)


def test_render_gain_is_exact_scaling():
    t = select_template(label_of("Sequential"), 1)
    seq = compose(t, params(), dominant_lane=2, seed=1)
    loud = render_audio(seq, gain_db=0.0)
    soft = render_audio(seq, gain_db=-6.0)
    ratio = 10.0 ** (-6.0 / 20.0)
    assert np.allclose(soft.samples, loud.samples * ratio, atol=1e-12)


def test_render_single_note_pitch():
    seq = NoteSequence(
        events=(NoteEvent(onset_s=0.0, lane=4, accented=False, duration_s=1.0),),
        total_duration_s=1.0,
        tempo_bpm=120.0,
        seed=0,
    )
    buf = render_audio(seq, gain_db=0.0)
    spectrum = np.abs(np.fft.rfft(buf.samples))
    peak_hz = np.fft.rfftfreq(len(buf.samples), 1.0 / SAMPLE_RATE)[int(np.argmax(spectrum))]
    assert peak_hz == pytest.approx(PENTATONIC_HZ[4], abs=2.0)
    assert PENTATONIC_HZ[4] == 440.0


def test_render_empty_sequence_is_silence():
    seq = NoteSequence(events=(), total_duration_s=2.0, tempo_bpm=120.0, seed=0)
    buf = render_audio(seq, gain_db=0.0)
    assert len(buf.samples) == round(2.0 * SAMPLE_RATE)
    assert np.all(buf.samples == 0.0)


def test_render_peak_bounded_and_clipping_detected():
    t = select_template(label_of("Sequential"), 2)
    seq = compose(t, params(accent=1.0), dominant_lane=2, seed=2)
    buf = render_audio(seq, gain_db=0.0)
    assert np.max(np.abs(buf.samples)) <= 1.0
    with pytest.raises(ClippingDetected):
        render_audio(seq, gain_db=12.0)


def test_render_deterministic_digest():
    t = select_template(label_of("Repetitive"), 6)
    seq = compose(t, params(), dominant_lane=1, seed=6)
    a = render_audio(seq, gain_db=-6.0)
    b = render_audio(seq, gain_db=-6.0)
    assert audio_digest(a) == audio_digest(b)
    c = render_audio(seq, gain_db=-6.1)
    assert audio_digest(c) != audio_digest(a)


def test_quantize_pcm16_range_and_dtype():
    seq = NoteSequence(
        events=(NoteEvent(onset_s=0.0, lane=0, accented=True, duration_s=0.5),),
        total_duration_s=0.5,
        tempo_bpm=120.0,
        seed=0,
    )
    pcm = quantize_pcm16(render_audio(seq, gain_db=0.0))
    assert pcm.dtype == np.int16
    assert np.max(np.abs(pcm.astype(np.int32))) <= 32767


def test_wav_round_trip(tmp_path):
    t = select_template(label_of("Exploratory"), 3)
    seq = compose(t, params(), dominant_lane=3, seed=3)
    buf = render_audio(seq, gain_db=-6.0)
    path = tmp_path / "reward.wav"
    write_wav(buf, path)
    back = read_wav(path)
    assert back.sample_rate_hz == SAMPLE_RATE
    assert np.array_equal(quantize_pcm16(back), quantize_pcm16(buf))
    assert audio_digest(back) == audio_digest(buf)


def test_read_wav_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(44100)
        w.writeframes(b"\x00\x00\x00\x00" * 100)
    with pytest.raises(SchemaViolation):
        read_wav(path)


def test_read_wav_rejects_8bit(tmp_path):
    path = tmp_path / "lofi.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(1)
        w.setframerate(44100)
        w.writeframes(b"\x80" * 100)
    with pytest.raises(SchemaViolation):
        read_wav(path)


def test_attack_ramp_tames_onset():
    # the first samples of a note rise from zero instead of jumping
    seq = NoteSequence(
        events=(NoteEvent(onset_s=0.0, lane=0, accented=False, duration_s=1.0),),
        total_duration_s=1.0,
        tempo_bpm=120.0,
        seed=0,
    )
    buf = render_audio(seq, gain_db=0.0)
    assert abs(buf.samples[0]) < 1e-6
    head = np.max(np.abs(buf.samples[: int(0.0005 * SAMPLE_RATE)]))
    body = np.max(np.abs(buf.samples))
    assert head < 0.5 * body


def test_decay_reaches_floor_by_note_end():
    seq = NoteSequence(
        events=(NoteEvent(onset_s=0.0, lane=2, accented=False, duration_s=1.0),),
        total_duration_s=1.5,
        tempo_bpm=120.0,
        seed=0,
    )
    buf = render_audio(seq, gain_db=0.0)
    tail = np.max(np.abs(buf.samples[int(0.99 * SAMPLE_RATE) : SAMPLE_RATE]))
    peak = np.max(np.abs(buf.samples))
    # amplitude decays by about three orders of magnitude over the note
    assert tail < peak * 5e-3


def test_pipeline_label_to_template_families(small_corpus):
    from tapreward.patterns import extract_features

    for trace in small_corpus:
        lab = label_pattern(extract_features(trace))
        t = select_template(lab, seed=1)
        assert t.family == lab.label
