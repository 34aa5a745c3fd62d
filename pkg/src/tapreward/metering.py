"""Objective signal metrics over rendered rewards.

Loudness follows the broadcast two-stage K-weighting (pre-filter high
shelf plus high-pass) with gated integration: 400 ms blocks at 75 %
overlap, an absolute gate at -70 and a relative gate 10 LU under the
absolutely-gated mean. Loudness range uses 3 s windows at 1 s hop with
a -20 LU relative gate and the 10th..95th percentile span. The filter
stages are designed from fixed analog parameters at whatever sample
rate the buffer carries, so 44.1 kHz input is first-class rather than a
resampled afterthought.

Two cheaper metrics complete the set: symbolic onset density
(sounding notes per second) and the maximum momentary level slope
(LU per second between consecutive momentary blocks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .engine import AudioBuffer, NoteSequence
from .errors import AllBelowGate, TooShort

__all__ = [
    "SignalMetrics",
    "DeltaMetrics",
    "k_weight",
    "integrated_loudness",
    "loudness_range",
    "momentary_series",
    "short_term_series",
    "max_level_slope",
    "onset_density",
    "measure",
    "delta_metrics",
]

_ABS_GATE_LUFS = -70.0
_REL_GATE_LU = -10.0
_LRA_REL_GATE_LU = -20.0
_LEVEL_FLOOR = -90.0
_POWER_FLOOR = 1e-30


@dataclass(frozen=True)
class SignalMetrics:
    """Per-render metric set. Loudness fields are None when every
    block fell below the gate; slope/range are None when the signal is
    too short for their windows."""

    integrated_lufs: float | None
    loudness_range_lu: float | None
    onset_density_ev_s: float | None
    max_level_slope_db_s: float | None

    def to_doc(self) -> dict:
        return {
            "integrated_lufs": self.integrated_lufs,
            "loudness_range_lu": self.loudness_range_lu,
            "onset_density_ev_s": self.onset_density_ev_s,
            "max_level_slope_db_s": self.max_level_slope_db_s,
        }

    @classmethod
    def from_doc(cls, doc) -> "SignalMetrics":
        def opt(key):
            v = doc[key]
            return None if v is None else float(v)

        return cls(
            integrated_lufs=opt("integrated_lufs"),
            loudness_range_lu=opt("loudness_range_lu"),
            onset_density_ev_s=opt("onset_density_ev_s"),
            max_level_slope_db_s=opt("max_level_slope_db_s"),
        )


@dataclass(frozen=True)
class DeltaMetrics:
    """Constrained minus baseline, None wherever either side is None."""

    d_onset_density: float | None
    d_lufs: float | None
    d_lra: float | None

    def to_doc(self) -> dict:
        return {
            "d_onset_density": self.d_onset_density,
            "d_lufs": self.d_lufs,
            "d_lra": self.d_lra,
        }

    @classmethod
    def from_doc(cls, doc) -> "DeltaMetrics":
        def opt(key):
            v = doc[key]
            return None if v is None else float(v)

        return cls(opt("d_onset_density"), opt("d_lufs"), opt("d_lra"))


@lru_cache(maxsize=8)
def _k_filter_coeffs(fs: int):
    # Stage 1: spherical-head high shelf, designed at the target rate
    # from the fixed analog parameters rather than hardcoded at 48 kHz.
    f0 = 1681.9744509555319
    gain_db = 3.99984385397
    q = 0.7071752369554193
    k = math.tan(math.pi * f0 / fs)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    stage1_b = np.array([
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ])
    stage1_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    # Stage 2: high-pass at 38 Hz.
    f0 = 38.13547087613982
    q = 0.5003270373253953
    k = math.tan(math.pi * f0 / fs)
    denom = 1.0 + k / q + k * k
    stage2_b = np.array([1.0, -2.0, 1.0])
    stage2_a = np.array([1.0, 2.0 * (k * k - 1.0) / denom, (1.0 - k / q + k * k) / denom])
    return (stage1_b, stage1_a), (stage2_b, stage2_a)


def k_weight(samples: np.ndarray, sample_rate_hz: int) -> np.ndarray:
    """Apply the two-stage K-weighting filter."""
    (b1, a1), (b2, a2) = _k_filter_coeffs(sample_rate_hz)
    return lfilter(b2, a2, lfilter(b1, a1, samples))


def _block_powers(samples: np.ndarray, fs: int, win_s: float, hop_s: float):
    win = int(round(win_s * fs))
    hop = int(round(hop_s * fs))
    if len(samples) < win:
        raise TooShort(
            f"signal of {len(samples) / fs:.3f} s is shorter than the "
            f"{win_s:.1f} s analysis window"
        )
    count = 1 + (len(samples) - win) // hop
    csum = np.concatenate(([0.0], np.cumsum(samples * samples)))
    starts = np.arange(count) * hop
    powers = (csum[starts + win] - csum[starts]) / win
    return starts / fs, powers


def _levels(powers: np.ndarray) -> np.ndarray:
    return -0.691 + 10.0 * np.log10(np.maximum(powers, _POWER_FLOOR))


def integrated_loudness(buffer: AudioBuffer, strict: bool = False) -> float | None:
    """Gated integrated loudness in LUFS.

    Returns None when gating removes every block; with strict=True that
    case raises AllBelowGate instead.
    """
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    return _integrated_from_weighted(weighted, buffer.sample_rate_hz, strict)


def _integrated_from_weighted(weighted, fs: int, strict: bool) -> float | None:
    _, powers = _block_powers(weighted, fs, 0.4, 0.1)
    levels = _levels(powers)
    kept = powers[levels > _ABS_GATE_LUFS]
    if len(kept) == 0:
        if strict:
            raise AllBelowGate("every 400 ms block is below the absolute gate")
        return None
    rel_gate = -0.691 + 10.0 * math.log10(float(np.mean(kept))) + _REL_GATE_LU
    final = kept[_levels(kept) > rel_gate]
    if len(final) == 0:
        if strict:
            raise AllBelowGate("every block is below the relative gate")
        return None
    return -0.691 + 10.0 * math.log10(float(np.mean(final)))


def loudness_range(buffer: AudioBuffer, strict: bool = False) -> float | None:
    """Gated loudness range in LU (10th to 95th percentile span)."""
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    return _lra_from_weighted(weighted, buffer.sample_rate_hz, strict)


def _lra_from_weighted(weighted, fs: int, strict: bool) -> float | None:
    _, powers = _block_powers(weighted, fs, 3.0, 1.0)
    levels = _levels(powers)
    kept_p = powers[levels > _ABS_GATE_LUFS]
    if len(kept_p) == 0:
        if strict:
            raise AllBelowGate("every 3 s window is below the absolute gate")
        return None
    rel_gate = -0.691 + 10.0 * math.log10(float(np.mean(kept_p))) + _LRA_REL_GATE_LU
    final = _levels(kept_p)
    final = final[final > rel_gate]
    if len(final) == 0:
        if strict:
            raise AllBelowGate("every window is below the relative gate")
        return None
    lo, hi = np.percentile(final, [10.0, 95.0])
    return float(hi - lo)


def momentary_series(buffer: AudioBuffer):
    """Ungated momentary (400 ms) loudness, floored for display."""
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    return _momentary_from_weighted(weighted, buffer.sample_rate_hz)


def _momentary_from_weighted(weighted, fs: int):
    times, powers = _block_powers(weighted, fs, 0.4, 0.1)
    return times, np.maximum(_levels(powers), _LEVEL_FLOOR)


def short_term_series(buffer: AudioBuffer):
    """Ungated short-term (3 s) loudness, floored for display."""
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    times, powers = _block_powers(weighted, buffer.sample_rate_hz, 3.0, 1.0)
    return times, np.maximum(_levels(powers), _LEVEL_FLOOR)


def max_level_slope(buffer: AudioBuffer) -> float:
    """Largest jump between consecutive momentary levels, in LU/s."""
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    return _slope_from_weighted(weighted, buffer.sample_rate_hz, buffer.duration_s)


def _slope_from_weighted(weighted, fs: int, duration_s: float) -> float:
    if duration_s < 0.8:
        raise TooShort("need at least 0.8 s for a level slope")
    _, levels = _momentary_from_weighted(weighted, fs)
    if len(levels) < 2:
        raise TooShort("need at least two momentary blocks")
    return float(np.max(np.abs(np.diff(levels))) / 0.1)


def onset_density(sequence: NoteSequence) -> float:
    """Sounding notes per second of rendered time."""
    if sequence.total_duration_s <= 0:
        raise TooShort("sequence has no duration")
    return len(sequence.events) / sequence.total_duration_s


def measure(buffer: AudioBuffer, sequence: NoteSequence | None = None) -> SignalMetrics:
    """Assemble the full metric set for one render.

    Report-safe: metrics whose preconditions the signal cannot meet
    come back as None instead of raising. The K-weighted signal is
    computed once and shared by the three loudness metrics.
    """
    weighted = k_weight(buffer.samples, buffer.sample_rate_hz)
    fs = buffer.sample_rate_hz
    try:
        lufs = _integrated_from_weighted(weighted, fs, strict=False)
    except TooShort:
        lufs = None
    try:
        lra = _lra_from_weighted(weighted, fs, strict=False)
    except TooShort:
        lra = None
    try:
        slope = _slope_from_weighted(weighted, fs, buffer.duration_s)
    except TooShort:
        slope = None
    density = onset_density(sequence) if sequence is not None else None
    return SignalMetrics(
        integrated_lufs=lufs,
        loudness_range_lu=lra,
        onset_density_ev_s=density,
        max_level_slope_db_s=slope,
    )


def _sub(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


def delta_metrics(baseline: SignalMetrics, constrained: SignalMetrics) -> DeltaMetrics:
    return DeltaMetrics(
        d_onset_density=_sub(constrained.onset_density_ev_s, baseline.onset_density_ev_s),
        d_lufs=_sub(constrained.integrated_lufs, baseline.integrated_lufs),
        d_lra=_sub(constrained.loudness_range_lu, baseline.loudness_range_lu),
    )
