"""Pattern analysis: trace features and discrete labels.

Six scalar features summarize a trace; three of them double as the
per-label scores that decide which pattern family the session falls
into. Labeling is a deterministic argmax with a fixed-priority tie
break when the top two scores sit within a small window of each other.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyTrace
from .traces import ACCENT_THRESHOLD, LANES, ActionTrace

__all__ = [
    "PATTERN_LABELS",
    "TIE_WINDOW",
    "PatternFeatures",
    "PatternLabel",
    "extract_features",
    "label_pattern",
    "dominant_lane",
]

PATTERN_LABELS = ("Sequential", "Repetitive", "Exploratory")

# Scores within this distance of the maximum count as tied.
TIE_WINDOW = 0.05


@dataclass(frozen=True)
class PatternFeatures:
    lane_diversity: float
    dominant_lane_ratio: float
    sequential_coverage: float
    tap_rate: float
    mean_intensity: float
    accent_fraction: float

    def to_doc(self) -> dict:
        return {
            "lane_diversity": self.lane_diversity,
            "dominant_lane_ratio": self.dominant_lane_ratio,
            "sequential_coverage": self.sequential_coverage,
            "tap_rate": self.tap_rate,
            "mean_intensity": self.mean_intensity,
            "accent_fraction": self.accent_fraction,
        }

    @classmethod
    def from_doc(cls, doc) -> "PatternFeatures":
        return cls(**{k: float(doc[k]) for k in (
            "lane_diversity", "dominant_lane_ratio", "sequential_coverage",
            "tap_rate", "mean_intensity", "accent_fraction",
        )})


@dataclass(frozen=True)
class PatternLabel:
    label: str
    scores: tuple[float, float, float]
    tie_break_applied: bool

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "scores": list(self.scores),
            "tie_break_applied": self.tie_break_applied,
        }

    @classmethod
    def from_doc(cls, doc) -> "PatternLabel":
        return cls(
            label=doc["label"],
            scores=tuple(float(s) for s in doc["scores"]),
            tie_break_applied=bool(doc["tie_break_applied"]),
        )


def extract_features(trace: ActionTrace) -> PatternFeatures:
    """Compute the six summary features of a trace."""
    n = len(trace.entries)
    if n == 0:
        raise EmptyTrace(f"trace {trace.trace_id!r} has no entries")

    counts = Counter(e.lane for e in trace.entries)
    entropy = 0.0
    for c in counts.values():
        p = c / n
        entropy -= p * math.log(p)
    diversity = max(0.0, entropy / math.log(LANES))

    dominant_ratio = max(counts.values()) / n

    if n < 2:
        coverage = 0.0
    else:
        lanes = [e.lane for e in trace.entries]
        steps = sum(1 for a, b in zip(lanes, lanes[1:]) if abs(b - a) == 1)
        coverage = steps / (n - 1)

    duration_s = trace.duration_ms / 1000.0
    rate = n / duration_s
    mean_intensity = sum(e.intensity for e in trace.entries) / n
    accents = sum(
        1 for e in trace.entries if e.intensity > ACCENT_THRESHOLD and e.outcome == "hit"
    )
    return PatternFeatures(
        lane_diversity=diversity,
        dominant_lane_ratio=dominant_ratio,
        sequential_coverage=coverage,
        tap_rate=rate,
        mean_intensity=mean_intensity,
        accent_fraction=accents / n,
    )


def label_pattern(features: PatternFeatures) -> PatternLabel:
    """Pick the pattern family from the three label scores.

    Scores map position-wise onto PATTERN_LABELS: stride coverage argues
    Sequential, dominant-lane ratio argues Repetitive, lane diversity
    argues Exploratory. If the runner-up is within TIE_WINDOW of the
    top score, every score inside the window joins the tie and the
    earliest label in PATTERN_LABELS order wins.
    """
    scores = (
        features.sequential_coverage,
        features.dominant_lane_ratio,
        features.lane_diversity,
    )
    order = sorted(range(3), key=lambda i: scores[i], reverse=True)
    top = scores[order[0]]
    # epsilon absorbs binary representation noise so a gap of exactly
    # 0.05 in decimal lands inside the (inclusive) window
    window = TIE_WINDOW + 1e-12
    tie = (top - scores[order[1]]) <= window
    if tie:
        winner = min(i for i in range(3) if top - scores[i] <= window)
    else:
        winner = order[0]
    return PatternLabel(label=PATTERN_LABELS[winner], scores=scores, tie_break_applied=tie)


def dominant_lane(trace: ActionTrace) -> int:
    """Most-used lane; lowest index wins a count tie."""
    if not trace.entries:
        raise EmptyTrace(f"trace {trace.trace_id!r} has no entries")
    counts = Counter(e.lane for e in trace.entries)
    best = max(counts.values())
    return min(lane for lane, c in counts.items() if c == best)
