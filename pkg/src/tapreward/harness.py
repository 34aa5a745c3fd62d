"""Paired baseline/constrained evaluation over trace corpora.

Each trace runs twice from one seed: once with the requested parameters
untouched (baseline) and once through the envelope (constrained). The
harness aggregates clamp rates and delta distributions, applies the two
distribution-level checks (monotonicity across nested configs,
onset-density separation across pattern labels), and writes all
artifacts deterministically so re-runs are byte-identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .canonical import canonical_bytes
from .engine import (
    audio_digest,
    compose,
    derive_requested_params,
    render_audio,
    select_template,
)
from .envelope import PARAM_NAMES, EnvelopeConfig, config_hash, enforce, preset
from .errors import InsufficientLabels
from .metering import delta_metrics, measure, momentary_series, short_term_series
from .patterns import PATTERN_LABELS, dominant_lane, extract_features, label_pattern
from .reporting import SessionReport, build_report, serialize_report
from .rng import derive_seed
from .traces import ActionTrace

__all__ = [
    "PairedResult",
    "AggregateStats",
    "CheckResult",
    "run_paired",
    "run_corpus",
    "aggregate",
    "monotonicity_check",
    "clamp_dominance_check",
    "discriminability_check",
    "emit_artifacts",
    "loudness_series_for",
]

DELTA_METRICS = ("d_onset_density", "d_lufs", "d_lra")
_HIST_BINS = 24
_PERCENTILES = (5.0, 25.0, 50.0, 75.0, 95.0)


@dataclass(frozen=True)
class PairedResult:
    trace_id: str
    config_name: str
    report: SessionReport


@dataclass(frozen=True)
class AggregateStats:
    """Exact reductions over one run's report set."""

    config_name: str
    config_hash: str
    n: int
    clamp_rates: dict  # parameter -> fraction of traces clamped
    any_clamp_rate: float
    label_counts: dict
    tie_break_count: int
    delta_summaries: dict  # metric -> summary dict or None (no-audio runs)
    onset_density_by_label: dict  # label -> summary of constrained densities

    def to_doc(self) -> dict:
        return {
            "config_name": self.config_name,
            "config_hash": self.config_hash,
            "n": self.n,
            "clamp_rates": self.clamp_rates,
            "any_clamp_rate": self.any_clamp_rate,
            "label_counts": self.label_counts,
            "tie_break_count": self.tie_break_count,
            "delta_summaries": self.delta_summaries,
            "onset_density_by_label": self.onset_density_by_label,
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: dict

    def to_doc(self) -> dict:
        return {"name": self.name, "passed": self.passed, "details": self.details}


def run_paired(
    trace: ActionTrace,
    config: EnvelopeConfig,
    seed: int,
    include_audio: bool = True,
) -> PairedResult:
    """One trace, both arms, one seed, one report."""
    features = extract_features(trace)
    label = label_pattern(features)
    requested = derive_requested_params(features)
    effective, records = enforce(requested, config)
    template = select_template(label, seed)
    lane = dominant_lane(trace)

    metrics_b = metrics_c = deltas = None
    digest_b = digest_c = None
    if include_audio:
        seq_b = compose(template, requested, lane, seed)
        seq_c = compose(template, effective, lane, seed)
        buf_b = render_audio(seq_b, requested.gain_db)
        buf_c = render_audio(seq_c, effective.gain_db)
        metrics_b = measure(buf_b, seq_b)
        metrics_c = measure(buf_c, seq_c)
        deltas = delta_metrics(metrics_b, metrics_c)
        digest_b = audio_digest(buf_b)
        digest_c = audio_digest(buf_c)

    report = build_report(
        trace=trace,
        config=config,
        seed=seed,
        features=features,
        label=label,
        requested=requested,
        effective=effective,
        clamp_records=records,
        template=template,
        metrics_baseline=metrics_b,
        metrics_constrained=metrics_c,
        deltas=deltas,
        audio_digest_baseline=digest_b,
        audio_digest_constrained=digest_c,
    )
    return PairedResult(trace_id=trace.trace_id, config_name=config.name, report=report)


def run_corpus(
    corpus: Sequence[ActionTrace],
    config: EnvelopeConfig,
    master_seed: int,
    include_audio: bool = True,
) -> tuple[list[PairedResult], AggregateStats]:
    """Run every trace; abort loudly on the first failure.

    Per-trace seeds derive from the run master seed and the trace id,
    so the same corpus and seed always reproduce the same report set.
    Output is ordered by trace_id regardless of input order.
    """
    results = []
    for trace in sorted(corpus, key=lambda t: t.trace_id):
        seed = derive_seed(master_seed, "run", trace.trace_id)
        try:
            results.append(run_paired(trace, config, seed, include_audio=include_audio))
        except Exception as exc:
            raise type(exc)(f"trace {trace.trace_id!r}: {exc}") from exc
    return results, aggregate(results, config)


def _summary(values: np.ndarray) -> dict:
    pct = np.percentile(values, _PERCENTILES)
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi > lo:
        counts, edges = np.histogram(values, bins=_HIST_BINS, range=(lo, hi))
    else:
        counts, edges = np.array([len(values)]), np.array([lo, hi])
    return {
        "count": int(len(values)),
        "mean": float(np.mean(values)),
        "mean_abs": float(np.mean(np.abs(values))),
        "stdev": float(np.std(values)),
        "min": lo,
        "max": hi,
        "percentiles": {f"p{int(p)}": float(v) for p, v in zip(_PERCENTILES, pct)},
        "histogram": {
            "edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts],
        },
    }


def _density_summary(values: np.ndarray) -> dict:
    q25, q50, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    return {
        "count": int(len(values)),
        "p25": float(q25),
        "median": float(q50),
        "p75": float(q75),
        "iqr": float(q75 - q25),
    }


def aggregate(results: Sequence[PairedResult], config: EnvelopeConfig) -> AggregateStats:
    """Exact aggregate statistics, recomputable from the reports alone."""
    n = len(results)
    reports = [r.report for r in results]
    clamp_rates = {}
    for param in PARAM_NAMES:
        clamped = sum(
            1
            for rep in reports
            if any(c.parameter == param and c.clamped for c in rep.clamp_records)
        )
        clamp_rates[param] = clamped / n if n else 0.0
    any_rate = (sum(1 for rep in reports if rep.any_clamped) / n) if n else 0.0

    label_counts = {label: 0 for label in PATTERN_LABELS}
    tie_breaks = 0
    for rep in reports:
        label_counts[rep.label.label] += 1
        tie_breaks += 1 if rep.label.tie_break_applied else 0

    delta_summaries = {}
    for metric in DELTA_METRICS:
        values = [
            getattr(rep.deltas, metric)
            for rep in reports
            if rep.deltas is not None and getattr(rep.deltas, metric) is not None
        ]
        delta_summaries[metric] = _summary(np.array(values)) if values else None

    by_label = {}
    for label in PATTERN_LABELS:
        values = [
            rep.metrics_constrained.onset_density_ev_s
            for rep in reports
            if rep.label.label == label
            and rep.metrics_constrained is not None
            and rep.metrics_constrained.onset_density_ev_s is not None
        ]
        if values:
            by_label[label] = _density_summary(np.array(values))

    return AggregateStats(
        config_name=config.name,
        config_hash=config_hash(config),
        n=n,
        clamp_rates=clamp_rates,
        any_clamp_rate=any_rate,
        label_counts=label_counts,
        tie_break_count=tie_breaks,
        delta_summaries=delta_summaries,
        onset_density_by_label=by_label,
    )


def monotonicity_check(
    stats_relaxed: AggregateStats,
    stats_default: AggregateStats,
    stats_tight: AggregateStats,
) -> CheckResult:
    """Mean |Δ| must not decrease as the envelope tightens."""
    details = {}
    passed = True
    for metric in DELTA_METRICS:
        means = []
        for stats in (stats_relaxed, stats_default, stats_tight):
            summary = stats.delta_summaries.get(metric)
            means.append(None if summary is None else summary["mean_abs"])
        details[metric] = {
            "relaxed": means[0],
            "default": means[1],
            "tight": means[2],
        }
        if any(m is None for m in means):
            details[metric]["ok"] = False
            passed = False
            continue
        ok = means[0] <= means[1] <= means[2]
        details[metric]["ok"] = ok
        passed = passed and ok
    return CheckResult(name="monotonicity", passed=passed, details=details)


def clamp_dominance_check(
    results_relaxed: Sequence[PairedResult],
    results_default: Sequence[PairedResult],
    results_tight: Sequence[PairedResult],
) -> CheckResult:
    """Pointwise: per trace and parameter, clamp distance must be
    ordered Relaxed ≤ Default ≤ Tight. Exact, no tolerance."""

    def distances(results):
        table = {}
        for r in results:
            table[r.trace_id] = {
                c.parameter: abs(c.effective - c.requested)
                for c in r.report.clamp_records
            }
        return table

    relaxed = distances(results_relaxed)
    default = distances(results_default)
    tight = distances(results_tight)
    violations = []
    for trace_id in sorted(relaxed):
        for param in PARAM_NAMES:
            d_r = relaxed[trace_id][param]
            d_d = default[trace_id][param]
            d_t = tight[trace_id][param]
            if not (d_r <= d_d <= d_t):
                violations.append(
                    {"trace_id": trace_id, "parameter": param,
                     "relaxed": d_r, "default": d_d, "tight": d_t}
                )
    return CheckResult(
        name="clamp_dominance",
        passed=not violations,
        details={"checked": len(relaxed) * len(PARAM_NAMES), "violations": violations},
    )


def discriminability_check(results: Sequence[PairedResult]) -> CheckResult:
    """Constrained onset-density separation across pattern labels.

    Passes iff every pair of label medians differs by more than
    0.25 x the pooled IQR (size-weighted mean of per-label IQRs).
    """
    groups: dict[str, list[float]] = {}
    for r in results:
        metrics = r.report.metrics_constrained
        if metrics is None or metrics.onset_density_ev_s is None:
            continue
        groups.setdefault(r.report.label.label, []).append(metrics.onset_density_ev_s)
    if len(groups) < 2:
        raise InsufficientLabels(
            f"need at least two labels with densities, got {sorted(groups)}"
        )
    medians = {}
    iqrs = {}
    sizes = {}
    for label, values in groups.items():
        arr = np.array(values)
        medians[label] = float(np.median(arr))
        q25, q75 = np.percentile(arr, [25.0, 75.0])
        iqrs[label] = float(q75 - q25)
        sizes[label] = len(values)
    total = sum(sizes.values())
    pooled_iqr = sum(iqrs[k] * sizes[k] for k in groups) / total
    threshold = 0.25 * pooled_iqr

    labels = sorted(groups)
    pairs = {}
    passed = True
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            gap = abs(medians[a] - medians[b])
            ok = gap > threshold
            pairs[f"{a}/{b}"] = {"gap": gap, "ok": ok}
            passed = passed and ok
    return CheckResult(
        name="discriminability",
        passed=passed,
        details={
            "medians": medians,
            "iqrs": iqrs,
            "pooled_iqr": pooled_iqr,
            "threshold": threshold,
            "pairs": pairs,
        },
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    sink = io.StringIO()
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(sink.getvalue())


_METRIC_FIELDS = (
    "integrated_lufs",
    "loudness_range_lu",
    "onset_density_ev_s",
    "max_level_slope_db_s",
)


def emit_artifacts(
    results: Sequence[PairedResult],
    stats: AggregateStats,
    out_dir: str | Path,
    loudness: Mapping[str, dict] | None = None,
    plots: bool = True,
) -> list[Path]:
    """Write the run's artifact set; deterministic byte-for-byte.

    reports/        one canonical JSON per trace
    per_trace.csv   features, params, clamp flags, metrics, deltas
    scatter_*.csv   requested vs effective per parameter
    hist_*.csv      delta histogram bins
    stats.json      canonical aggregate document
    summary.txt     human-readable aggregate summary
    loudness_*.csv  momentary/short-term series for selected traces
    plots/          PNG renderings of the scatter and histogram CSVs,
                    skipped silently when matplotlib is unavailable;
                    PNG bytes are not covered by the determinism claim
    """
    out = Path(out_dir)
    reports_dir = out / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ordered = sorted(results, key=lambda r: r.trace_id)
    for r in ordered:
        path = reports_dir / f"{r.trace_id}.json"
        path.write_bytes(serialize_report(r.report))
        written.append(path)

    header = ["trace_id", "config_name", "label", "tie_break_applied"]
    header += [f"feature_{k}" for k in (
        "lane_diversity", "dominant_lane_ratio", "sequential_coverage",
        "tap_rate", "mean_intensity", "accent_fraction",
    )]
    for param in PARAM_NAMES:
        header += [f"requested_{param}", f"effective_{param}", f"clamped_{param}", f"bound_hit_{param}"]
    for arm in ("baseline", "constrained"):
        header += [f"{arm}_{f}" for f in _METRIC_FIELDS]
    header += list(DELTA_METRICS)

    rows = []
    for r in ordered:
        rep = r.report
        row = [rep.trace_id, rep.config_name, rep.label.label, rep.label.tie_break_applied]
        doc = rep.features.to_doc()
        row += [doc[k] for k in (
            "lane_diversity", "dominant_lane_ratio", "sequential_coverage",
            "tap_rate", "mean_intensity", "accent_fraction",
        )]
        by_param = {c.parameter: c for c in rep.clamp_records}
        for param in PARAM_NAMES:
            c = by_param[param]
            row += [c.requested, c.effective, c.clamped, c.bound_hit]
        for metrics in (rep.metrics_baseline, rep.metrics_constrained):
            if metrics is None:
                row += [None] * len(_METRIC_FIELDS)
            else:
                mdoc = metrics.to_doc()
                row += [mdoc[f] for f in _METRIC_FIELDS]
        if rep.deltas is None:
            row += [None] * len(DELTA_METRICS)
        else:
            ddoc = rep.deltas.to_doc()
            row += [ddoc[m] for m in DELTA_METRICS]
        rows.append(row)
    per_trace = out / "per_trace.csv"
    _write_csv(per_trace, header, rows)
    written.append(per_trace)

    for param in PARAM_NAMES:
        path = out / f"scatter_{param}.csv"
        _write_csv(
            path,
            ["trace_id", "requested", "effective", "clamped"],
            [
                (
                    r.trace_id,
                    by.requested,
                    by.effective,
                    by.clamped,
                )
                for r in ordered
                for by in [next(c for c in r.report.clamp_records if c.parameter == param)]
            ],
        )
        written.append(path)

    for metric in DELTA_METRICS:
        summary = stats.delta_summaries.get(metric)
        path = out / f"hist_{metric}.csv"
        if summary is None:
            _write_csv(path, ["bin_lower", "bin_upper", "count"], [])
        else:
            edges = summary["histogram"]["edges"]
            counts = summary["histogram"]["counts"]
            _write_csv(
                path,
                ["bin_lower", "bin_upper", "count"],
                [(edges[i], edges[i + 1], counts[i]) for i in range(len(counts))],
            )
        written.append(path)

    stats_path = out / "stats.json"
    stats_path.write_bytes(canonical_bytes(stats.to_doc()))
    written.append(stats_path)

    summary_path = out / "summary.txt"
    summary_path.write_text(render_summary(stats))
    written.append(summary_path)

    for trace_id in sorted(loudness or {}):
        series = loudness[trace_id]
        path = out / f"loudness_{trace_id}.csv"
        _write_csv(
            path,
            ["arm", "series", "time_s", "lufs"],
            [
                (arm, kind, t, level)
                for arm in ("baseline", "constrained")
                for kind in ("momentary", "short_term")
                for t, level in zip(*series[arm][kind])
            ],
        )
        written.append(path)

    if plots:
        written.extend(_emit_plots(ordered, stats, out))
    return written


def _emit_plots(results: Sequence[PairedResult], stats: AggregateStats, out: Path) -> list[Path]:
    # best effort only: a missing or broken matplotlib must never fail a run
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return []

    plot_dir = out / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        config = preset(stats.config_name)
        bounds = {p: (config.bounds(p).lower, config.bounds(p).upper) for p in PARAM_NAMES}
    except KeyError:
        bounds = {}

    for param in PARAM_NAMES:
        fig, ax = plt.subplots(figsize=(5, 5))
        req, eff, flags = [], [], []
        for r in results:
            c = next(rec for rec in r.report.clamp_records if rec.parameter == param)
            req.append(c.requested)
            eff.append(c.effective)
            flags.append(c.clamped)
        colors = ["#d62728" if f else "#1f77b4" for f in flags]
        ax.scatter(req, eff, s=12, c=colors, alpha=0.6, linewidths=0)
        if param in bounds:
            lo, hi = bounds[param]
            ax.axhline(lo, color="#888888", linewidth=0.8, linestyle="--")
            ax.axhline(hi, color="#888888", linewidth=0.8, linestyle="--")
        ax.set_xlabel(f"requested {param}")
        ax.set_ylabel(f"effective {param}")
        ax.set_title(f"{stats.config_name}: {param}")
        path = plot_dir / f"scatter_{param}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)

    for metric in DELTA_METRICS:
        summary = stats.delta_summaries.get(metric)
        if summary is None:
            continue
        edges = summary["histogram"]["edges"]
        counts = summary["histogram"]["counts"]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        widths = [edges[i + 1] - edges[i] for i in range(len(counts))]
        ax.bar(edges[:-1], counts, width=widths, align="edge", color="#1f77b4", edgecolor="white")
        ax.axvline(0.0, color="#d62728", linewidth=1.0, linestyle="--")
        ax.set_xlabel(f"{metric} (constrained - baseline)")
        ax.set_ylabel("count")
        ax.set_title(f"{stats.config_name}: {metric}")
        path = plot_dir / f"hist_{metric}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    return written


def render_summary(stats: AggregateStats) -> str:
    lines = [
        f"config: {stats.config_name} ({stats.config_hash[:12]})",
        f"traces: {stats.n}",
        "clamp rates:",
    ]
    for param in PARAM_NAMES:
        lines.append(f"  {param}: {stats.clamp_rates[param] * 100.0:.2f}%")
    lines.append(f"  any parameter: {stats.any_clamp_rate * 100.0:.2f}%")
    lines.append("labels:")
    for label in PATTERN_LABELS:
        lines.append(f"  {label}: {stats.label_counts.get(label, 0)}")
    lines.append(f"  tie breaks applied: {stats.tie_break_count}")
    lines.append("delta summaries (constrained - baseline):")
    for metric in DELTA_METRICS:
        summary = stats.delta_summaries.get(metric)
        if summary is None:
            lines.append(f"  {metric}: not computed (no-audio run)")
            continue
        lines.append(
            f"  {metric}: mean {summary['mean']:+.6f}  mean|.| {summary['mean_abs']:.6f}  "
            f"sd {summary['stdev']:.6f}  n {summary['count']}"
        )
    lines.append("constrained onset density by label:")
    for label in sorted(stats.onset_density_by_label):
        d = stats.onset_density_by_label[label]
        lines.append(
            f"  {label}: median {d['median']:.6f}  iqr {d['iqr']:.6f}  n {d['count']}"
        )
    return "\n".join(lines) + "\n"


def loudness_series_for(trace: ActionTrace, config: EnvelopeConfig, seed: int) -> dict:
    """Momentary and short-term loudness for both arms of one trace."""
    features = extract_features(trace)
    label = label_pattern(features)
    requested = derive_requested_params(features)
    effective, _ = enforce(requested, config)
    template = select_template(label, seed)
    lane = dominant_lane(trace)
    series = {}
    for arm, params in (("baseline", requested), ("constrained", effective)):
        seq = compose(template, params, lane, seed)
        buf = render_audio(seq, params.gain_db)
        mom_t, mom_l = momentary_series(buf)
        st_t, st_l = short_term_series(buf)
        series[arm] = {
            "momentary": ([float(t) for t in mom_t], [float(v) for v in mom_l]),
            "short_term": ([float(t) for t in st_t], [float(v) for v in st_l]),
        }
    return series
