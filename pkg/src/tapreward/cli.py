"""Command-line entry points.

Batch commands bind the library directly; `serve` starts the HTTP
service the browser console talks to. Every command exits 0 only when
everything it was asked to do (including embedded checks) passed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .canonical import canonical_bytes
from .envelope import ConfigStore, load_config, resolve_config
from .errors import TapRewardError
from .harness import (
    CheckResult,
    aggregate,
    clamp_dominance_check,
    discriminability_check,
    emit_artifacts,
    loudness_series_for,
    monotonicity_check,
    run_corpus,
)
from .metering import integrated_loudness, loudness_range, max_level_slope
from .reporting import deserialize_report, replay_verify
from .rng import derive_seed
from .traces import CorpusSpec, CorpusStore, generate_corpus, load_corpus, write_corpus

DEFAULT_RUN_SEED = 1001


def _cmd_gen_corpus(args) -> int:
    spec = CorpusSpec()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.total is not None:
        if args.total % 3:
            print(f"--total must be a multiple of 3, got {args.total}", file=sys.stderr)
            return 2
        overrides["total_count"] = args.total
        overrides["per_archetype_count"] = args.total // 3
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    traces = generate_corpus(spec)
    out = write_corpus(spec, traces, args.out)
    print(f"wrote {len(traces)} traces to {out}")
    return 0


def _cmd_run(args) -> int:
    config = resolve_config(args.config)
    traces, _ = load_corpus(args.corpus)
    results, stats = run_corpus(
        traces, config, master_seed=args.seed, include_audio=args.audio
    )
    loudness = {}
    for trace_id in args.loudness_trace or []:
        trace = next((t for t in traces if t.trace_id == trace_id), None)
        if trace is None:
            print(f"no such trace {trace_id!r} in corpus", file=sys.stderr)
            return 2
        seed = derive_seed(args.seed, "run", trace_id)
        loudness[trace_id] = loudness_series_for(trace, config, seed)
    emit_artifacts(results, stats, args.out, loudness=loudness)
    print(f"ran {stats.n} traces under {config.name} -> {args.out}")
    print(
        "clamp rates: "
        + " ".join(f"{k}={v * 100:.1f}%" for k, v in stats.clamp_rates.items())
        + f" any={stats.any_clamp_rate * 100:.1f}%"
    )
    return 0


def _load_run(run_dir: Path):
    reports_dir = run_dir / "reports"
    if not reports_dir.is_dir():
        raise TapRewardError(f"{run_dir} has no reports/ directory")
    reports = [
        deserialize_report(path.read_bytes())
        for path in sorted(reports_dir.glob("*.json"))
    ]
    if not reports:
        raise TapRewardError(f"{run_dir} contains no reports")
    names = {r.config_name for r in reports}
    if len(names) != 1:
        raise TapRewardError(f"{run_dir} mixes configs: {sorted(names)}")
    return reports


def _cmd_evaluate(args) -> int:
    from .harness import PairedResult

    runs = {}
    for run_dir in map(Path, args.runs):
        reports = _load_run(run_dir)
        config = resolve_config(reports[0].config_name)
        results = [
            PairedResult(trace_id=r.trace_id, config_name=r.config_name, report=r)
            for r in reports
        ]
        stats = aggregate(results, config)
        runs[config.name] = (results, stats)
        print(f"{run_dir}: {stats.n} reports under {config.name}")

    checks: list[CheckResult] = []
    want = {"Relaxed", "Default", "Tight"}
    if want <= set(runs):
        checks.append(
            monotonicity_check(
                runs["Relaxed"][1], runs["Default"][1], runs["Tight"][1]
            )
        )
        checks.append(
            clamp_dominance_check(
                runs["Relaxed"][0], runs["Default"][0], runs["Tight"][0]
            )
        )
    else:
        print(
            f"monotonicity needs runs for {sorted(want)}, got {sorted(runs)}",
            file=sys.stderr,
        )
        return 2
    for name in sorted(runs):
        results, _ = runs[name]
        check = discriminability_check(results)
        checks.append(
            CheckResult(
                name=f"discriminability[{name}]",
                passed=check.passed,
                details=check.details,
            )
        )

    failed = False
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}")
        failed = failed or not check.passed
    if args.out:
        doc = {"checks": [c.to_doc() for c in checks]}
        Path(args.out).write_bytes(canonical_bytes(doc))
    return 1 if failed else 0


def _cmd_replay(args) -> int:
    report = deserialize_report(Path(args.report).read_bytes())
    trace_store = CorpusStore(args.corpus)
    config_store = ConfigStore()
    for path in sorted(Path(args.configs).glob("*.json")) if args.configs else []:
        config_store.add(load_config(path))
    result = replay_verify(report, trace_store, config_store)
    if result.exact_match:
        print(f"exact match for {result.trace_id}")
        return 0
    print(f"MISMATCH for {result.trace_id}: {', '.join(result.mismatched_fields)}")
    return 1


def _cmd_meter(args) -> int:
    from .engine import read_wav

    buffer = read_wav(args.wav)
    lufs = integrated_loudness(buffer)
    print(f"integrated: {'below gate' if lufs is None else f'{lufs:.3f} LUFS'}")
    try:
        lra = loudness_range(buffer)
        print(f"loudness range: {'below gate' if lra is None else f'{lra:.3f} LU'}")
    except TapRewardError as exc:
        print(f"loudness range: not computable ({exc})")
    try:
        slope = max_level_slope(buffer)
        print(f"max level slope: {slope:.3f} dB/s")
    except TapRewardError as exc:
        print(f"max level slope: not computable ({exc})")
    print(f"duration: {buffer.duration_s:.3f} s @ {buffer.sample_rate_hz} Hz")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.corpus, service_seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapreward",
        description="pattern-conditioned music rewards with enforced parameter envelopes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate the synthetic trace corpus")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: pinned)")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--total", type=int, default=None, help="trace count (multiple of 3)")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("run", help="paired baseline/constrained run over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True, help="relaxed|default|tight or config file")
    p.add_argument("--seed", type=int, default=DEFAULT_RUN_SEED)
    p.add_argument("--out", required=True, help="output run directory")
    p.add_argument("--audio", action="store_true", help="render audio and compute signal metrics")
    p.add_argument(
        "--loudness-trace",
        action="append",
        metavar="TRACE_ID",
        help="emit loudness series for this trace (repeatable)",
    )
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="aggregate runs and apply the distribution checks")
    p.add_argument("--runs", nargs="+", required=True, help="run directories")
    p.add_argument("--out", default=None, help="write check results to this JSON file")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("replay", help="re-run a report and verify bit-level agreement")
    p.add_argument("--report", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--configs", default=None, help="directory of custom config files")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("meter", help="loudness metrics for a WAV file")
    p.add_argument("--wav", required=True)
    p.set_defaults(func=_cmd_meter)

    p = sub.add_parser("serve", help="HTTP service for the browser console")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--corpus", required=True, help="data directory (traces, reports, configs)")
    p.add_argument("--seed", type=int, default=DEFAULT_RUN_SEED)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TapRewardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
