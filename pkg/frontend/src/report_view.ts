/** Pure mapping from server documents to view models.
 *
 * Everything here is presentation: badge text comes straight from
 * each clamp record, and the bar geometry places server numbers on a
 * fixed pixel scale. No enforcement logic lives on this side.
 */

import type {
  BoundsDoc,
  ClampRecordDoc,
  ConfigDoc,
  MetricsDoc,
  ParamName,
  ReportDoc,
} from "./types.js";
import { PARAM_NAMES } from "./types.js";

export interface Badge {
  text: "unclamped" | "clamped lower" | "clamped upper";
  clamped: boolean;
}

export function badgeFor(record: ClampRecordDoc): Badge {
  if (!record.clamped) return { text: "unclamped", clamped: false };
  return {
    text: record.bound_hit === "lower" ? "clamped lower" : "clamped upper",
    clamped: true,
  };
}

/** Geometry for one parameter bar, all positions in [0, 1].
 *
 * The display range stretches past the bounds far enough to show the
 * requested marker when it landed outside; the stretches beyond the
 * bounds are the highlighted out-of-bound zones. */
export interface ParamBar {
  parameter: ParamName;
  unit: string;
  requested: number;
  effective: number;
  badge: Badge;
  displayMin: number;
  displayMax: number;
  lowerZoneEnd: number; // 0 .. x is out of bounds on the low side
  upperZoneStart: number; // x .. 1 is out of bounds on the high side
  requestedPos: number;
  effectivePos: number;
}

function position(value: number, min: number, max: number): number {
  if (max <= min) return 0.5;
  return Math.min(1, Math.max(0, (value - min) / (max - min)));
}

export function paramBar(
  record: ClampRecordDoc,
  bounds: BoundsDoc,
): ParamBar {
  const width = bounds.upper - bounds.lower;
  const pad = width > 0 ? 0.15 * width : 1;
  const displayMin = Math.min(bounds.lower - pad, record.requested);
  const displayMax = Math.max(bounds.upper + pad, record.requested);
  return {
    parameter: record.parameter,
    unit: bounds.unit,
    requested: record.requested,
    effective: record.effective,
    badge: badgeFor(record),
    displayMin,
    displayMax,
    lowerZoneEnd: position(bounds.lower, displayMin, displayMax),
    upperZoneStart: position(bounds.upper, displayMin, displayMax),
    requestedPos: position(record.requested, displayMin, displayMax),
    effectivePos: position(record.effective, displayMin, displayMax),
  };
}

export function paramBars(report: ReportDoc, config: ConfigDoc): ParamBar[] {
  const byName = new Map(report.clamp_records.map((r) => [r.parameter, r]));
  return PARAM_NAMES.map((name) => {
    const record = byName.get(name);
    if (!record) throw new Error(`report has no clamp record for ${name}`);
    return paramBar(record, config[name]);
  });
}

const METRIC_LABELS: [keyof MetricsDoc, string, string][] = [
  ["integrated_lufs", "integrated", "LUFS"],
  ["loudness_range_lu", "loudness range", "LU"],
  ["onset_density_ev_s", "onset density", "ev/s"],
  ["max_level_slope_db_s", "max level slope", "dB/s"],
];

export interface MetricRow {
  name: string;
  baseline: string;
  constrained: string;
}

export function fmt(value: number | null | undefined, digits = 3): string {
  if (value === null || value === undefined) return "n/a";
  return value.toFixed(digits);
}

export function metricRows(report: ReportDoc): MetricRow[] {
  return METRIC_LABELS.map(([key, name, unit]) => ({
    name: `${name} (${unit})`,
    baseline: fmt(report.metrics_baseline?.[key]),
    constrained: fmt(report.metrics_constrained?.[key]),
  }));
}

export interface ReportSummary {
  traceId: string;
  label: string;
  tieBreak: boolean;
  template: string;
  configName: string;
  configHash: string;
  anyClamped: boolean;
}

export function summarize(report: ReportDoc): ReportSummary {
  return {
    traceId: report.trace_id,
    label: report.label.label,
    tieBreak: report.label.tie_break_applied,
    template: `${report.template.family} #${report.template.variant_index}`,
    configName: report.config_name,
    configHash: report.config_hash,
    anyClamped: report.clamp_records.some((r) => r.clamped),
  };
}
