/** Wire types for the tapreward HTTP interface.
 *
 * These mirror the service's canonical documents one to one. The
 * client never derives values of its own; it displays what these
 * carry.
 */

export type ParamName = "tempo_bpm" | "gain_db" | "accent_ratio";

export const PARAM_NAMES: readonly ParamName[] = [
  "tempo_bpm",
  "gain_db",
  "accent_ratio",
];

export interface BoundsDoc {
  lower: number;
  upper: number;
  unit: string;
}

export interface ConfigDoc {
  name: string;
  meta: string | null;
  tempo_bpm: BoundsDoc;
  gain_db: BoundsDoc;
  accent_ratio: BoundsDoc;
}

export interface InfoOut {
  service: string;
  version: string;
  active_config: string;
  config_hash: string;
}

export interface SessionOut {
  session_id: string;
  duration_ms: number;
  config_name: string;
  config_hash: string;
}

export interface TapEntry {
  timestamp_ms: number;
  lane: number;
  intensity: number;
  outcome: "hit" | "miss";
  note?: string;
}

export interface TapAck {
  accepted: number;
  total: number;
}

export interface ClampRecordDoc {
  parameter: ParamName;
  requested: number;
  effective: number;
  clamped: boolean;
  bound_hit: "lower" | "upper" | "none";
}

export interface FeaturesDoc {
  lane_diversity: number;
  dominant_lane_ratio: number;
  sequential_coverage: number;
  tap_rate: number;
  mean_intensity: number;
  accent_fraction: number;
}

export interface LabelDoc {
  label: string;
  scores: number[];
  tie_break_applied: boolean;
}

export interface TemplateDoc {
  family: string;
  variant_index: number;
  bar_count: number;
  steps_per_bar: number;
}

export interface MetricsDoc {
  integrated_lufs: number | null;
  loudness_range_lu: number | null;
  onset_density_ev_s: number | null;
  max_level_slope_db_s: number | null;
}

export interface DeltasDoc {
  d_onset_density: number | null;
  d_lufs: number | null;
  d_lra: number | null;
}

export interface TuningEventDoc {
  status: "accepted" | "rejected";
  config_name: string;
  config_hash: string | null;
  detail: string;
}

export interface ParamsDoc {
  tempo_bpm: number;
  gain_db: number;
  accent_ratio: number;
}

export interface ReportDoc {
  report_version: string;
  trace_id: string;
  trace_digest: string;
  seed: number;
  config_name: string;
  config_hash: string;
  features: FeaturesDoc;
  label: LabelDoc;
  requested: ParamsDoc;
  effective: ParamsDoc;
  clamp_records: ClampRecordDoc[];
  template: TemplateDoc;
  metrics_baseline: MetricsDoc | null;
  metrics_constrained: MetricsDoc | null;
  deltas: DeltasDoc | null;
  audio_digest_baseline: string | null;
  audio_digest_constrained: string | null;
  tuning_events: TuningEventDoc[];
}

export interface FinalizeOut {
  report: ReportDoc;
  audio_url: string;
}

export interface ConfigOut {
  config: ConfigDoc;
  config_hash: string;
  meta: ConfigDoc;
  meta_hash: string;
}

export interface TuningViolation {
  parameter: ParamName;
  side: "lower" | "upper";
  excess: number;
}

export interface TuningAccepted {
  accepted: true;
  config: ConfigDoc;
  config_hash: string;
}

export interface TuningRejected {
  accepted: false;
  detail: string;
  violations: TuningViolation[];
}

export type TuningVerdict = TuningAccepted | TuningRejected;

export interface ReportRow {
  trace_id: string;
  config_name: string;
  label: string;
  any_clamped: boolean;
}

export interface LoudnessSeries {
  time_s: number[];
  lufs: (number | null)[];
}

export interface LoudnessOut {
  baseline: { momentary: LoudnessSeries; short_term: LoudnessSeries };
  constrained: { momentary: LoudnessSeries; short_term: LoudnessSeries };
}
