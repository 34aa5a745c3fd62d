/** Page wiring: tap surface, report panel, tuning panel.
 *
 * The service URL comes from the `api` query parameter, defaulting
 * to the same origin on port 8000. All state transitions run off
 * service responses; the DOM below is a projection of them.
 */

import { ApiClient, ApiError } from "./api.js";
import { metricRows, paramBars, summarize } from "./report_view.js";
import { SessionRecorder, intensityFrom } from "./session.js";
import { TuningPanel } from "./tuning.js";
import type { FinalizeOut, ParamName } from "./types.js";
import { PARAM_NAMES } from "./types.js";

const LANE_COUNT = 5;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function apiBase(): string {
  const fromQuery = new URLSearchParams(location.search).get("api");
  return fromQuery ?? `${location.protocol}//${location.hostname}:8000`;
}

const api = new ApiClient(apiBase());
let recorder: SessionRecorder | null = null;
let tuning: TuningPanel | null = null;
let clockTimer: number | undefined;

function setStatus(text: string, isError = false): void {
  const node = el<HTMLSpanElement>("status");
  node.textContent = text;
  node.classList.toggle("error", isError);
}

async function refreshHeader(): Promise<void> {
  const info = await api.info();
  el("active-config").textContent = info.active_config;
  el("config-hash").textContent = info.config_hash.slice(0, 12);
  el("config-hash").title = info.config_hash;
}

function renderReadout(): void {
  if (!recorder) return;
  const r = recorder.readout();
  el("readout").textContent =
    `${r.tapCount} taps | ${(r.elapsedMs / 1000).toFixed(1)} s | ` +
    `${r.tapsPerSecond.toFixed(2)} taps/s`;
  const remaining = recorder.session.duration_ms - r.elapsedMs;
  el("clock").textContent = `${Math.max(0, remaining / 1000).toFixed(1)} s left`;
  el<HTMLButtonElement>("finalize").disabled = !recorder.canFinalize();
}

async function startSession(): Promise<void> {
  const session = await api.createSession(60000);
  recorder = new SessionRecorder(api, session, { now: () => performance.now() });
  el("session-id").textContent = session.session_id;
  el("report-panel").hidden = true;
  setStatus(`session ${session.session_id} running under ${session.config_name}`);
  window.clearInterval(clockTimer);
  clockTimer = window.setInterval(() => {
    renderReadout();
    if (recorder?.expired()) setStatus("time is up; finalize to hear the reward");
  }, 100);
  renderReadout();
  // background flush so finalize has little left to send
  window.setInterval(() => void recorder?.flush().catch(() => undefined), 1500);
}

function onLaneTap(lane: number, event: PointerEvent): void {
  if (!recorder) return;
  const outcome = recorder.recordTap(lane, intensityFrom(event));
  if (!outcome.recorded) {
    setStatus(
      outcome.reason === "expired"
        ? "session over: tap not recorded"
        : "session finalized: start a new one",
      true,
    );
    return;
  }
  const pad = el(`lane-${lane}`);
  pad.classList.remove("hit");
  void pad.offsetWidth; // restart the flash animation
  pad.classList.add("hit");
  renderReadout();
}

function renderReport(out: FinalizeOut): void {
  if (!tuning) return;
  const report = out.report;
  const summary = summarize(report);
  el("report-title").textContent =
    `${summary.traceId}: ${summary.label}` + (summary.tieBreak ? " (tie break)" : "");
  el("report-template").textContent = `template ${summary.template}`;
  el("report-config").textContent =
    `${summary.configName} @ ${summary.configHash.slice(0, 12)}`;

  const bars = el("param-bars");
  bars.replaceChildren();
  for (const bar of paramBars(report, tuning.state.active)) {
    const row = document.createElement("div");
    row.className = "param-row";
    const pct = (x: number) => `${(100 * x).toFixed(2)}%`;
    row.innerHTML = `
      <span class="param-name">${bar.parameter}</span>
      <span class="badge ${bar.badge.clamped ? "clamped" : "ok"}">${bar.badge.text}</span>
      <div class="bar">
        <div class="zone" style="left:0;width:${pct(bar.lowerZoneEnd)}"></div>
        <div class="zone" style="left:${pct(bar.upperZoneStart)};right:0"></div>
        <div class="marker requested" style="left:${pct(bar.requestedPos)}"
             title="requested ${bar.requested}"></div>
        <div class="marker effective" style="left:${pct(bar.effectivePos)}"
             title="effective ${bar.effective}"></div>
      </div>
      <span class="values">${bar.requested.toFixed(3)} &rarr; ${bar.effective.toFixed(3)} ${bar.unit}</span>`;
    bars.appendChild(row);
  }

  const table = el<HTMLTableElement>("metric-rows");
  table.replaceChildren();
  for (const row of metricRows(report)) {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${row.name}</td><td>${row.baseline}</td><td>${row.constrained}</td>`;
    table.appendChild(tr);
  }

  const audio = el<HTMLAudioElement>("reward-audio");
  audio.src = api.url(out.audio_url);
  el("report-panel").hidden = false;
  void audio.play().catch(() => undefined); // autoplay may need a click
}

async function finalizeSession(): Promise<void> {
  if (!recorder) return;
  try {
    setStatus("rendering the reward...");
    const out = await recorder.finalize();
    window.clearInterval(clockTimer);
    renderReport(out);
    setStatus(`report ${out.report.trace_id} ready`);
  } catch (err) {
    setStatus(err instanceof ApiError ? err.detail : String(err), true);
  }
}

function renderTuning(): void {
  if (!tuning) return;
  const panel = el("tuning-rows");
  panel.replaceChildren();
  const flagged = tuning.violatedParams();
  for (const param of PARAM_NAMES) {
    const bounds = tuning.state.draft[param];
    const metaBounds = tuning.state.meta[param];
    const row = document.createElement("div");
    row.className = "tuning-row" + (flagged.has(param) ? " violated" : "");
    row.innerHTML = `
      <span class="param-name">${param}</span>
      <input type="number" step="any" data-param="${param}" data-side="lower"
             value="${bounds.lower}">
      <input type="number" step="any" data-param="${param}" data-side="upper"
             value="${bounds.upper}">
      <span class="meta-range">permitted [${metaBounds.lower}, ${metaBounds.upper}] ${metaBounds.unit}</span>`;
    panel.appendChild(row);
  }
  el("tuning-active").textContent =
    `${tuning.state.active.name} @ ${tuning.state.activeHash.slice(0, 12)}`;
  const verdictBox = el("tuning-verdict");
  const lines = tuning.rejectionLines();
  if (lines.length > 0) {
    verdictBox.textContent = lines.join("\n");
    verdictBox.className = "verdict rejected";
  } else if (tuning.state.lastVerdict?.accepted) {
    verdictBox.textContent = "accepted";
    verdictBox.className = "verdict accepted";
  } else {
    verdictBox.textContent = "";
    verdictBox.className = "verdict";
  }
}

async function proposeTuning(): Promise<void> {
  if (!tuning) return;
  const name = el<HTMLInputElement>("tuning-name").value.trim();
  if (name) tuning.rename(name);
  for (const input of document.querySelectorAll<HTMLInputElement>("#tuning-rows input")) {
    tuning.editBound(
      input.dataset.param as ParamName,
      input.dataset.side as "lower" | "upper",
      Number(input.value),
    );
  }
  await tuning.propose();
  renderTuning();
  await refreshHeader();
}

async function main(): Promise<void> {
  try {
    await refreshHeader();
    tuning = new TuningPanel(api, await api.getConfig());
    renderTuning();
    setStatus("ready");
  } catch (err) {
    setStatus(`service unreachable at ${apiBase()}: ${String(err)}`, true);
    return;
  }

  const surface = el("lanes");
  for (let lane = 0; lane < LANE_COUNT; lane++) {
    const pad = document.createElement("button");
    pad.id = `lane-${lane}`;
    pad.className = "lane";
    pad.textContent = String(lane);
    pad.addEventListener("pointerdown", (ev) => onLaneTap(lane, ev));
    surface.appendChild(pad);
  }
  el("start").addEventListener("click", () => void startSession());
  el("finalize").addEventListener("click", () => void finalizeSession());
  el("propose").addEventListener("click", () => void proposeTuning());
  el("reset-draft").addEventListener("click", () => {
    tuning?.resetDraft();
    renderTuning();
  });
}

void main();
